#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ielts/corpus/essay.hpp"
#include "ielts/eval/stats.hpp"
#include "ielts/feedback/feedback.hpp"
#include "ielts/scoring/scorer.hpp"
#include "ielts/text/lexicon.hpp"

namespace ielts::persona {

enum class Style { surface, structural, selective, coherence, conservative };
enum class ParagraphRule { unchanged, non_decreasing, free };

std::string_view to_string(Style s);

struct Persona {
    std::string id;  // "P1".."P5"
    Style style = Style::surface;
    double compliance = 0.9;
    std::vector<feedback::EditKind> allowed_actions;
    std::string band_level;  // reporting only

    ParagraphRule paragraphs = ParagraphRule::free;
    std::size_t max_edits = 0;  // 0: unlimited
    bool lexicon_gate = false;      // no new words outside the frequency lexicon
    bool vocabulary_edits = false;  // accepts lexical-upgrade replacements

    bool allows(const feedback::Edit& e) const;
    nlohmann::json to_json() const;
};

// P1..P5 with compliance 0.9, 0.6, 0.4, 0.9, 0.6.
const std::vector<Persona>& default_personas();

// Copies of the defaults with every compliance replaced.
std::vector<Persona> personas_with_compliance(double compliance);

struct AuditEntry {
    std::size_t plan_index = 0;
    feedback::Edit edit;
    // applied, declined (coin), not-allowed, lexicon, truncated, rolled-back
    std::string outcome;
    double draw = -1;  // compliance coin, -1 when no coin was drawn
    std::string detail;

    nlohmann::json to_json() const;
};

struct Revision {
    std::string text;
    std::vector<AuditEntry> audit;

    std::size_t applied() const;
};

// Words of `text` outside `lexicon`, case-folded.
std::vector<std::string> out_of_lexicon_words(std::string_view text, const text::FrequencyLexicon& lexicon);

// Names the first persona constraint `revised` breaks, if any.
std::optional<std::string> constraint_violation(const Persona& persona, std::string_view original,
                                                std::string_view revised, std::size_t edits_applied,
                                                const text::FrequencyLexicon& lexicon);

// Filters the edit plan to the persona's actions (and lexicon gate), lets
// P3-style personas keep only their top one or two edits, flips one
// compliance coin per surviving edit seeded by (seed, essay id, plan index),
// and rolls back any edit that would break a persona constraint.
Revision apply_revision(const corpus::EssayRecord& essay, const feedback::FeedbackReport& report,
                        const Persona& persona, std::uint64_t seed, const feedback::FeedbackOptions& options,
                        const feedback::TemplateCatalog& catalog, const text::FrequencyLexicon& lexicon);

struct ExperimentSpec {
    std::vector<corpus::EssayRecord> essays;  // exactly personas × essays_per_persona
    std::vector<Persona> personas = default_personas();
    std::size_t essays_per_persona = 6;
    std::uint64_t seed = 42;
    std::vector<std::string> excluded_ids;  // training, validation and test ids of the model

    void validate() const;
};

// Seeded partition of the essays into equal groups, one per persona.
std::map<std::string, std::vector<corpus::EssayRecord>> assign_essays(const ExperimentSpec& spec);

struct RevisionResult {
    std::string essay_id;
    std::string persona_id;
    double original_raw = 0;
    corpus::Band original_band;
    std::string revised_text;
    double revised_raw = 0;
    corpus::Band revised_band;
    double delta_raw = 0;
    std::vector<AuditEntry> edits_applied;  // full audit, including skipped edits

    nlohmann::json to_json() const;
};

struct PersonaSummary {
    std::string persona_id;
    std::size_t essays = 0;
    double original_mean = 0, revised_mean = 0, delta_mean = 0, pct_improved = 0;
};

struct ExperimentResult {
    std::vector<RevisionResult> results;  // sorted by essay id
    std::vector<PersonaSummary> personas;
    std::optional<eval::StatsReport> stats;  // absent when every delta is identical
    std::string stats_error;
    std::string model_digest_before, model_digest_after;

    nlohmann::json summary_json() const;
};

std::vector<PersonaSummary> summarize(const std::vector<RevisionResult>& results,
                                      const std::vector<Persona>& personas);

// score -> feedback -> revise -> rescore for every essay with the same
// scorer. Throws InvalidInput for a malformed spec and Error when the model
// changes during the run or a persona constraint is found broken afterwards.
ExperimentResult run_experiment(const ExperimentSpec& spec, const scoring::EssayScorer& scorer);

// Writes results/<essay id>.json, summary.json, personas.md and the paired
// report files into `out_dir`.
void write_experiment(const std::filesystem::path& out_dir, const ExperimentResult& result);

}  // namespace ielts::persona
