#include "ielts/persona/persona.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"
#include "ielts/eval/report.hpp"
#include "ielts/text/tokenizer.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::persona {

namespace {

using feedback::Edit;
using feedback::EditKind;
using nlohmann::json;

std::mt19937_64 edit_rng(std::uint64_t seed, const std::string& essay_id, std::uint64_t index) {
    return std::mt19937_64(mix64(mix64(seed) ^ fnv1a64(essay_id)) + index);
}

std::size_t paragraph_count(std::string_view text) { return text::tokenize(text).paragraphs.size(); }

std::unordered_set<std::string> folded_words(std::string_view text) {
    std::unordered_set<std::string> out;
    for (const auto& t : text::word_tokens(text)) out.insert(text::fold(t.text));
    return out;
}

std::string safe_file_name(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.*f", digits, v);
    return buf;
}

}  // namespace

std::string_view to_string(Style s) {
    switch (s) {
        case Style::surface: return "surface";
        case Style::structural: return "structural";
        case Style::selective: return "selective";
        case Style::coherence: return "coherence";
        case Style::conservative: return "conservative";
    }
    return "?";
}

bool Persona::allows(const Edit& e) const {
    if (e.source == "lexical" && !vocabulary_edits) return false;
    return std::find(allowed_actions.begin(), allowed_actions.end(), e.kind) != allowed_actions.end();
}

json Persona::to_json() const {
    json actions = json::array();
    for (auto k : allowed_actions) actions.push_back(feedback::to_string(k));
    const char* rule = paragraphs == ParagraphRule::unchanged ? "unchanged"
                       : paragraphs == ParagraphRule::non_decreasing ? "non-decreasing" : "free";
    return {{"id", id},
            {"style", to_string(style)},
            {"compliance", compliance},
            {"allowed_actions", actions},
            {"band_level", band_level},
            {"paragraphs", rule},
            {"max_edits", max_edits},
            {"lexicon_gate", lexicon_gate},
            {"vocabulary_edits", vocabulary_edits}};
}

const std::vector<Persona>& default_personas() {
    static const std::vector<Persona> personas = [] {
        std::vector<Persona> p(5);
        p[0] = {"P1", Style::surface, 0.9, {EditKind::replace_span}, "6.5", ParagraphRule::unchanged, 0, false};
        p[1] = {"P2", Style::structural, 0.6, {EditKind::split_paragraph, EditKind::add_topic_sentence}, "6.5-6.8",
                ParagraphRule::non_decreasing, 0, false};
        p[2] = {"P3", Style::selective, 0.4,
                {EditKind::replace_span, EditKind::insert_connector, EditKind::split_paragraph,
                 EditKind::add_topic_sentence},
                "6.8", ParagraphRule::free, 2, false, true};
        p[3] = {"P4", Style::coherence, 0.9,
                {EditKind::insert_connector, EditKind::add_topic_sentence, EditKind::replace_span}, "7.0",
                ParagraphRule::free, 0, true, true};
        p[4] = {"P5", Style::conservative, 0.6, {EditKind::replace_span, EditKind::insert_connector}, "6.7",
                ParagraphRule::unchanged, 0, false};
        return p;
    }();
    return personas;
}

std::vector<Persona> personas_with_compliance(double compliance) {
    if (!(compliance >= 0.0 && compliance <= 1.0)) throw InvalidInput("compliance must lie in [0, 1]");
    auto p = default_personas();
    for (auto& x : p) x.compliance = compliance;
    return p;
}

json AuditEntry::to_json() const {
    return {{"plan_index", plan_index},
            {"kind", feedback::to_string(edit.kind)},
            {"criterion", rubric::to_string(edit.criterion)},
            {"start", edit.start},
            {"end", edit.end},
            {"replacement", edit.replacement},
            {"source", edit.source},
            {"outcome", outcome},
            {"draw", draw},
            {"detail", detail}};
}

std::size_t Revision::applied() const {
    return static_cast<std::size_t>(
        std::count_if(audit.begin(), audit.end(), [](const AuditEntry& a) { return a.outcome == "applied"; }));
}

std::vector<std::string> out_of_lexicon_words(std::string_view text, const text::FrequencyLexicon& lexicon) {
    std::set<std::string> out;
    for (const auto& t : text::word_tokens(text)) {
        if (!lexicon.contains(t.text)) out.insert(text::fold(t.text));
    }
    return {out.begin(), out.end()};
}

std::optional<std::string> constraint_violation(const Persona& persona, std::string_view original,
                                                std::string_view revised, std::size_t edits_applied,
                                                const text::FrequencyLexicon& lexicon) {
    if (text::count_words(revised) == 0) return "revision removed every word";
    if (persona.max_edits > 0 && edits_applied > persona.max_edits) {
        return "more than " + std::to_string(persona.max_edits) + " edits";
    }
    if (persona.paragraphs != ParagraphRule::free) {
        const auto before = paragraph_count(original), after = paragraph_count(revised);
        if (persona.paragraphs == ParagraphRule::unchanged && after != before)
            return "paragraph count changed from " + std::to_string(before) + " to " + std::to_string(after);
        if (persona.paragraphs == ParagraphRule::non_decreasing && after < before)
            return "paragraph count fell from " + std::to_string(before) + " to " + std::to_string(after);
    }
    if (persona.lexicon_gate) {
        const auto before = out_of_lexicon_words(original, lexicon);
        for (const auto& w : out_of_lexicon_words(revised, lexicon)) {
            if (!std::binary_search(before.begin(), before.end(), w)) return "introduces rare word '" + w + "'";
        }
    }
    return std::nullopt;
}

Revision apply_revision(const corpus::EssayRecord& essay, const feedback::FeedbackReport& report,
                        const Persona& persona, std::uint64_t seed, const feedback::FeedbackOptions& options,
                        const feedback::TemplateCatalog& catalog, const text::FrequencyLexicon& lexicon) {
    const auto plan = feedback::feedback_to_edit_plan(report, essay.body, options, catalog);
    Revision rev;
    rev.text = essay.body;
    const auto present = persona.lexicon_gate ? folded_words(essay.body) : std::unordered_set<std::string>{};

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < plan.edits.size(); ++i) {
        const auto& e = plan.edits[i];
        AuditEntry a{i, e, "", -1, ""};
        if (!persona.allows(e)) {
            a.outcome = "not-allowed";
        } else if (persona.lexicon_gate) {
            for (const auto& t : text::word_tokens(e.replacement)) {
                const auto w = text::fold(t.text);
                if (!lexicon.contains(w) && !present.count(w)) {
                    a.outcome = "lexicon";
                    a.detail = w;
                    break;
                }
            }
        }
        if (a.outcome.empty()) candidates.push_back(i);
        rev.audit.push_back(std::move(a));
    }

    if (persona.max_edits > 0 && candidates.size() > 1) {
        auto rng = edit_rng(seed, essay.id, ~std::uint64_t{0});
        const std::size_t keep = std::min<std::size_t>(1 + uniform_below(rng, persona.max_edits), candidates.size());
        for (std::size_t k = keep; k < candidates.size(); ++k) rev.audit[candidates[k]].outcome = "truncated";
        candidates.resize(keep);
    }

    std::vector<Edit> accepted;
    for (auto i : candidates) {
        auto& a = rev.audit[i];
        auto rng = edit_rng(seed, essay.id, i);
        a.draw = uniform01(rng);
        if (!(a.draw < persona.compliance)) {
            a.outcome = "declined";
            continue;
        }
        accepted.push_back(a.edit);
        auto tentative = feedback::apply_edits(essay.body, accepted);
        if (auto why = constraint_violation(persona, essay.body, tentative, accepted.size(), lexicon)) {
            accepted.pop_back();
            a.outcome = "rolled-back";
            a.detail = *why;
            continue;
        }
        a.outcome = "applied";
        rev.text = std::move(tentative);
    }
    return rev;
}

void ExperimentSpec::validate() const {
    if (personas.empty()) throw InvalidInput("no personas");
    if (essays_per_persona == 0) throw InvalidInput("essays_per_persona must be positive");
    const auto expected = personas.size() * essays_per_persona;
    if (essays.size() != expected) {
        throw InvalidInput("experiment needs exactly " + std::to_string(expected) + " essays, got " +
                           std::to_string(essays.size()));
    }
    std::set<std::string> ids, persona_ids;
    const std::set<std::string> excluded(excluded_ids.begin(), excluded_ids.end());
    for (const auto& e : essays) {
        if (!ids.insert(e.id).second) throw InvalidInput("duplicate essay id " + e.id);
        if (excluded.count(e.id)) throw InvalidInput("essay " + e.id + " was used to train or evaluate the model");
        if (text::count_words(e.body) == 0) throw InvalidInput("essay " + e.id + " has no words");
    }
    for (const auto& p : personas) {
        if (!persona_ids.insert(p.id).second) throw InvalidInput("duplicate persona id " + p.id);
        if (!(p.compliance >= 0.0 && p.compliance <= 1.0)) throw InvalidInput("compliance must lie in [0, 1]");
    }
}

std::map<std::string, std::vector<corpus::EssayRecord>> assign_essays(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<corpus::EssayRecord> order = spec.essays;
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::mt19937_64 rng(mix64(spec.seed ^ 0x617373u));
    fisher_yates(order, rng);
    std::map<std::string, std::vector<corpus::EssayRecord>> out;
    for (std::size_t p = 0; p < spec.personas.size(); ++p) {
        auto& group = out[spec.personas[p].id];
        for (std::size_t k = 0; k < spec.essays_per_persona; ++k) group.push_back(order[p * spec.essays_per_persona + k]);
    }
    return out;
}

json RevisionResult::to_json() const {
    json audit = json::array();
    for (const auto& a : edits_applied) audit.push_back(a.to_json());
    return {{"essay_id", essay_id},
            {"persona_id", persona_id},
            {"original_raw", original_raw},
            {"original_band", original_band.value()},
            {"revised_text", revised_text},
            {"revised_raw", revised_raw},
            {"revised_band", revised_band.value()},
            {"delta_raw", delta_raw},
            {"edits_applied", audit}};
}

std::vector<PersonaSummary> summarize(const std::vector<RevisionResult>& results, const std::vector<Persona>& personas) {
    std::vector<PersonaSummary> out;
    for (const auto& p : personas) {
        PersonaSummary s;
        s.persona_id = p.id;
        std::size_t improved = 0;
        for (const auto& r : results) {
            if (r.persona_id != p.id) continue;
            ++s.essays;
            s.original_mean += r.original_raw;
            s.revised_mean += r.revised_raw;
            improved += r.delta_raw > 0;
        }
        if (s.essays) {
            const double n = static_cast<double>(s.essays);
            s.original_mean /= n;
            s.revised_mean /= n;
            s.delta_mean = s.revised_mean - s.original_mean;
            s.pct_improved = 100.0 * static_cast<double>(improved) / n;
        }
        out.push_back(s);
    }
    return out;
}

json ExperimentResult::summary_json() const {
    json personas_json = json::array();
    for (const auto& s : personas) {
        personas_json.push_back({{"persona", s.persona_id},
                                 {"essays", s.essays},
                                 {"original_mean", s.original_mean},
                                 {"revised_mean", s.revised_mean},
                                 {"delta_mean", s.delta_mean},
                                 {"pct_improved", s.pct_improved}});
    }
    json assignment = json::object();
    for (const auto& r : results) assignment[r.persona_id].push_back(r.essay_id);
    return {{"personas", personas_json},
            {"stats", stats ? stats->to_json() : json(nullptr)},
            {"stats_error", stats_error},
            {"assignment", assignment},
            {"n_results", results.size()},
            {"model_digest_before", model_digest_before},
            {"model_digest_after", model_digest_after}};
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const scoring::EssayScorer& scorer) {
    const auto groups = assign_essays(spec);
    ExperimentResult out;
    out.model_digest_before = scorer.model_digest();
    const auto& lexicon = scorer.analyzer().lexicon();

    for (const auto& persona : spec.personas) {
        for (const auto& essay : groups.at(persona.id)) {
            const auto options = scoring::feedback_options(essay.prompt, 250);
            const auto before = scorer.score(essay.body, essay.prompt);
            auto rev = apply_revision(essay, before.feedback, persona, spec.seed, options, scorer.catalog(), lexicon);
            RevisionResult r;
            r.essay_id = essay.id;
            r.persona_id = persona.id;
            r.original_raw = before.raw;
            r.original_band = before.band;
            r.revised_raw = scorer.raw_score(rev.text, essay.prompt);
            r.revised_band = corpus::round_to_band(r.revised_raw);
            r.delta_raw = r.revised_raw - r.original_raw;
            r.revised_text = std::move(rev.text);
            r.edits_applied = std::move(rev.audit);
            if (auto why = constraint_violation(persona, essay.body, r.revised_text,
                                                static_cast<std::size_t>(std::count_if(
                                                    r.edits_applied.begin(), r.edits_applied.end(),
                                                    [](const AuditEntry& a) { return a.outcome == "applied"; })),
                                                lexicon)) {
                throw Error("persona_violation", persona.id + " on " + essay.id + ": " + *why);
            }
            out.results.push_back(std::move(r));
        }
    }
    out.model_digest_after = scorer.model_digest();
    if (out.model_digest_after != out.model_digest_before) throw Error("model_changed", "model weights changed during the run");

    std::sort(out.results.begin(), out.results.end(),
              [](const RevisionResult& a, const RevisionResult& b) { return a.essay_id < b.essay_id; });
    out.personas = summarize(out.results, spec.personas);
    std::vector<double> before, after;
    for (const auto& r : out.results) {
        before.push_back(r.original_raw);
        after.push_back(r.revised_raw);
    }
    try {
        out.stats = eval::paired_tests(before, after);
    } catch (const InvalidInput& e) {
        out.stats_error = e.what();
    }
    return out;
}

void write_experiment(const std::filesystem::path& out_dir, const ExperimentResult& result) {
    for (const auto& r : result.results) {
        eval::write_json(out_dir / "results" / (safe_file_name(r.essay_id) + ".json"), r.to_json());
    }
    eval::write_json(out_dir / "summary.json", result.summary_json());

    std::ostringstream md;
    md << "| Persona | Essays | Original Mean | Revised Mean | Δ Mean | % Improved |\n|---|---|---|---|---|---|\n";
    for (const auto& s : result.personas) {
        char line[160];
        std::snprintf(line, sizeof line, "| %s | %zu | %.4f | %.4f | %s | %.1f%% |\n", s.persona_id.c_str(), s.essays,
                      s.original_mean, s.revised_mean, fixed(s.delta_mean, 4).c_str(), s.pct_improved);
        md << line;
    }
    eval::write_text(out_dir / "personas.md", md.str());

    if (result.stats) {
        std::vector<double> before, after;
        std::vector<std::string> groups;
        for (const auto& r : result.results) {
            before.push_back(r.original_raw);
            after.push_back(r.revised_raw);
            groups.push_back(r.persona_id);
        }
        eval::write_paired(out_dir, *result.stats, before, after, groups);
    }
}

}  // namespace ielts::persona
