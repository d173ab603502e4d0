#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ielts/corpus/band.hpp"
#include "ielts/rubric/rule_scorer.hpp"
#include "ielts/text/features.hpp"
#include "ielts/text/grammar.hpp"

namespace ielts::feedback {

enum class Polarity { strength, weakness };

std::string_view to_string(Polarity p);

// Message catalog, severity boosts and trigger thresholds, loaded from
// data/feedback/templates.json. Keys are "<criterion>.<condition>".
struct TemplateCatalog {
    struct Template {
        std::string message;
        std::optional<std::string> suggestion;
    };
    struct Thresholds {
        double min_paragraphs = 3;
        double min_connector_density = 0.2;
        double min_sophistication = 0.1;
        double min_lexical_diversity = 0.4;
        double max_error_density = 4.0;
    };

    std::map<std::string, double> severity;
    Thresholds thresholds;
    std::map<std::string, Template> templates;
    std::vector<std::string> topic_sentences;  // {keyword1}, {keyword2}
    std::string topic_sentence_fallback;
    std::vector<std::string> connectors;
    std::vector<std::pair<std::string, std::string>> lexical_upgrades;  // common -> precise
    std::size_t max_lexical_edits = 3;

    // Every weakness template must carry a suggestion.
    static TemplateCatalog from_json(const nlohmann::json& j);
    static TemplateCatalog load(const std::filesystem::path& templates, const std::filesystem::path& upgrades);
    static const TemplateCatalog& default_catalog();

    const Template& at(const std::string& key) const;
};

// Replaces {name} placeholders; unknown names are left as they are.
std::string render(std::string_view pattern, const std::map<std::string, std::string>& vars);

struct Suggestion {
    std::string text;
    std::vector<text::GrammarIssue> spans;
};

struct FeedbackItem {
    rubric::Criterion criterion = rubric::Criterion::ta;
    Polarity polarity = Polarity::strength;
    std::string condition;  // catalog key, e.g. "TA.below_word_count"
    std::vector<std::string> triggered;  // all forced-severity conditions that fired
    std::string message;
    std::optional<Suggestion> suggestion;
    double priority = 0.0;
};

struct FeedbackReport {
    corpus::Band predicted_band;
    std::vector<FeedbackItem> items;  // descending priority
    rubric::RubricScores per_criterion_scores;

    const FeedbackItem& item(rubric::Criterion c) const;
    nlohmann::json to_json() const;
    static FeedbackReport from_json(const nlohmann::json& j);
};

struct FeedbackOptions {
    int required_word_count = 250;
    std::vector<std::string> prompt_words;  // see rubric::prompt_content_words
};

// One item per criterion. Priority is the shortfall below the criterion mean
// plus the severity boosts of every condition that fired. Criteria below the
// mean, criteria with a fired condition, and the lowest criterion (ties
// broken TA, CC, LR, GRA) are weaknesses; the rest are strengths.
//
// Throws InvalidInput when the features or issues do not belong to `essay`.
FeedbackReport generate_feedback(std::string_view essay, const text::FeatureVector& features,
                                 const rubric::RubricScores& rubric, corpus::Band predicted,
                                 const std::vector<text::GrammarIssue>& issues, const FeedbackOptions& options = {},
                                 const TemplateCatalog& catalog = TemplateCatalog::default_catalog());

enum class EditKind { replace_span, insert_connector, split_paragraph, add_topic_sentence };

std::string_view to_string(EditKind k);
EditKind edit_kind_from_string(std::string_view s);

// Replace the byte span [start, end) of the original essay with
// `replacement`. Zero-width edits insert before whatever starts at `start`.
struct Edit {
    EditKind kind = EditKind::replace_span;
    rubric::Criterion criterion = rubric::Criterion::gra;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string replacement;
    std::string source;   // "grammar", "spelling", "punctuation", "lexical", "connector", "paragraph", "topic"
    int words_added = 0;  // declared word-count change
    double priority = 0.0;

    friend bool operator==(const Edit&, const Edit&) = default;
};

bool overlaps(const Edit& a, const Edit& b);

struct EditPlan {
    std::vector<Edit> edits;    // descending priority, then ascending start
    std::vector<Edit> dropped;  // lost to an overlapping, earlier edit

    nlohmann::json to_json() const;
};

EditPlan feedback_to_edit_plan(const FeedbackReport& report, std::string_view essay,
                               const FeedbackOptions& options = {},
                               const TemplateCatalog& catalog = TemplateCatalog::default_catalog());

// Applies non-overlapping edits in any order; throws InvalidInput on overlap
// or out-of-range spans.
std::string apply_edits(std::string_view essay, std::span<const Edit> edits);

}  // namespace ielts::feedback
