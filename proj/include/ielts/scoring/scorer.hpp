#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ielts/feedback/feedback.hpp"
#include "ielts/neural/hybrid.hpp"
#include "ielts/rubric/rule_scorer.hpp"
#include "ielts/text/features.hpp"

namespace ielts::scoring {

struct ScoredEssay {
    text::TextAnalysis analysis;
    rubric::RubricScores rubric;
    std::optional<double> neural_raw;
    double raw = 0;      // neural output when a model is loaded, otherwise the rubric mean
    corpus::Band band;   // round_to_band(raw)
    double percentage = 0;
    feedback::FeedbackReport feedback;
};

// The one scoring path shared by the CLI, the service and the persona
// simulator: analyse, rule-score the four criteria, run the hybrid model
// when present, and derive feedback. Copies share state; thread safe.
class EssayScorer {
public:
    // `model` may be null for rule-only scoring. The analyzer uses the
    // model's lexicon top-K when a model is given.
    EssayScorer(std::shared_ptr<const neural::HybridModel> model, std::shared_ptr<const text::GrammarBackend> backend,
                rubric::RuleTables tables = rubric::RuleTables::cycle3(),
                const feedback::TemplateCatalog& catalog = feedback::TemplateCatalog::default_catalog());

    ScoredEssay score(std::string_view essay, std::string_view prompt = {}, int required_word_count = 250) const;

    // Raw score only (skips feedback).
    double raw_score(std::string_view essay, std::string_view prompt = {}, int required_word_count = 250) const;

    const text::TextAnalyzer& analyzer() const;
    const neural::HybridModel* model() const;
    const rubric::RuleScorer& rules() const;
    const feedback::TemplateCatalog& catalog() const;

    // Hex digest of the model weights, or "rule-only".
    std::string model_digest() const;

private:
    struct State;
    std::shared_ptr<const State> state_;
};

feedback::FeedbackOptions feedback_options(std::string_view prompt, int required_word_count);

}  // namespace ielts::scoring
