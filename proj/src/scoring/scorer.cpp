#include "ielts/scoring/scorer.hpp"

#include <cmath>
#include <cstdio>

#include "ielts/common/error.hpp"
#include "ielts/text/lexicon.hpp"

namespace ielts::scoring {

struct EssayScorer::State {
    std::shared_ptr<const neural::HybridModel> model;
    text::FrequencyLexicon lexicon;
    text::TextAnalyzer analyzer;
    rubric::RuleScorer rules;
    const feedback::TemplateCatalog* catalog;

    State(std::shared_ptr<const neural::HybridModel> m, std::shared_ptr<const text::GrammarBackend> backend,
          rubric::RuleTables tables, const feedback::TemplateCatalog& c)
        : model(std::move(m)),
          lexicon(text::FrequencyLexicon::default_lexicon().with_top_k(
              model ? model->lexicon_top_k : text::FrequencyLexicon::kDefaultTopK)),
          analyzer(lexicon, std::move(backend)),
          rules(std::move(tables)),
          catalog(&c) {}
};

EssayScorer::EssayScorer(std::shared_ptr<const neural::HybridModel> model,
                         std::shared_ptr<const text::GrammarBackend> backend, rubric::RuleTables tables,
                         const feedback::TemplateCatalog& catalog) {
    if (!backend) throw InvalidInput("a grammar backend is required");
    state_ = std::make_shared<State>(std::move(model), std::move(backend), std::move(tables), catalog);
}

feedback::FeedbackOptions feedback_options(std::string_view prompt, int required_word_count) {
    feedback::FeedbackOptions o;
    o.required_word_count = required_word_count;
    o.prompt_words = rubric::prompt_content_words(prompt);
    return o;
}

namespace {

struct Core {
    text::TextAnalysis analysis;
    rubric::RubricScores rubric;
    std::optional<double> neural_raw;
    double raw;
};

}  // namespace

static Core score_core(const EssayScorer& s, std::string_view essay, std::string_view prompt, int required) {
    Core c;
    c.analysis = s.analyzer().analyze(essay);
    c.rubric = s.rules().score(c.analysis, rubric::TaskSpec::from_prompt(prompt, required));
    if (const auto* m = s.model()) {
        const double raw = m->forward(m->prepare(essay, c.analysis.features));
        if (!std::isfinite(raw)) throw InvalidInput("model produced a non-finite score");
        c.neural_raw = raw;
        c.raw = raw;
    } else {
        c.raw = c.rubric.mean();
    }
    return c;
}

ScoredEssay EssayScorer::score(std::string_view essay, std::string_view prompt, int required_word_count) const {
    auto c = score_core(*this, essay, prompt, required_word_count);
    ScoredEssay out;
    out.band = corpus::round_to_band(c.raw);
    out.percentage = rubric::band_percentage(out.band);
    out.feedback = feedback::generate_feedback(essay, c.analysis.features, c.rubric, out.band, c.analysis.issues,
                                               feedback_options(prompt, required_word_count), *state_->catalog);
    out.analysis = std::move(c.analysis);
    out.rubric = c.rubric;
    out.neural_raw = c.neural_raw;
    out.raw = c.raw;
    return out;
}

double EssayScorer::raw_score(std::string_view essay, std::string_view prompt, int required_word_count) const {
    return score_core(*this, essay, prompt, required_word_count).raw;
}

const text::TextAnalyzer& EssayScorer::analyzer() const { return state_->analyzer; }
const neural::HybridModel* EssayScorer::model() const { return state_->model.get(); }
const rubric::RuleScorer& EssayScorer::rules() const { return state_->rules; }
const feedback::TemplateCatalog& EssayScorer::catalog() const { return *state_->catalog; }

std::string EssayScorer::model_digest() const {
    if (!state_->model) return "rule-only";
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_->model->weights_digest()));
    return buf;
}

}  // namespace ielts::scoring
