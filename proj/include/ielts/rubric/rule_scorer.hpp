#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ielts/corpus/band.hpp"
#include "ielts/text/features.hpp"

namespace ielts::rubric {

enum class Criterion { ta, cc, lr, gra };

inline constexpr Criterion kCriteria[] = {Criterion::ta, Criterion::cc, Criterion::lr, Criterion::gra};

std::string_view to_string(Criterion c);  // "TA", "CC", "LR", "GRA"
Criterion criterion_from_string(std::string_view s);

struct RubricScores {
    double ta = 0, cc = 0, lr = 0, gra = 0;
    corpus::Band overall;
    double percentage = 0;

    double operator[](Criterion c) const;
    double mean() const { return (ta + cc + lr + gra) / 4.0; }

    // Fills overall and percentage from the four criteria.
    static RubricScores from_criteria(double ta, double cc, double lr, double gra);
};

// overall / 9 * 100 rounded to one decimal.
double band_percentage(corpus::Band band);

// Lowercase light suffix stripping ("technologies" and "technology" share a stem).
std::string stem(std::string_view word);

// Distinct case-folded content words of a prompt in order of appearance.
std::vector<std::string> prompt_content_words(std::string_view prompt);

struct TaskSpec {
    int required_word_count = 250;
    std::vector<std::string> prompt_keywords;  // distinct stems

    void validate() const;

    // Content words of the prompt (stopwords and task-instruction words removed), stemmed.
    static TaskSpec from_prompt(std::string_view prompt, int required_word_count = 250);
};

enum class TaScaling { linear, step };

struct RuleTables {
    std::string name = "cycle3";

    struct TaskAchievement {
        TaScaling scaling = TaScaling::linear;
        double coverage_band_min = 4.0;
        double coverage_band_max = 9.0;
        double coverage_without_prompt = 0.6;
        double step_penalty_factor = 0.6;
    } ta;

    struct Threshold {
        double max_density;
        double band;
    };
    struct Grammar {
        std::vector<Threshold> thresholds;  // ascending max_density
        double floor_band = 3.0;
    } gra;

    struct Lexical {
        double sophistication_weight = 0.6;
        double diversity_weight = 0.4;
        double blend_min = 0.0;
        double blend_max = 0.6;
        double band_min = 4.0;
        double band_max = 9.0;
    } lr;

    struct Coherence {
        double base = 5.0;
        double connector_weight = 1.5;
        double connector_saturation = 0.5;
        double paragraph_bonus = 1.0;
        int paragraph_min = 3;
        int paragraph_max = 5;
        double sentence_length_bonus = 0.5;
        double sentence_length_min = 12.0;
        double sentence_length_max = 25.0;
    } cc;

    static RuleTables from_json(const nlohmann::json& j);
    static RuleTables load(const std::filesystem::path& path);
    // data/rules/cycle3.json
    static const RuleTables& cycle3();
    nlohmann::json to_json() const;
};

class RuleScorer {
public:
    explicit RuleScorer(RuleTables tables = RuleTables::cycle3());

    const RuleTables& tables() const noexcept { return tables_; }

    // Fraction of task keywords whose stem occurs in the essay; the table's
    // default when the task has no keywords.
    double keyword_coverage(const text::TokenizedEssay& essay, const TaskSpec& task) const;
    double ta_base(double coverage) const;
    double scale_ta(double base, double word_count, int required_word_count) const;

    double score_ta(const text::FeatureVector& f, const text::TokenizedEssay& essay, const TaskSpec& task) const;
    double score_gra(const text::FeatureVector& f) const;
    double score_lr(const text::FeatureVector& f) const;
    double score_cc(const text::FeatureVector& f) const;

    RubricScores score(const text::TextAnalysis& analysis, const TaskSpec& task) const;
    RubricScores score_overall(std::string_view essay, const TaskSpec& task, const text::TextAnalyzer& analyzer) const;

private:
    RuleTables tables_;
};

}  // namespace ielts::rubric
