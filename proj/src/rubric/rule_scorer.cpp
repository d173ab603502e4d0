#include "ielts/rubric/rule_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/text/tokenizer.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::rubric {

namespace {

using nlohmann::json;

double clamp9(double x) { return std::clamp(x, corpus::kMinBand, corpus::kMaxBand); }

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

const std::unordered_set<std::string>& stopwords() {
    static const auto words = [] {
        std::unordered_set<std::string> s;
        for (auto& w : read_lines(data_file("lexicon/stopwords.txt"))) s.insert(text::fold(w));
        return s;
    }();
    return words;
}

// Words from the standard task instructions rather than the topic.
const std::unordered_set<std::string>& instruction_words() {
    static const std::unordered_set<std::string> words = {
        "discuss", "give", "opinion", "opinions", "view", "views", "agree", "disagree", "extent",
        "reason", "reasons", "answer", "example", "examples", "include", "relevant", "own", "think",
        "believe", "people", "some", "others", "many", "more", "what", "why", "advantage",
        "advantages", "disadvantage", "disadvantages", "outweigh", "both", "problem", "problems",
        "solution", "solutions", "measure", "measures", "cause", "causes", "development"};
    return words;
}

}  // namespace

std::string_view to_string(Criterion c) {
    switch (c) {
        case Criterion::ta: return "TA";
        case Criterion::cc: return "CC";
        case Criterion::lr: return "LR";
        case Criterion::gra: return "GRA";
    }
    return "?";
}

Criterion criterion_from_string(std::string_view s) {
    for (auto c : kCriteria) {
        if (to_string(c) == s) return c;
    }
    throw InvalidInput("unknown criterion '" + std::string(s) + "'");
}

double RubricScores::operator[](Criterion c) const {
    switch (c) {
        case Criterion::ta: return ta;
        case Criterion::cc: return cc;
        case Criterion::lr: return lr;
        case Criterion::gra: return gra;
    }
    return 0.0;
}

double band_percentage(corpus::Band band) {
    return std::round(band.value() / 9.0 * 1000.0) / 10.0;
}

RubricScores RubricScores::from_criteria(double ta, double cc, double lr, double gra) {
    RubricScores r;
    r.ta = ta;
    r.cc = cc;
    r.lr = lr;
    r.gra = gra;
    r.overall = corpus::round_to_band(r.mean());
    r.percentage = band_percentage(r.overall);
    return r;
}

std::string stem(std::string_view word) {
    std::string w = text::fold(word);
    if (w.size() > 2 && w.compare(w.size() - 2, 2, "'s") == 0) w.resize(w.size() - 2);
    w.erase(std::remove(w.begin(), w.end(), '\''), w.end());

    static const char* const suffixes[] = {"ational", "ization", "ations", "ation", "ments", "ment", "ness",
                                           "ings",    "ions",    "ing",    "ion",   "ies",   "ied",  "ers",
                                           "ed",      "er",      "ly",     "es",    "s"};
    for (const char* suf : suffixes) {
        const std::size_t n = std::char_traits<char>::length(suf);
        if (w.size() >= n + 3 && w.compare(w.size() - n, n, suf) == 0) {
            if (n == 1 && w[w.size() - 2] == 's') break;  // "class", "glass"
            w.resize(w.size() - n);
            break;
        }
    }
    if (w.size() > 3 && (w.back() == 'e' || w.back() == 'y' || w.back() == 'i')) w.pop_back();
    if (w.size() > 3 && w.back() == w[w.size() - 2] && !is_vowel(w.back()) && w.back() != 'l' && w.back() != 's') {
        w.pop_back();
    }
    return w;
}

void TaskSpec::validate() const {
    if (required_word_count <= 0) throw InvalidInput("required_word_count must be positive");
}

std::vector<std::string> prompt_content_words(std::string_view prompt) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& tok : text::word_tokens(prompt)) {
        auto folded = text::fold(tok.text);
        if (folded.size() < 3 || stopwords().count(folded) || instruction_words().count(folded)) continue;
        if (seen.insert(folded).second) out.push_back(std::move(folded));
    }
    return out;
}

TaskSpec TaskSpec::from_prompt(std::string_view prompt, int required_word_count) {
    TaskSpec spec;
    spec.required_word_count = required_word_count;
    spec.validate();
    std::unordered_set<std::string> seen;
    for (const auto& w : prompt_content_words(prompt)) {
        auto s = stem(w);
        if (seen.insert(s).second) spec.prompt_keywords.push_back(std::move(s));
    }
    return spec;
}

RuleTables RuleTables::from_json(const json& j) {
    RuleTables t;
    try {
        t.name = j.value("name", t.name);
        const auto& ta = j.at("task_achievement");
        const auto scaling = ta.value("scaling", std::string("linear"));
        if (scaling == "linear") {
            t.ta.scaling = TaScaling::linear;
        } else if (scaling == "step") {
            t.ta.scaling = TaScaling::step;
        } else {
            throw InvalidInput("unknown TA scaling '" + scaling + "'");
        }
        t.ta.coverage_band_min = ta.value("coverage_band_min", t.ta.coverage_band_min);
        t.ta.coverage_band_max = ta.value("coverage_band_max", t.ta.coverage_band_max);
        t.ta.coverage_without_prompt = ta.value("coverage_without_prompt", t.ta.coverage_without_prompt);
        t.ta.step_penalty_factor = ta.value("step_penalty_factor", t.ta.step_penalty_factor);

        const auto& g = j.at("grammar");
        for (const auto& row : g.at("thresholds")) {
            t.gra.thresholds.push_back({row.at("max_density").get<double>(), row.at("band").get<double>()});
        }
        t.gra.floor_band = g.value("floor_band", t.gra.floor_band);

        const auto& l = j.at("lexical");
        t.lr.sophistication_weight = l.value("sophistication_weight", t.lr.sophistication_weight);
        t.lr.diversity_weight = l.value("diversity_weight", t.lr.diversity_weight);
        t.lr.blend_min = l.value("blend_min", t.lr.blend_min);
        t.lr.blend_max = l.value("blend_max", t.lr.blend_max);
        t.lr.band_min = l.value("band_min", t.lr.band_min);
        t.lr.band_max = l.value("band_max", t.lr.band_max);

        const auto& c = j.at("coherence");
        t.cc.base = c.value("base", t.cc.base);
        t.cc.connector_weight = c.value("connector_weight", t.cc.connector_weight);
        t.cc.connector_saturation = c.value("connector_saturation", t.cc.connector_saturation);
        t.cc.paragraph_bonus = c.value("paragraph_bonus", t.cc.paragraph_bonus);
        t.cc.paragraph_min = c.value("paragraph_min", t.cc.paragraph_min);
        t.cc.paragraph_max = c.value("paragraph_max", t.cc.paragraph_max);
        t.cc.sentence_length_bonus = c.value("sentence_length_bonus", t.cc.sentence_length_bonus);
        t.cc.sentence_length_min = c.value("sentence_length_min", t.cc.sentence_length_min);
        t.cc.sentence_length_max = c.value("sentence_length_max", t.cc.sentence_length_max);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("invalid rule tables: ") + e.what());
    }

    if (!std::is_sorted(t.gra.thresholds.begin(), t.gra.thresholds.end(),
                        [](const auto& a, const auto& b) { return a.max_density < b.max_density; })) {
        throw InvalidInput("grammar thresholds must be in ascending density order");
    }
    for (std::size_t i = 1; i < t.gra.thresholds.size(); ++i) {
        if (t.gra.thresholds[i].band > t.gra.thresholds[i - 1].band) {
            throw InvalidInput("grammar bands must not increase with density");
        }
    }
    if (!t.gra.thresholds.empty() && t.gra.floor_band > t.gra.thresholds.back().band) {
        throw InvalidInput("grammar floor band exceeds the last threshold band");
    }
    if (t.lr.blend_max <= t.lr.blend_min) throw InvalidInput("lexical blend range is empty");
    if (t.lr.sophistication_weight < 0 || t.lr.diversity_weight < 0) {
        throw InvalidInput("lexical weights must be nonnegative");
    }
    if (t.cc.connector_saturation <= 0) throw InvalidInput("connector_saturation must be positive");
    return t;
}

RuleTables RuleTables::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw InvalidInput("cannot parse rule tables " + path.string() + ": " + e.what());
    }
}

const RuleTables& RuleTables::cycle3() {
    static const RuleTables tables = load(data_file("rules/cycle3.json"));
    return tables;
}

json RuleTables::to_json() const {
    json thresholds = json::array();
    for (const auto& t : gra.thresholds) thresholds.push_back({{"max_density", t.max_density}, {"band", t.band}});
    return {
        {"name", name},
        {"task_achievement",
         {{"scaling", ta.scaling == TaScaling::linear ? "linear" : "step"},
          {"coverage_band_min", ta.coverage_band_min},
          {"coverage_band_max", ta.coverage_band_max},
          {"coverage_without_prompt", ta.coverage_without_prompt},
          {"step_penalty_factor", ta.step_penalty_factor}}},
        {"grammar", {{"thresholds", thresholds}, {"floor_band", gra.floor_band}}},
        {"lexical",
         {{"sophistication_weight", lr.sophistication_weight},
          {"diversity_weight", lr.diversity_weight},
          {"blend_min", lr.blend_min},
          {"blend_max", lr.blend_max},
          {"band_min", lr.band_min},
          {"band_max", lr.band_max}}},
        {"coherence",
         {{"base", cc.base},
          {"connector_weight", cc.connector_weight},
          {"connector_saturation", cc.connector_saturation},
          {"paragraph_bonus", cc.paragraph_bonus},
          {"paragraph_min", cc.paragraph_min},
          {"paragraph_max", cc.paragraph_max},
          {"sentence_length_bonus", cc.sentence_length_bonus},
          {"sentence_length_min", cc.sentence_length_min},
          {"sentence_length_max", cc.sentence_length_max}}},
    };
}

RuleScorer::RuleScorer(RuleTables tables) : tables_(std::move(tables)) {}

double RuleScorer::keyword_coverage(const text::TokenizedEssay& essay, const TaskSpec& task) const {
    if (task.prompt_keywords.empty()) return tables_.ta.coverage_without_prompt;
    std::unordered_set<std::string> stems;
    for (const auto& w : essay.words) stems.insert(stem(w.text));
    std::size_t hit = 0;
    for (const auto& k : task.prompt_keywords) {
        if (stems.count(k)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(task.prompt_keywords.size());
}

double RuleScorer::ta_base(double coverage) const {
    const auto& t = tables_.ta;
    return t.coverage_band_min + (t.coverage_band_max - t.coverage_band_min) * std::clamp(coverage, 0.0, 1.0);
}

double RuleScorer::scale_ta(double base, double word_count, int required_word_count) const {
    if (required_word_count <= 0) throw InvalidInput("required_word_count must be positive");
    const double ratio = word_count / static_cast<double>(required_word_count);
    if (ratio >= 1.0) return clamp9(base);
    if (tables_.ta.scaling == TaScaling::step) return clamp9(base * tables_.ta.step_penalty_factor);
    return clamp9(base * ratio);
}

double RuleScorer::score_ta(const text::FeatureVector& f, const text::TokenizedEssay& essay,
                            const TaskSpec& task) const {
    return scale_ta(ta_base(keyword_coverage(essay, task)), f.word_count, task.required_word_count);
}

double RuleScorer::score_gra(const text::FeatureVector& f) const {
    for (const auto& t : tables_.gra.thresholds) {
        if (f.grammar_error_density <= t.max_density) return clamp9(t.band);
    }
    return clamp9(tables_.gra.floor_band);
}

double RuleScorer::score_lr(const text::FeatureVector& f) const {
    const auto& t = tables_.lr;
    const double blend = t.sophistication_weight * f.sophistication_ratio + t.diversity_weight * f.lexical_diversity;
    const double u = std::clamp((blend - t.blend_min) / (t.blend_max - t.blend_min), 0.0, 1.0);
    return clamp9(t.band_min + (t.band_max - t.band_min) * u);
}

double RuleScorer::score_cc(const text::FeatureVector& f) const {
    const auto& t = tables_.cc;
    double s = t.base + t.connector_weight * std::min(1.0, f.connector_density / t.connector_saturation);
    if (f.paragraph_count >= t.paragraph_min && f.paragraph_count <= t.paragraph_max) s += t.paragraph_bonus;
    if (f.mean_sentence_length >= t.sentence_length_min && f.mean_sentence_length <= t.sentence_length_max) {
        s += t.sentence_length_bonus;
    }
    return clamp9(s);
}

RubricScores RuleScorer::score(const text::TextAnalysis& analysis, const TaskSpec& task) const {
    task.validate();
    return RubricScores::from_criteria(score_ta(analysis.features, analysis.tokens, task), score_cc(analysis.features),
                                       score_lr(analysis.features), score_gra(analysis.features));
}

RubricScores RuleScorer::score_overall(std::string_view essay, const TaskSpec& task,
                                       const text::TextAnalyzer& analyzer) const {
    return score(analyzer.analyze(essay), task);
}

}  // namespace ielts::rubric
