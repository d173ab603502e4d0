#include "ielts/feedback/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/text/lexicon.hpp"
#include "ielts/text/tokenizer.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::feedback {

namespace {

using nlohmann::json;
using rubric::Criterion;

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    std::string s = buf;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
}

int criterion_index(Criterion c) { return static_cast<int>(c); }

std::string key(Criterion c, std::string_view condition) {
    return std::string(rubric::to_string(c)) + "." + std::string(condition);
}

json issue_to_json(const text::GrammarIssue& i) {
    return {{"start", i.start},
            {"end", i.end},
            {"category", text::to_string(i.category)},
            {"message", i.message},
            {"replacement", i.suggestion ? json(*i.suggestion) : json(nullptr)}};
}

text::GrammarIssue issue_from_json(const json& j) {
    text::GrammarIssue i;
    i.start = j.at("start").get<std::size_t>();
    i.end = j.at("end").get<std::size_t>();
    i.category = text::issue_category_from_string(j.at("category").get<std::string>());
    i.message = j.value("message", "");
    if (j.contains("replacement") && !j["replacement"].is_null()) i.suggestion = j["replacement"].get<std::string>();
    return i;
}

json edit_to_json(const Edit& e) {
    return {{"kind", to_string(e.kind)},     {"criterion", rubric::to_string(e.criterion)},
            {"start", e.start},              {"end", e.end},
            {"replacement", e.replacement},  {"source", e.source},
            {"words_added", e.words_added},  {"priority", e.priority}};
}

int word_delta(std::string_view before, std::string_view after) {
    return static_cast<int>(text::count_words(after)) - static_cast<int>(text::count_words(before));
}

// Lowercases the first letter of a sentence-initial word so that a connector
// can precede it; "I", contractions of it and acronyms keep their case.
std::string demote_initial(const std::string& word) {
    if (word.empty() || !(word[0] >= 'A' && word[0] <= 'Z')) return word;
    if (word == "I" || word.rfind("I'", 0) == 0) return word;
    if (word.size() > 1 && word[1] >= 'A' && word[1] <= 'Z') return word;
    std::string out = word;
    out[0] = static_cast<char>(out[0] - 'A' + 'a');
    return out;
}

std::string match_case(const std::string& replacement, std::string_view original) {
    std::string out = replacement;
    if (!original.empty() && original[0] >= 'A' && original[0] <= 'Z' && !out.empty() && out[0] >= 'a' &&
        out[0] <= 'z') {
        out[0] = static_cast<char>(out[0] - 'a' + 'A');
    }
    return out;
}

}  // namespace

std::string_view to_string(Polarity p) { return p == Polarity::strength ? "strength" : "weakness"; }

std::string_view to_string(EditKind k) {
    switch (k) {
        case EditKind::replace_span: return "replace-span";
        case EditKind::insert_connector: return "insert-connector";
        case EditKind::split_paragraph: return "split-paragraph";
        case EditKind::add_topic_sentence: return "add-topic-sentence";
    }
    return "?";
}

EditKind edit_kind_from_string(std::string_view s) {
    for (auto k : {EditKind::replace_span, EditKind::insert_connector, EditKind::split_paragraph,
                   EditKind::add_topic_sentence}) {
        if (to_string(k) == s) return k;
    }
    throw InvalidInput("unknown edit kind '" + std::string(s) + "'");
}

std::string render(std::string_view pattern, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] == '{') {
            const auto close = pattern.find('}', i);
            if (close != std::string_view::npos) {
                const auto it = vars.find(std::string(pattern.substr(i + 1, close - i - 1)));
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += pattern[i++];
    }
    return out;
}

// ---- catalog ----

TemplateCatalog TemplateCatalog::from_json(const json& j) {
    TemplateCatalog c;
    try {
        for (const auto& [k, v] : j.at("severity").items()) {
            const double s = v.get<double>();
            if (!(s >= 0.0)) throw InvalidInput("severity '" + k + "' must be nonnegative");
            c.severity[k] = s;
        }
        if (j.contains("thresholds")) {
            const auto& t = j["thresholds"];
            c.thresholds.min_paragraphs = t.value("min_paragraphs", c.thresholds.min_paragraphs);
            c.thresholds.min_connector_density = t.value("min_connector_density", c.thresholds.min_connector_density);
            c.thresholds.min_sophistication = t.value("min_sophistication", c.thresholds.min_sophistication);
            c.thresholds.min_lexical_diversity = t.value("min_lexical_diversity", c.thresholds.min_lexical_diversity);
            c.thresholds.max_error_density = t.value("max_error_density", c.thresholds.max_error_density);
        }
        for (const auto& [k, v] : j.at("templates").items()) {
            Template t;
            t.message = v.at("message").get<std::string>();
            if (v.contains("suggestion")) t.suggestion = v["suggestion"].get<std::string>();
            c.templates[k] = std::move(t);
        }
        c.topic_sentences = j.value("topic_sentences", std::vector<std::string>{});
        c.topic_sentence_fallback = j.value("topic_sentence_fallback", "");
        c.connectors = j.value("connectors", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("feedback catalog: ") + e.what());
    }
    for (auto crit : rubric::kCriteria) {
        for (const char* cond : {"weakness", "strength"}) {
            if (!c.templates.count(key(crit, cond))) throw InvalidInput("feedback catalog lacks " + key(crit, cond));
        }
    }
    for (const auto& [k, t] : c.templates) {
        const bool weakness_key = k.size() < 9 || k.compare(k.size() - 9, 9, ".strength") != 0;
        if (weakness_key && (!t.suggestion || t.suggestion->empty()))
            throw InvalidInput("weakness template " + k + " needs a suggestion");
    }
    for (const auto& [k, s] : c.severity) {
        (void)s;
        if (!c.templates.count(k)) throw InvalidInput("severity " + k + " has no template");
    }
    if (c.connectors.empty()) throw InvalidInput("feedback catalog needs connectors");
    if (c.topic_sentences.empty() || c.topic_sentence_fallback.empty())
        throw InvalidInput("feedback catalog needs topic sentence templates");
    return c;
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& templates, const std::filesystem::path& upgrades) {
    json j;
    try {
        j = json::parse(read_file(templates));
    } catch (const json::parse_error& e) {
        throw InvalidInput(templates.string() + ": " + e.what());
    }
    auto c = from_json(j);
    for (const auto& line : read_lines(upgrades)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw InvalidInput(upgrades.string() + ": expected two tab-separated columns");
        c.lexical_upgrades.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return c;
}

const TemplateCatalog& TemplateCatalog::default_catalog() {
    static const TemplateCatalog c =
        load(data_file("feedback/templates.json"), data_file("lexicon/lexical_upgrades.tsv"));
    return c;
}

const TemplateCatalog::Template& TemplateCatalog::at(const std::string& k) const {
    const auto it = templates.find(k);
    if (it == templates.end()) throw NotFound("no feedback template " + k);
    return it->second;
}

// ---- report ----

const FeedbackItem& FeedbackReport::item(Criterion c) const {
    for (const auto& i : items) {
        if (i.criterion == c) return i;
    }
    throw NotFound("report has no item for " + std::string(rubric::to_string(c)));
}

json FeedbackReport::to_json() const {
    json items_json = json::array();
    for (const auto& i : items) {
        json s = nullptr;
        if (i.suggestion) {
            json spans = json::array();
            for (const auto& sp : i.suggestion->spans) spans.push_back(issue_to_json(sp));
            s = {{"text", i.suggestion->text}, {"spans", spans}};
        }
        items_json.push_back({{"criterion", rubric::to_string(i.criterion)},
                              {"polarity", to_string(i.polarity)},
                              {"condition", i.condition},
                              {"triggered", i.triggered},
                              {"message", i.message},
                              {"suggestion", s},
                              {"priority", i.priority}});
    }
    const auto& r = per_criterion_scores;
    return {{"predicted_band", predicted_band.value()},
            {"per_criterion_scores",
             {{"TA", r.ta}, {"CC", r.cc}, {"LR", r.lr}, {"GRA", r.gra},
              {"overall", r.overall.value()}, {"percentage", r.percentage}}},
            {"items", items_json}};
}

FeedbackReport FeedbackReport::from_json(const json& j) {
    FeedbackReport r;
    try {
        r.predicted_band = corpus::Band::from_lattice(j.at("predicted_band").get<double>());
        const auto& s = j.at("per_criterion_scores");
        r.per_criterion_scores = rubric::RubricScores::from_criteria(s.at("TA"), s.at("CC"), s.at("LR"), s.at("GRA"));
        for (const auto& ij : j.at("items")) {
            FeedbackItem i;
            i.criterion = rubric::criterion_from_string(ij.at("criterion").get<std::string>());
            i.polarity = ij.at("polarity").get<std::string>() == "weakness" ? Polarity::weakness : Polarity::strength;
            i.condition = ij.value("condition", "");
            i.triggered = ij.value("triggered", std::vector<std::string>{});
            i.message = ij.at("message").get<std::string>();
            if (!ij.at("suggestion").is_null()) {
                Suggestion sg;
                sg.text = ij["suggestion"].at("text").get<std::string>();
                for (const auto& sp : ij["suggestion"].at("spans")) sg.spans.push_back(issue_from_json(sp));
                i.suggestion = std::move(sg);
            }
            i.priority = ij.at("priority").get<double>();
            r.items.push_back(std::move(i));
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("feedback report: ") + e.what());
    }
    return r;
}

FeedbackReport generate_feedback(std::string_view essay, const text::FeatureVector& f,
                                 const rubric::RubricScores& rubric, corpus::Band predicted,
                                 const std::vector<text::GrammarIssue>& issues, const FeedbackOptions& options,
                                 const TemplateCatalog& catalog) {
    if (static_cast<double>(text::count_words(essay)) != f.word_count)
        throw InvalidInput("features were not computed from this essay (word counts differ)");
    for (const auto& i : issues) {
        if (i.start >= i.end || i.end > essay.size())
            throw InvalidInput("grammar issue span lies outside the essay");
    }
    for (auto c : rubric::kCriteria) {
        const double s = rubric[c];
        if (!std::isfinite(s) || s < corpus::kMinBand || s > corpus::kMaxBand)
            throw InvalidInput("criterion score out of range");
    }
    if (options.required_word_count <= 0) throw InvalidInput("required_word_count must be positive");

    const double mean = rubric.mean();
    Criterion lowest = Criterion::ta;
    for (auto c : rubric::kCriteria) {
        if (rubric[c] < rubric[lowest]) lowest = c;
    }

    const auto& t = catalog.thresholds;
    auto fired = [&](Criterion c) {
        std::vector<std::string> out;
        switch (c) {
            case Criterion::ta:
                if (f.word_count < options.required_word_count) out.push_back("TA.below_word_count");
                break;
            case Criterion::cc:
                if (f.paragraph_count < t.min_paragraphs) out.push_back("CC.few_paragraphs");
                if (f.connector_density < t.min_connector_density) out.push_back("CC.few_connectors");
                break;
            case Criterion::lr:
                if (f.sophistication_ratio < t.min_sophistication) out.push_back("LR.low_sophistication");
                if (f.lexical_diversity < t.min_lexical_diversity) out.push_back("LR.low_diversity");
                break;
            case Criterion::gra:
                if (f.grammar_error_density > t.max_error_density) out.push_back("GRA.high_error_density");
                break;
        }
        // Only conditions the catalog knows how to phrase take part.
        std::erase_if(out, [&](const std::string& k) { return !catalog.templates.count(k); });
        return out;
    };

    std::vector<text::GrammarIssue> sorted_issues = issues;
    text::sort_issues(sorted_issues);

    FeedbackReport report;
    report.predicted_band = predicted;
    report.per_criterion_scores = rubric;
    for (auto c : rubric::kCriteria) {
        FeedbackItem item;
        item.criterion = c;
        item.triggered = fired(c);
        const double score = rubric[c];
        const bool weak = !item.triggered.empty() || score < mean || c == lowest;
        item.polarity = weak ? Polarity::weakness : Polarity::strength;
        if (weak) {
            item.priority = std::max(0.0, mean - score);
            for (const auto& k : item.triggered) {
                const auto it = catalog.severity.find(k);
                if (it != catalog.severity.end()) item.priority += it->second;
            }
            item.condition = item.triggered.empty() ? key(c, "weakness") : item.triggered.front();
        } else {
            item.condition = key(c, "strength");
        }
        const std::map<std::string, std::string> vars = {
            {"score", format_number(score)},
            {"word_count", format_number(f.word_count)},
            {"required_word_count", std::to_string(options.required_word_count)},
            {"paragraph_count", format_number(f.paragraph_count)},
            {"issue_count", std::to_string(issues.size())}};
        const auto& tpl = catalog.at(item.condition);
        item.message = render(tpl.message, vars);
        if (tpl.suggestion) {
            Suggestion s;
            s.text = render(*tpl.suggestion, vars);
            if (c == Criterion::gra) s.spans = sorted_issues;
            // Strength items only carry a suggestion when there is something concrete to point at.
            if (weak || !s.spans.empty()) item.suggestion = std::move(s);
        }
        report.items.push_back(std::move(item));
    }
    std::stable_sort(report.items.begin(), report.items.end(), [](const FeedbackItem& a, const FeedbackItem& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        if (a.polarity != b.polarity) return a.polarity == Polarity::weakness;
        return criterion_index(a.criterion) < criterion_index(b.criterion);
    });
    return report;
}

// ---- edit plan ----

bool overlaps(const Edit& a, const Edit& b) {
    if (a.start < b.end && b.start < a.end) return true;
    return a.start == a.end && b.start == b.end && a.start == b.start;
}

json EditPlan::to_json() const {
    json e = json::array(), d = json::array();
    for (const auto& x : edits) e.push_back(edit_to_json(x));
    for (const auto& x : dropped) d.push_back(edit_to_json(x));
    return {{"edits", e}, {"dropped", d}};
}

EditPlan feedback_to_edit_plan(const FeedbackReport& report, std::string_view essay, const FeedbackOptions& options,
                               const TemplateCatalog& catalog) {
    EditPlan plan;
    if (report.items.empty()) return plan;
    const auto tokens = text::tokenize(essay);
    const auto& connectors = text::ConnectorLexicon::default_lexicon();

    std::vector<Edit> candidates;
    for (const auto& item : report.items) {
        const bool weak = item.polarity == Polarity::weakness;
        auto has = [&](const char* cond) {
            return std::find(item.triggered.begin(), item.triggered.end(), cond) != item.triggered.end();
        };
        auto push = [&](Edit e) {
            e.criterion = item.criterion;
            e.priority = item.priority;
            candidates.push_back(std::move(e));
        };

        switch (item.criterion) {
            case Criterion::gra: {
                if (!item.suggestion) break;
                for (const auto& issue : item.suggestion->spans) {
                    if (!issue.suggestion || issue.end > essay.size()) continue;
                    Edit e;
                    e.kind = EditKind::replace_span;
                    e.start = issue.start;
                    e.end = issue.end;
                    e.replacement = *issue.suggestion;
                    e.source = std::string(text::to_string(issue.category));
                    e.words_added = word_delta(essay.substr(issue.start, issue.end - issue.start), e.replacement);
                    push(std::move(e));
                }
                break;
            }
            case Criterion::lr: {
                if (!weak) break;
                std::size_t made = 0;
                for (const auto& [common, precise] : catalog.lexical_upgrades) {
                    if (made >= catalog.max_lexical_edits) break;
                    for (const auto& w : tokens.words) {
                        if (text::fold(w.text) != common) continue;
                        Edit e;
                        e.kind = EditKind::replace_span;
                        e.start = w.begin;
                        e.end = w.end;
                        e.replacement = match_case(precise, w.text);
                        e.source = "lexical";
                        e.words_added = word_delta(w.text, e.replacement);
                        push(std::move(e));
                        ++made;
                        break;
                    }
                }
                break;
            }
            case Criterion::cc: {
                if (!weak) break;
                std::size_t next_connector = 0;
                for (std::size_t p = 0; p < tokens.paragraphs.size(); ++p) {
                    const auto sentences = tokens.paragraph_sentences(p);
                    int gap = 0;
                    for (std::size_t s = 0; s < sentences.size(); ++s) {
                        const auto idx = tokens.paragraphs[p].first_sentence + s;
                        const auto words = tokens.sentence_words(idx);
                        if (connectors.count(words) > 0) {
                            gap = 0;
                            continue;
                        }
                        if (++gap < 2) continue;
                        gap = 0;
                        const auto& first = words.front();
                        const auto& phrase = catalog.connectors[next_connector++ % catalog.connectors.size()];
                        Edit e;
                        e.kind = EditKind::insert_connector;
                        e.start = first.begin;
                        e.end = first.end;
                        e.replacement = phrase + ", " + demote_initial(std::string(essay.substr(first.begin, first.end - first.begin)));
                        e.source = "connector";
                        e.words_added = static_cast<int>(text::count_words(phrase));
                        push(std::move(e));
                    }
                }
                // Long paragraphs are split at their middle sentence boundary.
                const std::size_t min_sentences = has("CC.few_paragraphs") ? 4 : 8;
                for (std::size_t p = 0; p < tokens.paragraphs.size(); ++p) {
                    const auto sentences = tokens.paragraph_sentences(p);
                    if (sentences.size() < min_sentences) continue;
                    const std::size_t k = sentences.size() / 2;
                    Edit e;
                    e.kind = EditKind::split_paragraph;
                    e.start = sentences[k - 1].end;
                    e.end = sentences[k].begin;
                    e.replacement = "\n\n";
                    e.source = "paragraph";
                    push(std::move(e));
                }
                break;
            }
            case Criterion::ta: {
                if (!weak) break;
                std::vector<std::string> prompt_stems;
                for (const auto& w : options.prompt_words) prompt_stems.push_back(rubric::stem(w));
                const std::size_t n = tokens.paragraphs.size();
                const std::size_t first = n >= 3 ? 1 : 0;
                const std::size_t last = n >= 3 ? n - 1 : n;
                std::size_t next_template = 0, next_keyword = 0;
                for (std::size_t p = first; p < last; ++p) {
                    const auto& para = tokens.paragraphs[p];
                    bool on_topic = false;
                    for (const auto& w : tokens.sentence_words(para.first_sentence)) {
                        const auto s = rubric::stem(w.text);
                        if (std::find(prompt_stems.begin(), prompt_stems.end(), s) != prompt_stems.end()) on_topic = true;
                    }
                    if (on_topic) continue;
                    std::string sentence;
                    if (options.prompt_words.empty()) {
                        sentence = catalog.topic_sentence_fallback;
                    } else {
                        const auto& kw = options.prompt_words;
                        sentence = render(catalog.topic_sentences[next_template++ % catalog.topic_sentences.size()],
                                          {{"keyword1", kw[next_keyword % kw.size()]},
                                           {"keyword2", kw[(next_keyword + 1) % kw.size()]}});
                        next_keyword += 2;
                    }
                    Edit e;
                    e.kind = EditKind::add_topic_sentence;
                    e.start = para.begin;
                    e.end = para.begin;
                    e.replacement = sentence + " ";
                    e.source = "topic";
                    e.words_added = static_cast<int>(text::count_words(sentence));
                    push(std::move(e));
                }
                break;
            }
        }
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const Edit& a, const Edit& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        return a.start < b.start;
    });
    for (auto& e : candidates) {
        const bool clash = std::any_of(plan.edits.begin(), plan.edits.end(), [&](const Edit& k) { return overlaps(k, e); });
        (clash ? plan.dropped : plan.edits).push_back(std::move(e));
    }
    return plan;
}

std::string apply_edits(std::string_view essay, std::span<const Edit> edits) {
    std::vector<const Edit*> order;
    for (const auto& e : edits) {
        if (e.start > e.end || e.end > essay.size()) throw InvalidInput("edit span lies outside the essay");
        order.push_back(&e);
    }
    std::sort(order.begin(), order.end(), [](const Edit* a, const Edit* b) {
        if (a->start != b->start) return a->start > b->start;
        return a->end > b->end;
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (overlaps(*order[i], *order[j])) throw InvalidInput("edits overlap");
        }
    }
    std::string out(essay);
    for (const auto* e : order) out.replace(e->start, e->end - e->start, e->replacement);
    return out;
}

}  // namespace ielts::feedback
