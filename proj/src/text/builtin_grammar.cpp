#include <algorithm>
#include <array>
#include <cctype>
#include <tuple>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/text/grammar.hpp"
#include "ielts/text/tokenizer.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::text {

namespace {

constexpr std::array<std::string_view, 22> kAgreementBlockers = {
    "can", "could", "will", "would", "shall", "should", "may", "might", "must", "does", "did",
    "do", "to", "let", "lets", "make", "makes", "made", "help", "helps", "not", "didn't"};

constexpr std::array<std::string_view, 26> kConsonantSoundVowelWords = {
    "university", "universities", "unique", "united", "union", "unit", "units", "uniform",
    "universal", "use", "used", "useful", "user", "users", "usual", "usually", "utility",
    "european", "europe", "euro", "one", "once", "unicorn", "usage", "utensil", "uranium"};

constexpr std::array<std::string_view, 8> kVowelSoundConsonantWords = {
    "hour", "hours", "hourly", "honest", "honestly", "honour", "honor", "heir"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& list, std::string_view w) {
    return std::find(list.begin(), list.end(), w) != list.end();
}

bool is_ascii_word(std::string_view w) {
    return std::all_of(w.begin(), w.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool only_space_between(std::string_view text, const Token& a, const Token& b) {
    if (b.begin <= a.end) return false;
    const auto gap = text.substr(a.end, b.begin - a.end);
    return std::all_of(gap.begin(), gap.end(), [](char c) { return c == ' ' || c == '\t'; });
}

// Applies the capitalisation pattern of `original` to `replacement`.
std::string match_case(std::string_view original, std::string replacement) {
    if (original.empty() || replacement.empty()) return replacement;
    const bool first_upper = std::isupper(static_cast<unsigned char>(original[0])) != 0;
    const bool all_upper = original.size() > 1 && std::none_of(original.begin(), original.end(), [](char c) {
        return std::islower(static_cast<unsigned char>(c)) != 0;
    });
    if (all_upper) {
        for (auto& c : replacement) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else if (first_upper) {
        replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
    }
    return replacement;
}

bool starts_with_vowel_sound(std::string_view w) {
    if (w.empty()) return false;
    if (contains(kVowelSoundConsonantWords, w)) return true;
    for (const auto& prefix : kConsonantSoundVowelWords) {
        if (w == prefix) return false;
    }
    if (w.substr(0, 3) == "uni" || w.substr(0, 2) == "eu") return false;
    return std::string_view("aeiou").find(w[0]) != std::string_view::npos;
}

bool is_ascii_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || static_cast<unsigned char>(c) >= 0x80;
}

bool closes_known_abbreviation(std::string_view text, std::size_t dot) {
    static constexpr std::array<std::string_view, 12> kAbbrev = {"mr", "mrs", "ms", "dr", "prof", "st",
                                                                 "etc", "e.g", "i.e", "vs", "no", "approx"};
    std::size_t start = dot;
    while (start > 0 && (std::isalpha(static_cast<unsigned char>(text[start - 1])) || text[start - 1] == '.')) {
        --start;
    }
    return contains(kAbbrev, fold(text.substr(start, dot - start)));
}

}  // namespace

BuiltinGrammarResources BuiltinGrammarResources::load_default() {
    BuiltinGrammarResources r;
    r.dictionary = read_lines(data_file("lexicon/dictionary_en.txt"));
    for (const auto& line : read_lines(data_file("lexicon/misspellings.tsv"))) {
        const auto tab = line.find('\t');
        if (tab != std::string::npos) r.misspellings.emplace(line.substr(0, tab), line.substr(tab + 1));
    }
    for (const auto& line : read_lines(data_file("grammar/agreement_verbs.tsv"))) {
        const auto tab = line.find('\t');
        if (tab != std::string::npos) r.third_person.emplace(line.substr(0, tab), line.substr(tab + 1));
    }
    return r;
}

BuiltinGrammarBackend::BuiltinGrammarBackend(BuiltinGrammarResources resources)
    : misspellings_(std::move(resources.misspellings)), third_person_(std::move(resources.third_person)) {
    dictionary_rank_.reserve(resources.dictionary.size());
    for (std::size_t i = 0; i < resources.dictionary.size(); ++i) {
        dictionary_rank_.emplace(fold(resources.dictionary[i]), i);
    }
    for (const auto& [base, third] : third_person_) base_form_.emplace(third, base);
}

std::shared_ptr<const BuiltinGrammarBackend> BuiltinGrammarBackend::shared_default() {
    static const auto backend = std::make_shared<const BuiltinGrammarBackend>(BuiltinGrammarResources::load_default());
    return backend;
}

bool BuiltinGrammarBackend::in_dictionary(std::string_view word) const {
    return dictionary_rank_.contains(fold(word));
}

std::optional<std::string> BuiltinGrammarBackend::spelling_suggestion(const std::string& w) const {
    static constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz";
    std::optional<std::string> best;
    std::size_t best_rank = dictionary_rank_.size();
    auto consider = [&](const std::string& candidate) {
        const auto it = dictionary_rank_.find(candidate);
        if (it != dictionary_rank_.end() && it->second < best_rank) {
            best_rank = it->second;
            best = candidate;
        }
    };
    for (std::size_t i = 0; i <= w.size(); ++i) {
        if (i < w.size()) {
            consider(w.substr(0, i) + w.substr(i + 1));
            if (i + 1 < w.size()) {
                std::string t = w;
                std::swap(t[i], t[i + 1]);
                consider(t);
            }
        }
        for (char c : kAlphabet) {
            if (i < w.size() && w[i] != c) {
                std::string t = w;
                t[i] = c;
                consider(t);
            }
            consider(w.substr(0, i) + c + w.substr(i));
        }
    }
    return best;
}

void BuiltinGrammarBackend::check_words(std::string_view text, std::vector<GrammarIssue>& out) const {
    const auto tokens = word_tokens(text);
    if (tokens.empty()) return;

    std::vector<bool> sentence_initial(tokens.size(), false);
    const auto essay = tokenize(text);
    for (const auto& s : essay.sentences) sentence_initial[s.first_word] = true;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        const std::string w = fold(tok.text);

        if (tok.text == "i" || tok.text.rfind("i'", 0) == 0) {
            out.push_back({tok.begin, tok.begin + 1, IssueCategory::grammar,
                           "The pronoun 'I' is always capitalised.", std::string("I")});
        } else if (is_ascii_word(tok.text)) {
            if (const auto it = misspellings_.find(w); it != misspellings_.end()) {
                out.push_back({tok.begin, tok.end, IssueCategory::spelling,
                               "Possible spelling mistake: '" + tok.text + "'.", match_case(tok.text, it->second)});
            } else if (!in_dictionary(w) && w.size() > 1) {
                const bool capitalised = std::isupper(static_cast<unsigned char>(tok.text[0])) != 0;
                const bool acronym = std::none_of(tok.text.begin(), tok.text.end(),
                                                  [](char c) { return std::islower(static_cast<unsigned char>(c)); });
                const bool possessive = w.size() > 2 && w.ends_with("'s") && in_dictionary(w.substr(0, w.size() - 2));
                if (!(capitalised && !sentence_initial[i]) && !acronym && !possessive) {
                    auto suggestion = spelling_suggestion(w);
                    if (suggestion) suggestion = match_case(tok.text, *suggestion);
                    out.push_back({tok.begin, tok.end, IssueCategory::spelling,
                                   "Possible spelling mistake: '" + tok.text + "'.", suggestion});
                }
            }
        }

        if (i + 1 >= tokens.size() || !only_space_between(text, tok, tokens[i + 1])) continue;
        const Token& next = tokens[i + 1];
        const std::string nw = fold(next.text);
        const std::string prev =
            (i > 0 && only_space_between(text, tokens[i - 1], tok)) ? fold(tokens[i - 1].text) : std::string();
        const bool blocked = contains(kAgreementBlockers, prev);

        if (!blocked && (w == "he" || w == "she" || w == "it")) {
            std::optional<std::string> fix;
            if (const auto it = third_person_.find(nw); it != third_person_.end()) {
                fix = it->second;
            } else if (nw == "don't") {
                fix = "doesn't";
            } else if (nw == "are") {
                fix = "is";
            }
            if (fix) {
                out.push_back({next.begin, next.end, IssueCategory::grammar,
                               "Subject-verb agreement: '" + tok.text + "' takes '" + *fix + "'.",
                               match_case(next.text, *fix)});
            }
        } else if (!blocked && (w == "i" || w == "you" || w == "we" || w == "they")) {
            std::optional<std::string> fix;
            if (const auto it = base_form_.find(nw); it != base_form_.end()) {
                fix = it->second;
            } else if (nw == "doesn't") {
                fix = "don't";
            } else if (nw == "is") {
                fix = (w == "i") ? "am" : "are";
            } else if (nw == "was" && w != "i") {
                fix = "were";
            }
            if (fix) {
                out.push_back({next.begin, next.end, IssueCategory::grammar,
                               "Subject-verb agreement: '" + tok.text + "' takes '" + *fix + "'.",
                               match_case(next.text, *fix)});
            }
        }

        if ((w == "a" || w == "an") && nw.size() > 1 && is_ascii_word(nw)) {
            const bool vowel = starts_with_vowel_sound(nw);
            if (w == "a" && vowel) {
                out.push_back({tok.begin, tok.end, IssueCategory::grammar,
                               "Use 'an' before a vowel sound.", match_case(tok.text, "an")});
            } else if (w == "an" && !vowel) {
                out.push_back({tok.begin, tok.end, IssueCategory::grammar,
                               "Use 'a' before a consonant sound.", match_case(tok.text, "a")});
            }
        }

        if (w == nw && w != "had" && w != "that") {
            out.push_back({tok.end, next.end, IssueCategory::grammar,
                           "Repeated word: '" + next.text + "'.", std::string()});
        }
    }

    for (const auto& p : essay.paragraphs) {
        const Token& first = essay.words[essay.sentences[p.first_sentence].first_word];
        if (std::islower(static_cast<unsigned char>(first.text[0])) && first.text != "i" && first.text.rfind("i'", 0) != 0) {
            out.push_back({first.begin, first.begin + 1, IssueCategory::punctuation,
                           "Start the sentence with a capital letter.",
                           std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(first.text[0]))))});
        }
    }
}

void BuiltinGrammarBackend::check_punctuation(std::string_view text, std::vector<GrammarIssue>& out) const {
    const std::size_t n = text.size();
    for (std::size_t j = 0; j < n; ++j) {
        const char c = text[j];

        if (std::string_view(",;:!?.").find(c) != std::string_view::npos) {
            std::size_t run = j;
            while (run < n && text[run] == c) ++run;
            const std::size_t len = run - j;
            if (len >= 2 && (c != '.' || len == 2)) {
                out.push_back({j, run, IssueCategory::punctuation,
                               std::string("Repeated punctuation '") + c + c + "'.", std::string(1, c)});
            }

            if (j > 0 && text[j - 1] == ' ') {
                std::size_t k = j;
                while (k > 0 && (text[k - 1] == ' ' || text[k - 1] == '\t')) --k;
                const bool ellipsis = c == '.' && j + 1 < n && text[j + 1] == '.';
                const bool decimal = c == '.' && j + 1 < n && std::isdigit(static_cast<unsigned char>(text[j + 1]));
                if (k > 0 && is_ascii_alnum(text[k - 1]) && !ellipsis && !decimal) {
                    out.push_back({k, j + 1, IssueCategory::punctuation,
                                   std::string("Remove the space before '") + c + "'.", std::string(1, c)});
                }
            }

            if ((c == ',' || c == ';') && j + 1 < n && std::isalpha(static_cast<unsigned char>(text[j + 1]))) {
                out.push_back({j, j + 1, IssueCategory::punctuation,
                               std::string("Add a space after '") + c + "'.", std::string(1, c) + " "});
            }
            if (c == '.' && len == 1 && j > 0 && j + 1 < n && std::islower(static_cast<unsigned char>(text[j - 1])) &&
                std::isupper(static_cast<unsigned char>(text[j + 1])) && !closes_known_abbreviation(text, j)) {
                out.push_back({j, j + 1, IssueCategory::punctuation, "Add a space after the full stop.", std::string(". ")});
            }

            if (c != ',' && c != ';' && c != ':') {
                std::size_t k = run;
                while (k < n && (text[k] == ' ' || text[k] == '\t' || text[k] == '\n' || text[k] == '\r')) ++k;
                const bool single_period = c == '.' && len == 1;
                if (k > run && k < n && std::islower(static_cast<unsigned char>(text[k])) &&
                    !(single_period && closes_known_abbreviation(text, j))) {
                    out.push_back({k, k + 1, IssueCategory::punctuation, "Start the sentence with a capital letter.",
                                   std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(text[k]))))});
                }
            }
            j = run - 1;
        }
    }
}

std::vector<GrammarIssue> BuiltinGrammarBackend::check(std::string_view text) const {
    std::vector<GrammarIssue> issues;
    check_words(text, issues);
    check_punctuation(text, issues);
    sort_issues(issues);
    issues.erase(std::unique(issues.begin(), issues.end(),
                             [](const GrammarIssue& a, const GrammarIssue& b) {
                                 return a.start == b.start && a.end == b.end && a.category == b.category;
                             }),
                 issues.end());
    return issues;
}

std::string_view to_string(IssueCategory c) {
    switch (c) {
        case IssueCategory::grammar: return "grammar";
        case IssueCategory::spelling: return "spelling";
        case IssueCategory::punctuation: return "punctuation";
    }
    return "grammar";
}

IssueCategory issue_category_from_string(std::string_view s) {
    if (s == "grammar") return IssueCategory::grammar;
    if (s == "spelling") return IssueCategory::spelling;
    if (s == "punctuation") return IssueCategory::punctuation;
    throw InvalidInput("unknown issue category '" + std::string(s) + "'");
}

void sort_issues(std::vector<GrammarIssue>& issues) {
    std::sort(issues.begin(), issues.end(), [](const GrammarIssue& a, const GrammarIssue& b) {
        return std::tie(a.start, a.end, a.category, a.message) < std::tie(b.start, b.end, b.category, b.message);
    });
}

}  // namespace ielts::text
