#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ielts::text {

enum class IssueCategory { grammar, spelling, punctuation };

std::string_view to_string(IssueCategory c);
IssueCategory issue_category_from_string(std::string_view s);

// A problem found in the essay. `start`/`end` are UTF-8 byte offsets with
// 0 <= start < end <= text size; `suggestion` replaces exactly that span.
struct GrammarIssue {
    std::size_t start = 0;
    std::size_t end = 0;
    IssueCategory category = IssueCategory::grammar;
    std::string message;
    std::optional<std::string> suggestion;

    friend bool operator==(const GrammarIssue&, const GrammarIssue&) = default;
};

// Orders by start, end, category, message.
void sort_issues(std::vector<GrammarIssue>& issues);

class GrammarBackend {
public:
    virtual ~GrammarBackend() = default;

    // Issues sorted by start offset. Implementations must be deterministic
    // and safe to call concurrently; an unreachable backend throws
    // BackendUnavailable.
    virtual std::vector<GrammarIssue> check(std::string_view text) const = 0;

    virtual std::string name() const = 0;
};

// Resource tables of the builtin rule set.
struct BuiltinGrammarResources {
    std::vector<std::string> dictionary;                           // rank ordered
    std::unordered_map<std::string, std::string> misspellings;     // wrong -> right
    std::unordered_map<std::string, std::string> third_person;     // base -> 3sg

    // Loads data/lexicon/dictionary_en.txt, data/lexicon/misspellings.tsv
    // and data/grammar/agreement_verbs.tsv.
    static BuiltinGrammarResources load_default();
};

// Hermetic rule set: subject-verb agreement for pronoun subjects, a/an,
// repeated words, punctuation spacing and doubling, capitalisation, and
// dictionary based spelling. See docs/grammar_rules.md.
class BuiltinGrammarBackend final : public GrammarBackend {
public:
    explicit BuiltinGrammarBackend(BuiltinGrammarResources resources);

    static std::shared_ptr<const BuiltinGrammarBackend> shared_default();

    std::vector<GrammarIssue> check(std::string_view text) const override;
    std::string name() const override { return "builtin"; }

    bool in_dictionary(std::string_view word) const;

private:
    void check_words(std::string_view text, std::vector<GrammarIssue>& out) const;
    void check_punctuation(std::string_view text, std::vector<GrammarIssue>& out) const;
    std::optional<std::string> spelling_suggestion(const std::string& folded) const;

    std::unordered_map<std::string, std::size_t> dictionary_rank_;
    std::unordered_map<std::string, std::string> misspellings_;
    std::unordered_map<std::string, std::string> third_person_;
    std::unordered_map<std::string, std::string> base_form_;
};

// Adapter to a LanguageTool-compatible proofreading server (POST
// {base_url}/v2/check). Offsets reported in UTF-16 units are converted to
// byte offsets. Any transport or protocol failure raises BackendUnavailable.
class LanguageToolBackend final : public GrammarBackend {
public:
    struct Options {
        std::string base_url = "http://localhost:8081";
        std::string language = "en-US";
        int timeout_seconds = 10;
    };

    explicit LanguageToolBackend(Options options);

    std::vector<GrammarIssue> check(std::string_view text) const override;
    std::string name() const override { return "languagetool"; }

    // Parses a /v2/check response body against the text that was checked.
    static std::vector<GrammarIssue> parse_response(std::string_view text, std::string_view body);

private:
    Options options_;
    std::string host_;
    int port_ = 80;
    std::string path_prefix_;
};

// "builtin" or "languagetool" (with `languagetool_url`).
std::shared_ptr<const GrammarBackend> make_grammar_backend(const std::string& kind,
                                                           const std::string& languagetool_url = {});

}  // namespace ielts::text
