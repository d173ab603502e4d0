#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ielts/text/tokenizer.hpp"

namespace ielts::text {

// Rank-ordered list of the most frequent word forms. Membership tests only
// consider the first `top_k` entries.
class FrequencyLexicon {
public:
    static constexpr std::size_t kDefaultTopK = 2000;

    FrequencyLexicon() = default;
    FrequencyLexicon(std::vector<std::string> ranked_words, std::size_t top_k = kDefaultTopK);

    static FrequencyLexicon load(const std::filesystem::path& path, std::size_t top_k = kDefaultTopK);
    // data/lexicon/frequency_en.txt
    static const FrequencyLexicon& default_lexicon();

    bool contains(std::string_view word) const;  // case-folded lookup
    std::size_t top_k() const noexcept { return top_k_; }
    std::size_t size() const noexcept { return words_.size(); }
    // 0-based rank, or size() when the word is not listed at all.
    std::size_t rank(std::string_view word) const;

    FrequencyLexicon with_top_k(std::size_t top_k) const;

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> ranks_;
    std::size_t top_k_ = kDefaultTopK;
};

// Discourse connectors, possibly multi-word ("on the other hand").
class ConnectorLexicon {
public:
    ConnectorLexicon() = default;
    explicit ConnectorLexicon(const std::vector<std::string>& phrases);

    static ConnectorLexicon load(const std::filesystem::path& path);
    // data/lexicon/connectors.txt
    static const ConnectorLexicon& default_lexicon();

    // Non-overlapping occurrences in `words`, longest phrase first.
    std::size_t count(std::span<const Token> words) const;

    // Number of words of the connector starting at `words[0]`, or 0.
    std::size_t match_at(std::span<const Token> words) const;

    std::size_t size() const noexcept { return phrases_.size(); }

private:
    std::vector<std::vector<std::string>> phrases_;  // sorted longest first
};

}  // namespace ielts::text
