#include "ielts/text/lexicon.hpp"

#include <algorithm>

#include "ielts/common/data_dir.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::text {

FrequencyLexicon::FrequencyLexicon(std::vector<std::string> ranked_words, std::size_t top_k)
    : words_(std::move(ranked_words)), top_k_(top_k) {
    ranks_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        words_[i] = fold(words_[i]);
        ranks_.emplace(words_[i], i);
    }
}

FrequencyLexicon FrequencyLexicon::load(const std::filesystem::path& path, std::size_t top_k) {
    return FrequencyLexicon(read_lines(path), top_k);
}

const FrequencyLexicon& FrequencyLexicon::default_lexicon() {
    static const FrequencyLexicon lexicon = load(data_file("lexicon/frequency_en.txt"));
    return lexicon;
}

std::size_t FrequencyLexicon::rank(std::string_view word) const {
    const auto it = ranks_.find(fold(word));
    return it == ranks_.end() ? words_.size() : it->second;
}

bool FrequencyLexicon::contains(std::string_view word) const {
    return rank(word) < top_k_;
}

FrequencyLexicon FrequencyLexicon::with_top_k(std::size_t top_k) const {
    FrequencyLexicon copy = *this;
    copy.top_k_ = top_k;
    return copy;
}

ConnectorLexicon::ConnectorLexicon(const std::vector<std::string>& phrases) {
    for (const auto& p : phrases) {
        std::vector<std::string> words;
        for (const auto& t : word_tokens(p)) words.push_back(fold(t.text));
        if (!words.empty()) phrases_.push_back(std::move(words));
    }
    std::stable_sort(phrases_.begin(), phrases_.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
}

ConnectorLexicon ConnectorLexicon::load(const std::filesystem::path& path) {
    return ConnectorLexicon(read_lines(path));
}

const ConnectorLexicon& ConnectorLexicon::default_lexicon() {
    static const ConnectorLexicon lexicon = load(data_file("lexicon/connectors.txt"));
    return lexicon;
}

std::size_t ConnectorLexicon::match_at(std::span<const Token> words) const {
    for (const auto& phrase : phrases_) {
        if (phrase.size() > words.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < phrase.size() && ok; ++k) {
            ok = fold(words[k].text) == phrase[k];
        }
        if (ok) return phrase.size();
    }
    return 0;
}

std::size_t ConnectorLexicon::count(std::span<const Token> words) const {
    std::size_t n = 0;
    std::size_t i = 0;
    while (i < words.size()) {
        const std::size_t len = match_at(words.subspan(i));
        if (len > 0) {
            ++n;
            i += len;
        } else {
            ++i;
        }
    }
    return n;
}

}  // namespace ielts::text
