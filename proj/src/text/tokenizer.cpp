#include "ielts/text/tokenizer.hpp"

#include <array>
#include <algorithm>

#include "ielts/common/error.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::text {

namespace {

constexpr std::array<std::string_view, 22> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "st", "etc", "e.g", "i.e", "vs", "jr",
    "sr", "no", "fig", "approx", "dept", "u.s", "u.k", "inc", "ltd", "co", "cf"};

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closing(char32_t cp) {
    return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x2019 || cp == 0x201D;
}

bool is_opening(char32_t cp) {
    return cp == '"' || cp == '\'' || cp == '(' || cp == '[' || cp == 0x2018 || cp == 0x201C;
}

// True when the period at `dot` closes one of the abbreviations above.
bool closes_abbreviation(std::string_view text, std::size_t dot) {
    std::size_t start = dot;
    while (start > 0) {
        const char c = text[start - 1];
        const bool ascii_letter = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (!ascii_letter && c != '.') break;
        --start;
    }
    if (start == dot) return false;
    const std::string word = fold(text.substr(start, dot - start));
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

struct ByteSpan {
    std::size_t begin;
    std::size_t end;
};

// Paragraph spans: maximal groups of non-blank lines.
std::vector<ByteSpan> paragraph_spans(std::string_view text) {
    std::vector<ByteSpan> spans;
    std::size_t pos = 0;
    std::size_t para_begin = std::string_view::npos;
    std::size_t para_end = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = text.substr(pos, eol - pos);
        const bool blank = std::all_of(line.begin(), line.end(), [](char c) {
            return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
        });
        if (blank) {
            if (para_begin != std::string_view::npos) {
                spans.push_back({para_begin, para_end});
                para_begin = std::string_view::npos;
            }
        } else {
            if (para_begin == std::string_view::npos) para_begin = pos;
            para_end = eol;
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    if (para_begin != std::string_view::npos) spans.push_back({para_begin, para_end});
    return spans;
}

// Sentence spans inside one paragraph span.
std::vector<ByteSpan> sentence_spans(std::string_view text, ByteSpan para) {
    std::vector<ByteSpan> spans;
    auto skip_space = [&](std::size_t p) {
        while (p < para.end) {
            const auto cp = decode_utf8(text, p);
            if (!is_space(cp.value)) break;
            p += cp.length;
        }
        return p;
    };

    std::size_t start = skip_space(para.begin);
    std::size_t i = start;
    while (i < para.end) {
        if (!is_terminal(text[i])) {
            i += decode_utf8(text, i).length;
            continue;
        }
        const std::size_t first_terminal = i;
        std::size_t j = i;
        while (j < para.end && is_terminal(text[j])) ++j;
        while (j < para.end) {
            const auto cp = decode_utf8(text, j);
            if (!is_closing(cp.value)) break;
            j += cp.length;
        }
        const std::size_t sentence_end = j;
        const std::size_t next = skip_space(j);

        bool boundary = false;
        if (next >= para.end) {
            boundary = true;
        } else if (next > j) {
            std::size_t k = next;
            while (k < para.end) {
                const auto cp = decode_utf8(text, k);
                if (!is_opening(cp.value)) break;
                k += cp.length;
            }
            if (k < para.end && is_upper(decode_utf8(text, k).value)) {
                const bool single_period = text[first_terminal] == '.' && sentence_end == first_terminal + 1;
                boundary = !(single_period && closes_abbreviation(text, first_terminal));
            }
        }
        if (boundary) {
            spans.push_back({start, sentence_end});
            start = next;
        }
        i = std::max(j, i + 1);
    }
    if (start < para.end) {
        std::size_t end = para.end;
        while (end > start && (text[end - 1] == ' ' || text[end - 1] == '\t' || text[end - 1] == '\r')) --end;
        if (end > start) spans.push_back({start, end});
    }
    return spans;
}

}  // namespace

std::span<const Token> TokenizedEssay::sentence_words(std::size_t sentence) const {
    const auto& s = sentences.at(sentence);
    return std::span<const Token>(words).subspan(s.first_word, s.end_word - s.first_word);
}

std::span<const Sentence> TokenizedEssay::paragraph_sentences(std::size_t paragraph) const {
    const auto& p = paragraphs.at(paragraph);
    return std::span<const Sentence>(sentences).subspan(p.first_sentence, p.end_sentence - p.first_sentence);
}

std::vector<Token> word_tokens(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        auto cp = decode_utf8(text, i);
        if (!is_letter(cp.value) && !is_apostrophe(cp.value)) {
            i += cp.length;
            continue;
        }
        std::size_t first_letter = std::string_view::npos;
        std::size_t last_letter_end = 0;
        while (i < text.size()) {
            cp = decode_utf8(text, i);
            if (is_letter(cp.value)) {
                if (first_letter == std::string_view::npos) first_letter = i;
                last_letter_end = i + cp.length;
            } else if (!is_apostrophe(cp.value)) {
                break;
            }
            i += cp.length;
        }
        if (first_letter != std::string_view::npos) {
            tokens.push_back(Token{std::string(text.substr(first_letter, last_letter_end - first_letter)),
                                   first_letter, last_letter_end});
        }
    }
    return tokens;
}

std::size_t count_words(std::string_view text) {
    return word_tokens(text).size();
}

TokenizedEssay tokenize(std::string_view text) {
    TokenizedEssay essay;
    essay.words = word_tokens(text);
    if (essay.words.empty()) {
        throw InvalidInput("no_word_tokens", "no word tokens");
    }

    std::size_t w = 0;
    for (const auto& para : paragraph_spans(text)) {
        const std::size_t first_sentence = essay.sentences.size();
        for (const auto& span : sentence_spans(text, para)) {
            const std::size_t first_word = w;
            while (w < essay.words.size() && essay.words[w].begin < span.end) ++w;
            if (w > first_word) {
                essay.sentences.push_back(Sentence{first_word, w, span.begin, span.end});
            }
        }
        if (essay.sentences.size() > first_sentence) {
            essay.paragraphs.push_back(Paragraph{first_sentence, essay.sentences.size(), para.begin, para.end});
        }
    }
    return essay;
}

}  // namespace ielts::text
