#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ielts::text {

// A word token with its UTF-8 byte span in the source text.
struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Sentence {
    std::size_t first_word = 0;
    std::size_t end_word = 0;  // exclusive
    std::size_t begin = 0;     // byte span, terminal punctuation included
    std::size_t end = 0;
};

struct Paragraph {
    std::size_t first_sentence = 0;
    std::size_t end_sentence = 0;  // exclusive
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Word, sentence and paragraph segmentation of one text. Sentences and
// paragraphs index into `words` / `sentences`, so the nesting invariants hold
// by construction: paragraphs partition sentences, sentences partition words,
// and none of them is empty.
struct TokenizedEssay {
    std::vector<Token> words;
    std::vector<Sentence> sentences;
    std::vector<Paragraph> paragraphs;

    std::span<const Token> sentence_words(std::size_t sentence) const;
    std::span<const Sentence> paragraph_sentences(std::size_t paragraph) const;
};

// Words are maximal runs of letters and apostrophes (apostrophes trimmed at
// both ends). Sentences end at . ! ? followed by whitespace and an uppercase
// letter, or by the end of a paragraph, unless the period closes a known
// abbreviation. Paragraphs are separated by blank lines.
//
// Throws InvalidInput("no word tokens") when the text has no words.
TokenizedEssay tokenize(std::string_view text);

// Words only, without segmentation. Never throws.
std::vector<Token> word_tokens(std::string_view text);

std::size_t count_words(std::string_view text);

}  // namespace ielts::text
