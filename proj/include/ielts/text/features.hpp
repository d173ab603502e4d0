#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "ielts/text/grammar.hpp"
#include "ielts/text/lexicon.hpp"
#include "ielts/text/tokenizer.hpp"

namespace ielts::text {

// Hand-crafted linguistic indicators shared by both scorers and the
// feedback engine. All fields are finite and nonnegative.
struct FeatureVector {
    static constexpr std::size_t kSize = 8;

    double word_count = 0;
    double mean_sentence_length = 0;   // words per sentence
    double lexical_diversity = 0;      // distinct case-folded words / words, in (0, 1]
    double punctuation_density = 0;    // punctuation marks per 100 words
    double sophistication_ratio = 0;   // share of words outside the top-K lexicon
    double grammar_error_density = 0;  // grammar issues per 100 words
    double connector_density = 0;      // discourse connectors per sentence
    double paragraph_count = 0;

    // Field order used for normalisation statistics and the model input.
    std::array<double, kSize> as_array() const;
    static const std::array<std::string_view, kSize>& names();
};

// Share of word tokens outside `lexicon` (case-folded). Throws InvalidInput
// for an empty word list.
double sophistication_ratio(std::span<const Token> words, const FrequencyLexicon& lexicon);

double lexical_diversity(std::span<const Token> words);

// Punctuation marks counted: . , ; : ! ? " ( ) [ ] and free-standing dashes.
std::size_t count_punctuation(std::string_view text);

struct TextAnalysis {
    TokenizedEssay tokens;
    std::vector<GrammarIssue> issues;
    FeatureVector features;
};

// Bundles the resources of the feature pipeline. Stateless after
// construction and safe to share between threads.
class TextAnalyzer {
public:
    TextAnalyzer(const FrequencyLexicon& lexicon, std::shared_ptr<const GrammarBackend> backend,
                 const ConnectorLexicon& connectors = ConnectorLexicon::default_lexicon());

    // Default lexicon, connectors and the builtin grammar backend.
    static const TextAnalyzer& builtin();

    TextAnalysis analyze(std::string_view text) const;

    const FrequencyLexicon& lexicon() const noexcept { return *lexicon_; }
    const ConnectorLexicon& connectors() const noexcept { return *connectors_; }
    const GrammarBackend& backend() const noexcept { return *backend_; }
    std::shared_ptr<const GrammarBackend> backend_ptr() const noexcept { return backend_; }

private:
    const FrequencyLexicon* lexicon_;
    const ConnectorLexicon* connectors_;
    std::shared_ptr<const GrammarBackend> backend_;
};

// tokenize + check_grammar + sophistication_ratio composed into one vector.
FeatureVector extract_features(std::string_view text, const FrequencyLexicon& lexicon, const GrammarBackend& backend);

// Feature computation from already computed parts.
FeatureVector compute_features(std::string_view text, const TokenizedEssay& tokens,
                               std::span<const GrammarIssue> issues, const FrequencyLexicon& lexicon,
                               const ConnectorLexicon& connectors);

}  // namespace ielts::text
