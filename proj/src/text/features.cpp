#include "ielts/text/features.hpp"

#include <unordered_set>

#include "ielts/common/error.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::text {

std::array<double, FeatureVector::kSize> FeatureVector::as_array() const {
    return {word_count,           mean_sentence_length,  lexical_diversity, punctuation_density,
            sophistication_ratio, grammar_error_density, connector_density, paragraph_count};
}

const std::array<std::string_view, FeatureVector::kSize>& FeatureVector::names() {
    static const std::array<std::string_view, kSize> names = {
        "word_count",           "mean_sentence_length",  "lexical_diversity", "punctuation_density",
        "sophistication_ratio", "grammar_error_density", "connector_density", "paragraph_count"};
    return names;
}

double sophistication_ratio(std::span<const Token> words, const FrequencyLexicon& lexicon) {
    if (words.empty()) throw InvalidInput("sophistication ratio of an empty word list");
    std::size_t rare = 0;
    for (const auto& w : words) {
        if (!lexicon.contains(w.text)) ++rare;
    }
    return static_cast<double>(rare) / static_cast<double>(words.size());
}

double lexical_diversity(std::span<const Token> words) {
    if (words.empty()) throw InvalidInput("lexical diversity of an empty word list");
    std::unordered_set<std::string> types;
    for (const auto& w : words) types.insert(fold(w.text));
    return static_cast<double>(types.size()) / static_cast<double>(words.size());
}

std::size_t count_punctuation(std::string_view text) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < text.size();) {
        const auto cp = decode_utf8(text, i);
        switch (cp.value) {
            case '.': case ',': case ';': case ':': case '!': case '?':
            case '"': case '(': case ')': case '[': case ']':
            case 0x201C: case 0x201D: case 0x2013: case 0x2014: case 0x2026:
                ++n;
                break;
            case '-': {
                const bool space_before = i == 0 || is_space(static_cast<unsigned char>(text[i - 1]));
                const bool space_after = i + 1 >= text.size() || is_space(static_cast<unsigned char>(text[i + 1]));
                if (space_before || space_after) ++n;
                break;
            }
            default:
                break;
        }
        i += cp.length;
    }
    return n;
}

FeatureVector compute_features(std::string_view text, const TokenizedEssay& tokens,
                               std::span<const GrammarIssue> issues, const FrequencyLexicon& lexicon,
                               const ConnectorLexicon& connectors) {
    const auto n_words = static_cast<double>(tokens.words.size());
    const auto n_sentences = static_cast<double>(tokens.sentences.size());

    std::size_t n_connectors = 0;
    for (std::size_t s = 0; s < tokens.sentences.size(); ++s) {
        n_connectors += connectors.count(tokens.sentence_words(s));
    }

    FeatureVector f;
    f.word_count = n_words;
    f.mean_sentence_length = n_words / n_sentences;
    f.lexical_diversity = lexical_diversity(tokens.words);
    f.punctuation_density = static_cast<double>(count_punctuation(text)) * 100.0 / n_words;
    f.sophistication_ratio = sophistication_ratio(tokens.words, lexicon);
    f.grammar_error_density = static_cast<double>(issues.size()) * 100.0 / n_words;
    f.connector_density = static_cast<double>(n_connectors) / n_sentences;
    f.paragraph_count = static_cast<double>(tokens.paragraphs.size());
    return f;
}

TextAnalyzer::TextAnalyzer(const FrequencyLexicon& lexicon, std::shared_ptr<const GrammarBackend> backend,
                           const ConnectorLexicon& connectors)
    : lexicon_(&lexicon), connectors_(&connectors), backend_(std::move(backend)) {
    if (!backend_) throw InvalidInput("TextAnalyzer needs a grammar backend");
}

const TextAnalyzer& TextAnalyzer::builtin() {
    static const TextAnalyzer analyzer(FrequencyLexicon::default_lexicon(), BuiltinGrammarBackend::shared_default());
    return analyzer;
}

TextAnalysis TextAnalyzer::analyze(std::string_view text) const {
    TextAnalysis a;
    a.tokens = tokenize(text);
    a.issues = backend_->check(text);
    a.features = compute_features(text, a.tokens, a.issues, *lexicon_, *connectors_);
    return a;
}

FeatureVector extract_features(std::string_view text, const FrequencyLexicon& lexicon, const GrammarBackend& backend) {
    const auto tokens = tokenize(text);
    const auto issues = backend.check(text);
    return compute_features(text, tokens, issues, lexicon, ConnectorLexicon::default_lexicon());
}

}  // namespace ielts::text
