#include "ielts/neural/wordpiece.hpp"

#include <algorithm>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::neural {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;

bool is_control(char32_t c) {
    if (c == '\t' || c == '\n' || c == '\r') return false;
    return c < 0x20 || (c >= 0x7F && c < 0xA0);
}

bool is_whitespace(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0xA0 || c == 0x3000 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F;
}

bool is_punctuation(char32_t c) {
    if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) return true;
    if (c >= 0x2010 && c <= 0x2027) return true;
    if (c >= 0x2030 && c <= 0x205E) return true;
    if (c >= 0x3001 && c <= 0x3003) return true;
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB || c == 0xBF;
}

bool is_cjk(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
           (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

// Base letter of a Latin-1 accented lowercase letter; 0 when unaccented.
char32_t strip_accent(char32_t c) {
    static const char* const table = "aaaaaa_ceeeeiiii_nooooo__uuuuy_y";  // U+00E0..U+00FF
    if (c >= 0xE0 && c <= 0xFF) {
        const char b = table[c - 0xE0];
        return b == '_' ? 0 : static_cast<char32_t>(b);
    }
    return 0;
}

}  // namespace

std::size_t EncodedText::length() const {
    return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        ids_.emplace(vocab_[i], static_cast<std::int32_t>(i));
    }
    for (auto [name, slot] : {std::pair{"[PAD]", &pad_}, {"[UNK]", &unk_}, {"[CLS]", &cls_}, {"[SEP]", &sep_}}) {
        const auto it = ids_.find(name);
        if (it == ids_.end()) throw InvalidInput(std::string("vocabulary lacks the special token ") + name);
        *slot = it->second;
    }
}

WordPieceTokenizer WordPieceTokenizer::load(const std::filesystem::path& vocab_file, bool lowercase) {
    // Vocabulary files may contain '#'-prefixed tokens, so no comment skipping.
    std::vector<std::string> vocab;
    const std::string content = read_file(vocab_file);
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string line = content.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(std::move(line));
        pos = eol + 1;
    }
    return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::int32_t WordPieceTokenizer::id(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    return it == ids_.end() ? -1 : it->second;
}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < text.size();) {
        const auto cp = text::decode_utf8(text, i);
        i += cp.length;
        char32_t c = cp.value;
        if (c == 0 || c == 0xFFFD || is_control(c)) continue;
        if (is_whitespace(c)) {
            flush();
            continue;
        }
        if (lowercase_) {
            if (c >= 'A' && c <= 'Z') {
                c = c - 'A' + 'a';
            } else if (c >= 0xC0 && c <= 0xDE && c != 0xD7) {
                c += 0x20;
            }
            if (const char32_t base = strip_accent(c)) c = base;
            if (c >= 0x300 && c <= 0x36F) continue;  // combining marks
        }
        if (is_punctuation(c) || is_cjk(c)) {
            flush();
            std::string p;
            text::append_utf8(p, c);
            out.push_back(std::move(p));
            continue;
        }
        text::append_utf8(current, c);
    }
    flush();
    return out;
}

std::vector<std::int32_t> WordPieceTokenizer::wordpiece_ids(std::string_view text) const {
    std::vector<std::int32_t> ids;
    for (const auto& word : basic_tokenize(text)) {
        std::vector<std::size_t> starts;  // code point boundaries
        for (std::size_t i = 0; i < word.size(); i += text::decode_utf8(word, i).length) starts.push_back(i);
        starts.push_back(word.size());
        if (starts.size() - 1 > kMaxCharsPerWord) {
            ids.push_back(unk_);
            continue;
        }
        std::vector<std::int32_t> pieces;
        bool bad = false;
        std::size_t s = 0;
        while (s + 1 < starts.size()) {
            std::int32_t found = -1;
            std::size_t e = starts.size() - 1;
            for (; e > s; --e) {
                std::string piece = word.substr(starts[s], starts[e] - starts[s]);
                if (s > 0) piece = "##" + piece;
                const auto it = ids_.find(piece);
                if (it != ids_.end()) {
                    found = it->second;
                    break;
                }
            }
            if (found < 0) {
                bad = true;
                break;
            }
            pieces.push_back(found);
            s = e;
        }
        if (bad) {
            ids.push_back(unk_);
        } else {
            ids.insert(ids.end(), pieces.begin(), pieces.end());
        }
    }
    return ids;
}

EncodedText WordPieceTokenizer::encode(std::string_view text, std::size_t max_tokens) const {
    if (max_tokens < 2) throw InvalidInput("max_tokens must be at least 2");
    auto pieces = wordpiece_ids(text);
    if (pieces.size() > max_tokens - 2) pieces.resize(max_tokens - 2);
    EncodedText out;
    out.token_ids.reserve(max_tokens);
    out.token_ids.push_back(cls_);
    out.token_ids.insert(out.token_ids.end(), pieces.begin(), pieces.end());
    out.token_ids.push_back(sep_);
    out.attention_mask.assign(out.token_ids.size(), 1);
    out.token_ids.resize(max_tokens, pad_);
    out.attention_mask.resize(max_tokens, 0);
    return out;
}

}  // namespace ielts::neural
