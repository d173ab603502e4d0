#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ielts::neural {

struct EncodedText {
    std::vector<std::int32_t> token_ids;  // exactly max_tokens long
    std::vector<std::uint8_t> attention_mask;

    std::size_t length() const;  // number of non-pad positions
};

// BERT-style tokenizer: basic cleanup, optional lowercasing with accent
// stripping, punctuation splitting, then greedy longest-match WordPiece.
class WordPieceTokenizer {
public:
    WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase = true);

    static WordPieceTokenizer load(const std::filesystem::path& vocab_file, bool lowercase = true);

    std::vector<std::string> basic_tokenize(std::string_view text) const;
    std::vector<std::int32_t> wordpiece_ids(std::string_view text) const;

    // [CLS] pieces [SEP], truncated to keep the leading pieces, padded with [PAD].
    EncodedText encode(std::string_view text, std::size_t max_tokens) const;

    const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    bool lowercase() const noexcept { return lowercase_; }
    std::int32_t id(std::string_view token) const;  // -1 when absent

    std::int32_t pad_id() const noexcept { return pad_; }
    std::int32_t unk_id() const noexcept { return unk_; }
    std::int32_t cls_id() const noexcept { return cls_; }
    std::int32_t sep_id() const noexcept { return sep_; }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, std::int32_t> ids_;
    bool lowercase_;
    std::int32_t pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
};

}  // namespace ielts::neural
