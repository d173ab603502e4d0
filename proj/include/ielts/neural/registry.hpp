#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "ielts/neural/encoder.hpp"
#include "ielts/neural/wordpiece.hpp"

namespace ielts::neural {

// A pretrained (or seeded) encoder checkpoint directory:
//   config.json        architecture (DistilBERT key names)
//   vocab.txt          WordPiece vocabulary
//   model.safetensors  optional weights; without it the encoder is
//                      initialised from the config's init seed.
struct EncoderBundle {
    std::string id;
    std::filesystem::path dir;
    EncoderSpec spec;
    std::shared_ptr<const WordPieceTokenizer> tokenizer;
    bool has_weights = false;

    EncoderWeights<float> load_weights() const;
};

// `id` is either a directory path or the name of a directory under
// <data>/encoders. Results are cached. Unknown ids raise NotFound.
std::shared_ptr<const EncoderBundle> resolve_encoder(const std::string& id);

// Encoder tensors from a checkpoint; accepts names with or without the
// "distilbert." prefix and ignores unrelated tensors.
EncoderWeights<float> weights_from_safetensors(const EncoderSpec& spec, const std::filesystem::path& file);

}  // namespace ielts::neural
