#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ielts/corpus/band.hpp"
#include "ielts/corpus/essay.hpp"
#include "ielts/neural/encoder.hpp"
#include "ielts/neural/wordpiece.hpp"
#include "ielts/text/features.hpp"

namespace ielts::neural {

struct EncoderConfig {
    std::string encoder_id = "mini";
    std::size_t max_tokens = 256;
    int frozen_layer_count = 2;

    void validate(int encoder_depth) const;
    static EncoderConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Token ids and mask for `text` under the encoder's tokenizer. Throws
// NotFound for an unknown encoder_id.
EncodedText encode(std::string_view text, const EncoderConfig& config);

// Per-feature z-scoring with statistics fixed at fit time.
struct FeatureNormalizer {
    std::vector<double> mean;
    std::vector<double> std;  // a zero spread is stored as 1

    static FeatureNormalizer fit(std::span<const text::FeatureVector> features);
    std::vector<double> apply(const text::FeatureVector& f) const;
    std::size_t size() const { return mean.size(); }
};

struct HybridInput {
    std::vector<std::int32_t> token_ids;
    std::vector<std::uint8_t> attention_mask;
    std::vector<double> normalized_features;
};

// Affine head over [pooled encoding, normalized features].
struct RegressionHead {
    Eigen::VectorXd weight;
    double bias = 0.0;

    double forward(const Eigen::VectorXd& input) const;
    // Accumulates d(pred)/d(params) * dpred and returns d(pred)/d(input) * dpred.
    Eigen::VectorXd backward(const Eigen::VectorXd& input, double dpred, Eigen::VectorXd& grad_weight,
                             double& grad_bias) const;
};

struct Prediction {
    double raw = 0.0;     // unclamped regression output
    corpus::Band band;    // round_to_band(raw)
};

struct DataIds {
    std::vector<std::string> train, val, test;
};

// Encoder + head + normalisation statistics + provenance. Immutable once
// loaded; concurrent inference is safe.
class HybridModel {
public:
    EncoderConfig encoder_config;
    EncoderWeights<float> encoder;
    std::shared_ptr<const WordPieceTokenizer> tokenizer;
    RegressionHead head;
    FeatureNormalizer normalizer;

    // Provenance and metrics.
    nlohmann::json train_config = nlohmann::json::object();
    nlohmann::json history = nlohmann::json::array();
    double best_val_mae = 0.0;
    int best_epoch = 0;
    DataIds data_ids;
    std::string grammar_backend = "builtin";
    std::size_t lexicon_top_k = 2000;

    std::size_t head_input_size() const;

    HybridInput prepare(std::string_view text, const text::FeatureVector& features) const;

    // Raw prediction in inference mode. Throws InvalidInput on a feature
    // length mismatch.
    double forward(const HybridInput& input) const;
    std::vector<double> forward_batch(std::span<const HybridInput> inputs) const;

    // Masked mean of the final hidden states.
    Eigen::VectorXd pooled(const HybridInput& input) const;

    void save(const std::filesystem::path& path) const;
    static HybridModel load(const std::filesystem::path& path);

    // FNV-1a over every tensor and the normalisation statistics.
    std::uint64_t weights_digest() const;
};

using ModelArtifact = HybridModel;

// tokenize -> features -> normalise -> forward, the same for every caller.
std::vector<Prediction> predict_batch(const HybridModel& model, std::span<const std::string> essays,
                                      const text::TextAnalyzer& analyzer);
Prediction predict(const HybridModel& model, std::string_view essay, const text::TextAnalyzer& analyzer);

inline constexpr const char* kArtifactFormat = "ielts-hybrid-v1";

}  // namespace ielts::neural
