#include "ielts/neural/hybrid.hpp"

#include <cmath>
#include <cstdio>

#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"
#include "ielts/neural/registry.hpp"
#include "ielts/neural/safetensors.hpp"

namespace ielts::neural {

namespace {

using nlohmann::json;

std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json ids_json(const DataIds& ids) {
    return {{"train", ids.train}, {"val", ids.val}, {"test", ids.test}};
}

const std::string& meta(const SafetensorsFile& f, const std::string& key) {
    const auto it = f.metadata.find(key);
    if (it == f.metadata.end()) throw InvalidInput("model artifact lacks metadata '" + key + "'");
    return it->second;
}

const Tensor& tensor(const SafetensorsFile& f, const std::string& key) {
    const auto it = f.tensors.find(key);
    if (it == f.tensors.end()) throw InvalidInput("model artifact lacks tensor '" + key + "'");
    return it->second;
}

}  // namespace

void EncoderConfig::validate(int encoder_depth) const {
    if (max_tokens < 2) throw InvalidInput("max_tokens must be at least 2");
    if (frozen_layer_count < 0 || frozen_layer_count > encoder_depth) {
        throw InvalidInput("frozen_layer_count must lie in [0, " + std::to_string(encoder_depth) + "]");
    }
}

EncoderConfig EncoderConfig::from_json(const json& j) {
    EncoderConfig c;
    c.encoder_id = j.value("encoder_id", c.encoder_id);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.frozen_layer_count = j.value("frozen_layer_count", c.frozen_layer_count);
    return c;
}

json EncoderConfig::to_json() const {
    return {{"encoder_id", encoder_id}, {"max_tokens", max_tokens}, {"frozen_layer_count", frozen_layer_count}};
}

EncodedText encode(std::string_view text, const EncoderConfig& config) {
    const auto bundle = resolve_encoder(config.encoder_id);
    if (config.max_tokens > static_cast<std::size_t>(bundle->spec.max_positions)) {
        throw InvalidInput("max_tokens exceeds the encoder's position table");
    }
    return bundle->tokenizer->encode(text, config.max_tokens);
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const text::FeatureVector> features) {
    if (features.empty()) throw InvalidInput("cannot fit feature statistics on an empty set");
    constexpr auto k = text::FeatureVector::kSize;
    FeatureNormalizer n;
    n.mean.assign(k, 0.0);
    n.std.assign(k, 0.0);
    for (const auto& f : features) {
        const auto a = f.as_array();
        for (std::size_t i = 0; i < k; ++i) n.mean[i] += a[i];
    }
    for (auto& m : n.mean) m /= static_cast<double>(features.size());
    for (const auto& f : features) {
        const auto a = f.as_array();
        for (std::size_t i = 0; i < k; ++i) n.std[i] += (a[i] - n.mean[i]) * (a[i] - n.mean[i]);
    }
    for (auto& s : n.std) {
        s = std::sqrt(s / static_cast<double>(features.size()));
        if (!(s > 1e-12)) s = 1.0;
    }
    return n;
}

std::vector<double> FeatureNormalizer::apply(const text::FeatureVector& f) const {
    const auto a = f.as_array();
    if (mean.size() != a.size()) throw InvalidInput("feature statistics do not match the feature vector");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - mean[i]) / std[i];
    return out;
}

double RegressionHead::forward(const Eigen::VectorXd& input) const {
    if (input.size() != weight.size()) throw InvalidInput("head input size mismatch");
    return weight.dot(input) + bias;
}

Eigen::VectorXd RegressionHead::backward(const Eigen::VectorXd& input, double dpred, Eigen::VectorXd& grad_weight,
                                         double& grad_bias) const {
    grad_weight += input * dpred;
    grad_bias += dpred;
    return weight * dpred;
}

std::size_t HybridModel::head_input_size() const {
    return static_cast<std::size_t>(encoder.spec.dim) + normalizer.size();
}

HybridInput HybridModel::prepare(std::string_view text, const text::FeatureVector& features) const {
    const auto enc = tokenizer->encode(text, encoder_config.max_tokens);
    return {enc.token_ids, enc.attention_mask, normalizer.apply(features)};
}

Eigen::VectorXd HybridModel::pooled(const HybridInput& input) const {
    const auto ids = unpadded(input.token_ids, input.attention_mask);
    const Mat<float> h = EncoderOps<float>::run(encoder, ids, encoder.spec.n_layers);
    return h.colwise().mean().transpose().cast<double>();
}

double HybridModel::forward(const HybridInput& input) const {
    if (input.normalized_features.size() != normalizer.size()) {
        throw InvalidInput("feature vector length " + std::to_string(input.normalized_features.size()) +
                           " does not match the model's " + std::to_string(normalizer.size()));
    }
    if (input.token_ids.size() != encoder_config.max_tokens) {
        throw InvalidInput("token sequence length does not match max_tokens");
    }
    const auto p = pooled(input);
    Eigen::VectorXd v(head_input_size());
    v << p, Eigen::Map<const Eigen::VectorXd>(input.normalized_features.data(),
                                             static_cast<Eigen::Index>(input.normalized_features.size()));
    return head.forward(v);
}

std::vector<double> HybridModel::forward_batch(std::span<const HybridInput> inputs) const {
    std::vector<double> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back(forward(in));
    return out;
}

void HybridModel::save(const std::filesystem::path& path) const {
    SafetensorsFile f;
    encoder.visit([&](const std::string& name, const auto& t, bool) {
        f.tensors.emplace(name, Tensor::from_float(t.data(), {t.rows(), t.cols()}));
    });
    for (auto& [name, t] : f.tensors) {
        if (t.shape[0] == 1) t.shape.erase(t.shape.begin());  // biases and gains are 1-D
    }
    f.tensors.emplace("head.weight", Tensor::from_double(head.weight.data(), {1, head.weight.size()}));
    f.tensors.emplace("head.bias", Tensor::from_double(&head.bias, {1}));
    const auto k = static_cast<std::int64_t>(normalizer.size());
    f.tensors.emplace("normalizer.mean", Tensor::from_double(normalizer.mean.data(), {k}));
    f.tensors.emplace("normalizer.std", Tensor::from_double(normalizer.std.data(), {k}));

    json names = json::array();
    for (auto n : text::FeatureVector::names()) names.push_back(std::string(n));
    std::string vocab;
    for (const auto& t : tokenizer->vocab()) vocab += t + "\n";

    f.metadata = {
        {"format", kArtifactFormat},
        {"encoder_config", encoder_config.to_json().dump()},
        {"encoder_spec", encoder.spec.to_json().dump()},
        {"vocab", vocab},
        {"feature_names", names.dump()},
        {"train_config", train_config.dump()},
        {"history", history.dump()},
        {"best_val_mae", exact(best_val_mae)},
        {"best_epoch", std::to_string(best_epoch)},
        {"data_ids", ids_json(data_ids).dump()},
        {"grammar_backend", grammar_backend},
        {"lexicon_top_k", std::to_string(lexicon_top_k)},
    };
    write_safetensors(path, f);
}

HybridModel HybridModel::load(const std::filesystem::path& path) {
    const auto f = read_safetensors(path);
    if (meta(f, "format") != kArtifactFormat) throw InvalidInput(path.string() + " is not a hybrid model artifact");
    HybridModel m;
    try {
        m.encoder_config = EncoderConfig::from_json(json::parse(meta(f, "encoder_config")));
        const auto spec = EncoderSpec::from_json(json::parse(meta(f, "encoder_spec")));
        m.encoder_config.validate(spec.n_layers);

        std::vector<std::string> vocab;
        const auto& v = meta(f, "vocab");
        std::size_t pos = 0;
        while (pos < v.size()) {
            const auto eol = v.find('\n', pos);
            vocab.push_back(v.substr(pos, eol - pos));
            pos = eol + 1;
        }
        m.tokenizer = std::make_shared<WordPieceTokenizer>(std::move(vocab), spec.lowercase);

        m.encoder = EncoderWeights<float>::zeros(spec);
        m.encoder.visit([&](const std::string& name, auto& t, bool) {
            const auto& src = tensor(f, name);
            if (src.numel() != static_cast<std::size_t>(t.size())) throw InvalidInput("tensor " + name + " has a bad shape");
            const auto values = src.to_float();
            std::copy(values.begin(), values.end(), t.data());
        });
        const auto hw = tensor(f, "head.weight").to_double();
        m.head.weight = Eigen::Map<const Eigen::VectorXd>(hw.data(), static_cast<Eigen::Index>(hw.size()));
        m.head.bias = tensor(f, "head.bias").to_double().at(0);
        m.normalizer.mean = tensor(f, "normalizer.mean").to_double();
        m.normalizer.std = tensor(f, "normalizer.std").to_double();
        if (m.normalizer.mean.size() != text::FeatureVector::kSize || m.normalizer.std.size() != m.normalizer.mean.size()) {
            throw InvalidInput("normalisation statistics have the wrong length");
        }
        if (m.head.weight.size() != static_cast<Eigen::Index>(m.head_input_size())) {
            throw InvalidInput("head weight length does not match encoder dim + features");
        }

        m.train_config = json::parse(meta(f, "train_config"));
        m.history = json::parse(meta(f, "history"));
        m.best_val_mae = std::stod(meta(f, "best_val_mae"));
        m.best_epoch = std::stoi(meta(f, "best_epoch"));
        const auto ids = json::parse(meta(f, "data_ids"));
        m.data_ids.train = ids.at("train").get<std::vector<std::string>>();
        m.data_ids.val = ids.at("val").get<std::vector<std::string>>();
        m.data_ids.test = ids.at("test").get<std::vector<std::string>>();
        m.grammar_backend = meta(f, "grammar_backend");
        m.lexicon_top_k = std::stoul(meta(f, "lexicon_top_k"));
    } catch (const json::exception& e) {
        throw InvalidInput("corrupt model artifact " + path.string() + ": " + e.what());
    }
    return m;
}

std::uint64_t HybridModel::weights_digest() const {
    std::uint64_t h = fnv1a64("");
    auto add = [&](const std::string& name, const void* data, std::size_t bytes) {
        h = fnv1a64(name, h);
        h = fnv1a64(std::string_view(static_cast<const char*>(data), bytes), h);
    };
    encoder.visit([&](const std::string& name, const auto& t, bool) {
        add(name, t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
    });
    add("head.weight", head.weight.data(), static_cast<std::size_t>(head.weight.size()) * sizeof(double));
    add("head.bias", &head.bias, sizeof(double));
    add("normalizer.mean", normalizer.mean.data(), normalizer.mean.size() * sizeof(double));
    add("normalizer.std", normalizer.std.data(), normalizer.std.size() * sizeof(double));
    return h;
}

std::vector<Prediction> predict_batch(const HybridModel& model, std::span<const std::string> essays,
                                      const text::TextAnalyzer& analyzer) {
    std::vector<Prediction> out;
    out.reserve(essays.size());
    for (const auto& e : essays) out.push_back(predict(model, e, analyzer));
    return out;
}

Prediction predict(const HybridModel& model, std::string_view essay, const text::TextAnalyzer& analyzer) {
    const auto analysis = analyzer.analyze(essay);
    const double raw = model.forward(model.prepare(essay, analysis.features));
    if (!std::isfinite(raw)) throw InvalidInput("model produced a non-finite score");
    return {raw, corpus::round_to_band(raw)};
}

}  // namespace ielts::neural
