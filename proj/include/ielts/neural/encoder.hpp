#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace ielts::neural {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Architecture of a DistilBERT-style encoder (post-LayerNorm blocks, GELU
// feed-forward, learned absolute positions).
struct EncoderSpec {
    int vocab_size = 0;
    int dim = 0;
    int n_layers = 0;
    int n_heads = 0;
    int hidden_dim = 0;
    int max_positions = 0;
    double dropout = 0.1;
    double attention_dropout = 0.1;
    bool lowercase = true;
    std::uint64_t init_seed = 0;
    double init_std = 0.02;

    void validate() const;
    static EncoderSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

template <typename T>
struct LayerWeights {
    Mat<T> q_w, k_w, v_w, o_w;  // [dim x dim], (out, in) orientation
    RowVec<T> q_b, k_b, v_b, o_b;
    RowVec<T> ln1_g, ln1_b;
    Mat<T> ff1_w;  // [hidden x dim]
    RowVec<T> ff1_b;
    Mat<T> ff2_w;  // [dim x hidden]
    RowVec<T> ff2_b;
    RowVec<T> ln2_g, ln2_b;

    // f(name, tensor, decays): weight decay applies to matrices, not to biases or LayerNorm.
    template <typename F>
    void visit(F&& f) {
        f("attention.q_lin.weight", q_w, true);
        f("attention.q_lin.bias", q_b, false);
        f("attention.k_lin.weight", k_w, true);
        f("attention.k_lin.bias", k_b, false);
        f("attention.v_lin.weight", v_w, true);
        f("attention.v_lin.bias", v_b, false);
        f("attention.out_lin.weight", o_w, true);
        f("attention.out_lin.bias", o_b, false);
        f("sa_layer_norm.weight", ln1_g, false);
        f("sa_layer_norm.bias", ln1_b, false);
        f("ffn.lin1.weight", ff1_w, true);
        f("ffn.lin1.bias", ff1_b, false);
        f("ffn.lin2.weight", ff2_w, true);
        f("ffn.lin2.bias", ff2_b, false);
        f("output_layer_norm.weight", ln2_g, false);
        f("output_layer_norm.bias", ln2_b, false);
    }
    template <typename F>
    void visit(F&& f) const {
        const_cast<LayerWeights*>(this)->visit([&](const std::string& n, const auto& t, bool w) { f(n, t, w); });
    }

    static LayerWeights zeros(const EncoderSpec& spec);
};

template <typename T>
struct EncoderWeights {
    EncoderSpec spec;
    Mat<T> word_emb;  // [vocab x dim]
    Mat<T> pos_emb;   // [max_positions x dim]
    RowVec<T> emb_ln_g, emb_ln_b;
    std::vector<LayerWeights<T>> layers;

    // Tensors under their checkpoint names ("embeddings.*", "transformer.layer.N.*").
    template <typename F>
    void visit_embeddings(F&& f) {
        f("embeddings.word_embeddings.weight", word_emb, true);
        f("embeddings.position_embeddings.weight", pos_emb, true);
        f("embeddings.LayerNorm.weight", emb_ln_g, false);
        f("embeddings.LayerNorm.bias", emb_ln_b, false);
    }
    template <typename F>
    void visit(F&& f) {
        visit_embeddings(f);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string prefix = "transformer.layer." + std::to_string(i) + ".";
            layers[i].visit([&](const std::string& n, auto& t, bool w) { f(prefix + n, t, w); });
        }
    }
    template <typename F>
    void visit(F&& f) const {
        const_cast<EncoderWeights*>(this)->visit([&](const std::string& n, const auto& t, bool w) { f(n, t, w); });
    }

    static EncoderWeights zeros(const EncoderSpec& spec);
    // Normal(0, init_std) matrices, zero biases, unit LayerNorm gains.
    static EncoderWeights random(const EncoderSpec& spec);

    template <typename U>
    EncoderWeights<U> cast() const {
        EncoderWeights<U> out = EncoderWeights<U>::zeros(spec);
        std::vector<const T*> src;
        visit([&](const std::string&, const auto& t, bool) { src.push_back(t.data()); });
        std::size_t i = 0;
        out.visit([&](const std::string&, auto& t, bool) {
            const T* s = src[i++];
            for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<U>(s[k]);
        });
        return out;
    }
};

template <typename T>
struct LayerCache {
    Mat<T> x, q, k, v;
    std::vector<Mat<T>> probs;      // per head, post-softmax
    std::vector<Mat<T>> attn_mask;  // per head dropout scale, empty in eval mode
    Mat<T> ctx;
    Mat<T> xhat1;
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv1;
    Mat<T> y1, pre, h;
    Mat<T> ff_mask;
    Mat<T> xhat2;
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv2;
};

template <typename T>
struct EmbeddingCache {
    std::vector<std::int32_t> ids;
    Mat<T> xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv;
    Mat<T> mask;
};

// Forward/backward kernels over one unpadded sequence. Attending only over
// the non-pad prefix is equivalent to masking the padded positions.
// A null `rng` means inference mode (no dropout).
template <typename T>
struct EncoderOps {
    static Mat<T> embed(const EncoderWeights<T>& w, std::span<const std::int32_t> ids, EmbeddingCache<T>* cache,
                        std::mt19937_64* rng);
    static void embed_backward(const EncoderWeights<T>& w, const EmbeddingCache<T>& cache, const Mat<T>& dy,
                               EncoderWeights<T>& grad);

    static Mat<T> layer_forward(const LayerWeights<T>& w, const EncoderSpec& spec, const Mat<T>& x,
                                LayerCache<T>* cache, std::mt19937_64* rng);
    // Accumulates parameter gradients into `grad` and returns dL/dx.
    static Mat<T> layer_backward(const LayerWeights<T>& w, const EncoderSpec& spec, const LayerCache<T>& cache,
                                 const Mat<T>& dy, LayerWeights<T>& grad);

    // Embeddings plus layers [0, n_layers) in inference mode.
    static Mat<T> run(const EncoderWeights<T>& w, std::span<const std::int32_t> ids, int n_layers);
};

// Non-pad prefix of a padded id sequence.
std::span<const std::int32_t> unpadded(const std::vector<std::int32_t>& ids, const std::vector<std::uint8_t>& mask);

extern template struct LayerWeights<float>;
extern template struct LayerWeights<double>;
extern template struct EncoderWeights<float>;
extern template struct EncoderWeights<double>;
extern template struct EncoderOps<float>;
extern template struct EncoderOps<double>;

}  // namespace ielts::neural
