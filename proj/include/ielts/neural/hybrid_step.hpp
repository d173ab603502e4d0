#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ielts/common/rng.hpp"
#include "ielts/neural/encoder.hpp"
#include "ielts/neural/hybrid.hpp"

namespace ielts::neural {

// Gradient buffers for one forward/backward pass of the hybrid model.
template <typename T>
struct HybridGrad {
    EncoderWeights<T> encoder;
    Eigen::VectorXd head_weight;
    double head_bias = 0.0;

    static HybridGrad zeros(const EncoderSpec& spec, std::size_t head_size) {
        HybridGrad g;
        g.encoder = EncoderWeights<T>::zeros(spec);
        g.head_weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(head_size));
        return g;
    }
};

// One example through the trainable part of the model: layers
// [frozen, n_layers) and the head. `base` is the frozen stack's output; with
// frozen == 0 the embeddings run (and are trained) from `ids` instead.
// Adds dloss/dparams * `loss_scale` for the squared error to `grad` (when not
// null) and returns the raw prediction. A null `rng` disables dropout.
template <typename T>
double hybrid_step(const EncoderWeights<T>& w, const RegressionHead& head, int frozen, const Mat<T>& base,
                   std::span<const std::int32_t> ids, std::span<const double> features, double target,
                   double loss_scale, double head_dropout, std::mt19937_64* rng, HybridGrad<T>* grad) {
    const int n_layers = w.spec.n_layers;
    EmbeddingCache<T> emb_cache;
    std::vector<LayerCache<T>> caches(static_cast<std::size_t>(n_layers - frozen));
    Mat<T> x = frozen == 0 ? EncoderOps<T>::embed(w, ids, grad ? &emb_cache : nullptr, rng) : base;
    for (int l = frozen; l < n_layers; ++l) {
        x = EncoderOps<T>::layer_forward(w.layers[static_cast<std::size_t>(l)], w.spec, x,
                                         grad ? &caches[static_cast<std::size_t>(l - frozen)] : nullptr, rng);
    }
    const Eigen::Index dim = w.spec.dim;
    const auto n_feat = static_cast<Eigen::Index>(features.size());
    Eigen::VectorXd v(dim + n_feat);
    v.head(dim) = x.colwise().mean().transpose().template cast<double>();
    v.tail(n_feat) = Eigen::Map<const Eigen::VectorXd>(features.data(), n_feat);

    Eigen::VectorXd mask;
    if (rng && head_dropout > 0) {
        mask.resize(v.size());
        const double keep = 1.0 / (1.0 - head_dropout);
        for (Eigen::Index i = 0; i < v.size(); ++i) mask[i] = uniform01(*rng) < head_dropout ? 0.0 : keep;
        v = v.cwiseProduct(mask);
    }
    const double pred = head.forward(v);
    if (!grad) return pred;

    const double dpred = 2.0 * (pred - target) * loss_scale;
    Eigen::VectorXd dv = head.backward(v, dpred, grad->head_weight, grad->head_bias);
    if (mask.size()) dv = dv.cwiseProduct(mask);
    if (frozen == n_layers) return pred;

    const RowVec<T> dpool = (dv.head(dim) / static_cast<double>(x.rows())).transpose().template cast<T>();
    Mat<T> dx = dpool.replicate(x.rows(), 1);
    for (int l = n_layers - 1; l >= frozen; --l) {
        const auto li = static_cast<std::size_t>(l);
        dx = EncoderOps<T>::layer_backward(w.layers[li], w.spec, caches[li - static_cast<std::size_t>(frozen)], dx,
                                           grad->encoder.layers[li]);
    }
    if (frozen == 0) EncoderOps<T>::embed_backward(w, emb_cache, dx, grad->encoder);
    return pred;
}

}  // namespace ielts::neural
