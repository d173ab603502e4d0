#include "ielts/neural/encoder.hpp"

#include <cmath>

#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"

namespace ielts::neural {

namespace {

template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

constexpr double kLayerNormEps = 1e-12;

template <typename T>
Mat<T> layer_norm(const Mat<T>& z, const RowVec<T>& g, const RowVec<T>& b, Mat<T>* xhat_out, ColVec<T>* inv_out) {
    const auto n = static_cast<T>(z.cols());
    ColVec<T> mu = z.rowwise().sum() / n;
    Mat<T> xc = z.colwise() - mu;
    ColVec<T> var = xc.array().square().rowwise().sum() / n;
    ColVec<T> inv = (var.array() + static_cast<T>(kLayerNormEps)).rsqrt();
    Mat<T> xhat = xc.array().colwise() * inv.array();
    Mat<T> y = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
    if (xhat_out) *xhat_out = std::move(xhat);
    if (inv_out) *inv_out = std::move(inv);
    return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const ColVec<T>& inv, const RowVec<T>& g,
                           RowVec<T>& dg, RowVec<T>& db) {
    dg += (dy.array() * xhat.array()).colwise().sum().matrix();
    db += dy.colwise().sum();
    const auto n = static_cast<T>(dy.cols());
    Mat<T> dxhat = dy.array().rowwise() * g.array();
    ColVec<T> s1 = dxhat.rowwise().sum();
    ColVec<T> s2 = (dxhat.array() * xhat.array()).rowwise().sum();
    Mat<T> dx = ((dxhat.array() * n).colwise() - s1.array() - (xhat.array().colwise() * s2.array())).colwise() *
                (inv.array() / n);
    return dx;
}

template <typename T>
T gelu(T x) {
    return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = static_cast<T>(0.5) * (static_cast<T>(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
    const T pdf = std::exp(static_cast<T>(-0.5) * x * x) * static_cast<T>(0.3989422804014327);
    return cdf + x * pdf;
}

// Inverted-dropout scale mask: 0 with probability p, 1/(1-p) otherwise.
template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
    Mat<T> m(rows, cols);
    const T keep = static_cast<T>(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < p ? T(0) : keep;
    return m;
}

template <typename T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const RowVec<T>& b) {
    Mat<T> y = x * w.transpose();
    y.rowwise() += b;
    return y;
}

template <typename T>
void linear_backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>& dw, RowVec<T>& db) {
    dw.noalias() += dy.transpose() * x;
    db += dy.colwise().sum();
}

template <typename T>
Mat<T> normal_matrix(Eigen::Index rows, Eigen::Index cols, double std, std::mt19937_64& rng) {
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(std * normal01(rng));
    return m;
}

}  // namespace

void EncoderSpec::validate() const {
    if (vocab_size <= 0 || dim <= 0 || n_layers <= 0 || n_heads <= 0 || hidden_dim <= 0 || max_positions <= 0) {
        throw InvalidInput("encoder dimensions must be positive");
    }
    if (dim % n_heads != 0) throw InvalidInput("encoder dim must be divisible by n_heads");
    if (dropout < 0 || dropout >= 1 || attention_dropout < 0 || attention_dropout >= 1) {
        throw InvalidInput("encoder dropout must lie in [0, 1)");
    }
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
    EncoderSpec s;
    try {
        s.vocab_size = j.at("vocab_size").get<int>();
        s.dim = j.at("dim").get<int>();
        s.n_layers = j.at("n_layers").get<int>();
        s.n_heads = j.at("n_heads").get<int>();
        s.hidden_dim = j.at("hidden_dim").get<int>();
        s.max_positions = j.at("max_position_embeddings").get<int>();
        s.dropout = j.value("dropout", s.dropout);
        s.attention_dropout = j.value("attention_dropout", s.attention_dropout);
        s.lowercase = j.value("do_lower_case", s.lowercase);
        if (j.contains("init")) {
            s.init_seed = j["init"].value("seed", s.init_seed);
            s.init_std = j["init"].value("std", s.init_std);
        } else {
            s.init_std = j.value("initializer_range", s.init_std);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("invalid encoder config: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json EncoderSpec::to_json() const {
    return {{"architecture", "distilbert"},
            {"vocab_size", vocab_size},
            {"dim", dim},
            {"n_layers", n_layers},
            {"n_heads", n_heads},
            {"hidden_dim", hidden_dim},
            {"max_position_embeddings", max_positions},
            {"dropout", dropout},
            {"attention_dropout", attention_dropout},
            {"do_lower_case", lowercase},
            {"init", {{"seed", init_seed}, {"std", init_std}}}};
}

template <typename T>
LayerWeights<T> LayerWeights<T>::zeros(const EncoderSpec& s) {
    LayerWeights w;
    for (auto* m : {&w.q_w, &w.k_w, &w.v_w, &w.o_w}) m->setZero(s.dim, s.dim);
    for (auto* v : {&w.q_b, &w.k_b, &w.v_b, &w.o_b, &w.ln1_g, &w.ln1_b, &w.ff2_b, &w.ln2_g, &w.ln2_b}) {
        v->setZero(s.dim);
    }
    w.ff1_w.setZero(s.hidden_dim, s.dim);
    w.ff1_b.setZero(s.hidden_dim);
    w.ff2_w.setZero(s.dim, s.hidden_dim);
    return w;
}

template <typename T>
EncoderWeights<T> EncoderWeights<T>::zeros(const EncoderSpec& s) {
    s.validate();
    EncoderWeights w;
    w.spec = s;
    w.word_emb.setZero(s.vocab_size, s.dim);
    w.pos_emb.setZero(s.max_positions, s.dim);
    w.emb_ln_g.setZero(s.dim);
    w.emb_ln_b.setZero(s.dim);
    w.layers.assign(static_cast<std::size_t>(s.n_layers), LayerWeights<T>::zeros(s));
    return w;
}

template <typename T>
EncoderWeights<T> EncoderWeights<T>::random(const EncoderSpec& s) {
    EncoderWeights w = zeros(s);
    std::mt19937_64 rng(s.init_seed);
    w.word_emb = normal_matrix<T>(s.vocab_size, s.dim, s.init_std, rng);
    w.pos_emb = normal_matrix<T>(s.max_positions, s.dim, s.init_std, rng);
    w.emb_ln_g.setOnes();
    for (auto& l : w.layers) {
        l.q_w = normal_matrix<T>(s.dim, s.dim, s.init_std, rng);
        l.k_w = normal_matrix<T>(s.dim, s.dim, s.init_std, rng);
        l.v_w = normal_matrix<T>(s.dim, s.dim, s.init_std, rng);
        l.o_w = normal_matrix<T>(s.dim, s.dim, s.init_std, rng);
        l.ff1_w = normal_matrix<T>(s.hidden_dim, s.dim, s.init_std, rng);
        l.ff2_w = normal_matrix<T>(s.dim, s.hidden_dim, s.init_std, rng);
        l.ln1_g.setOnes();
        l.ln2_g.setOnes();
    }
    return w;
}

template <typename T>
Mat<T> EncoderOps<T>::embed(const EncoderWeights<T>& w, std::span<const std::int32_t> ids, EmbeddingCache<T>* cache,
                            std::mt19937_64* rng) {
    const auto len = static_cast<Eigen::Index>(ids.size());
    if (len == 0) throw InvalidInput("cannot embed an empty sequence");
    if (len > w.spec.max_positions) throw InvalidInput("sequence longer than the encoder's position table");
    Mat<T> e(len, w.spec.dim);
    for (Eigen::Index i = 0; i < len; ++i) {
        const auto id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= w.spec.vocab_size) throw InvalidInput("token id outside the vocabulary");
        e.row(i) = w.word_emb.row(id) + w.pos_emb.row(i);
    }
    Mat<T> y = layer_norm<T>(e, w.emb_ln_g, w.emb_ln_b, cache ? &cache->xhat : nullptr, cache ? &cache->inv : nullptr);
    if (cache) cache->ids.assign(ids.begin(), ids.end());
    if (rng && w.spec.dropout > 0) {
        Mat<T> m = dropout_mask<T>(y.rows(), y.cols(), w.spec.dropout, *rng);
        y = y.cwiseProduct(m);
        if (cache) cache->mask = std::move(m);
    } else if (cache) {
        cache->mask.resize(0, 0);
    }
    return y;
}

template <typename T>
void EncoderOps<T>::embed_backward(const EncoderWeights<T>& w, const EmbeddingCache<T>& cache, const Mat<T>& dy,
                                   EncoderWeights<T>& grad) {
    Mat<T> d = cache.mask.size() ? Mat<T>(dy.cwiseProduct(cache.mask)) : dy;
    Mat<T> de = layer_norm_backward<T>(d, cache.xhat, cache.inv, w.emb_ln_g, grad.emb_ln_g, grad.emb_ln_b);
    for (Eigen::Index i = 0; i < de.rows(); ++i) {
        grad.word_emb.row(cache.ids[static_cast<std::size_t>(i)]) += de.row(i);
        grad.pos_emb.row(i) += de.row(i);
    }
}

template <typename T>
Mat<T> EncoderOps<T>::layer_forward(const LayerWeights<T>& w, const EncoderSpec& spec, const Mat<T>& x,
                                    LayerCache<T>* cache, std::mt19937_64* rng) {
    const Eigen::Index len = x.rows();
    const int dh = spec.dim / spec.n_heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    Mat<T> q = linear<T>(x, w.q_w, w.q_b);
    Mat<T> k = linear<T>(x, w.k_w, w.k_b);
    Mat<T> v = linear<T>(x, w.v_w, w.v_b);
    Mat<T> ctx(len, spec.dim);
    if (cache) {
        cache->probs.assign(static_cast<std::size_t>(spec.n_heads), Mat<T>());
        cache->attn_mask.clear();
    }
    for (int h = 0; h < spec.n_heads; ++h) {
        const auto cols = Eigen::seqN(h * dh, dh);
        Mat<T> s = (q(Eigen::all, cols) * k(Eigen::all, cols).transpose()) * scale;
        ColVec<T> mx = s.rowwise().maxCoeff();
        Mat<T> p = (s.colwise() - mx).array().exp();
        ColVec<T> sum = p.rowwise().sum();
        p = p.array().colwise() / sum.array();
        Mat<T> pd = p;
        if (rng && spec.attention_dropout > 0) {
            Mat<T> m = dropout_mask<T>(len, len, spec.attention_dropout, *rng);
            pd = p.cwiseProduct(m);
            if (cache) cache->attn_mask.push_back(std::move(m));
        }
        ctx(Eigen::all, cols) = pd * v(Eigen::all, cols);
        if (cache) cache->probs[static_cast<std::size_t>(h)] = std::move(p);
    }
    Mat<T> z1 = linear<T>(ctx, w.o_w, w.o_b) + x;
    Mat<T> xhat1, xhat2;
    ColVec<T> inv1, inv2;
    Mat<T> y1 = layer_norm<T>(z1, w.ln1_g, w.ln1_b, &xhat1, &inv1);
    Mat<T> pre = linear<T>(y1, w.ff1_w, w.ff1_b);
    Mat<T> hid = pre.unaryExpr([](T a) { return gelu(a); });
    Mat<T> f = linear<T>(hid, w.ff2_w, w.ff2_b);
    Mat<T> ff_mask;
    if (rng && spec.dropout > 0) {
        ff_mask = dropout_mask<T>(len, spec.dim, spec.dropout, *rng);
        f = f.cwiseProduct(ff_mask);
    }
    Mat<T> y2 = layer_norm<T>(f + y1, w.ln2_g, w.ln2_b, &xhat2, &inv2);
    if (cache) {
        cache->x = x;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->ctx = std::move(ctx);
        cache->xhat1 = std::move(xhat1);
        cache->inv1 = std::move(inv1);
        cache->y1 = std::move(y1);
        cache->pre = std::move(pre);
        cache->h = std::move(hid);
        cache->ff_mask = std::move(ff_mask);
        cache->xhat2 = std::move(xhat2);
        cache->inv2 = std::move(inv2);
    }
    return y2;
}

template <typename T>
Mat<T> EncoderOps<T>::layer_backward(const LayerWeights<T>& w, const EncoderSpec& spec, const LayerCache<T>& c,
                                     const Mat<T>& dy, LayerWeights<T>& g) {
    const int dh = spec.dim / spec.n_heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    Mat<T> dz2 = layer_norm_backward<T>(dy, c.xhat2, c.inv2, w.ln2_g, g.ln2_g, g.ln2_b);
    Mat<T> df = c.ff_mask.size() ? Mat<T>(dz2.cwiseProduct(c.ff_mask)) : dz2;
    linear_backward<T>(c.h, df, g.ff2_w, g.ff2_b);
    Mat<T> dhid = df * w.ff2_w;
    Mat<T> dpre = dhid.cwiseProduct(c.pre.unaryExpr([](T a) { return gelu_grad(a); }));
    linear_backward<T>(c.y1, dpre, g.ff1_w, g.ff1_b);
    Mat<T> dy1 = dz2 + dpre * w.ff1_w;

    Mat<T> dz1 = layer_norm_backward<T>(dy1, c.xhat1, c.inv1, w.ln1_g, g.ln1_g, g.ln1_b);
    linear_backward<T>(c.ctx, dz1, g.o_w, g.o_b);
    Mat<T> dctx = dz1 * w.o_w;

    const Eigen::Index len = c.x.rows();
    Mat<T> dq(len, spec.dim), dk(len, spec.dim), dv(len, spec.dim);
    for (int h = 0; h < spec.n_heads; ++h) {
        const auto cols = Eigen::seqN(h * dh, dh);
        const auto hi = static_cast<std::size_t>(h);
        const Mat<T>& p = c.probs[hi];
        const bool dropped = !c.attn_mask.empty();
        Mat<T> dctx_h = dctx(Eigen::all, cols);
        Mat<T> vh = c.v(Eigen::all, cols);
        Mat<T> dpd = dctx_h * vh.transpose();
        if (dropped) {
            dv(Eigen::all, cols) = p.cwiseProduct(c.attn_mask[hi]).transpose() * dctx_h;
            dpd = dpd.cwiseProduct(c.attn_mask[hi]);
        } else {
            dv(Eigen::all, cols) = p.transpose() * dctx_h;
        }
        ColVec<T> rs = dpd.cwiseProduct(p).rowwise().sum();
        Mat<T> ds = (p.array() * (dpd.array().colwise() - rs.array())).matrix() * scale;
        dq(Eigen::all, cols) = ds * c.k(Eigen::all, cols);
        dk(Eigen::all, cols) = ds.transpose() * c.q(Eigen::all, cols);
    }
    linear_backward<T>(c.x, dq, g.q_w, g.q_b);
    linear_backward<T>(c.x, dk, g.k_w, g.k_b);
    linear_backward<T>(c.x, dv, g.v_w, g.v_b);
    Mat<T> dx = dz1 + dq * w.q_w + dk * w.k_w + dv * w.v_w;
    return dx;
}

template <typename T>
Mat<T> EncoderOps<T>::run(const EncoderWeights<T>& w, std::span<const std::int32_t> ids, int n_layers) {
    Mat<T> x = embed(w, ids, nullptr, nullptr);
    for (int i = 0; i < n_layers; ++i) x = layer_forward(w.layers[static_cast<std::size_t>(i)], w.spec, x, nullptr, nullptr);
    return x;
}

std::span<const std::int32_t> unpadded(const std::vector<std::int32_t>& ids, const std::vector<std::uint8_t>& mask) {
    if (ids.size() != mask.size()) throw InvalidInput("token ids and attention mask differ in length");
    std::size_t n = 0;
    while (n < mask.size() && mask[n]) ++n;
    for (std::size_t i = n; i < mask.size(); ++i) {
        if (mask[i]) throw InvalidInput("attention mask must be a prefix of ones");
    }
    return {ids.data(), n};
}

template struct LayerWeights<float>;
template struct LayerWeights<double>;
template struct EncoderWeights<float>;
template struct EncoderWeights<double>;
template struct EncoderOps<float>;
template struct EncoderOps<double>;

}  // namespace ielts::neural
