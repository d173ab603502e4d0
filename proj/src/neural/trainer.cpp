#include "ielts/neural/trainer.hpp"

#include <cmath>
#include <numeric>

#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"
#include "ielts/neural/hybrid_step.hpp"
#include "ielts/neural/registry.hpp"

namespace ielts::neural {

namespace {

using nlohmann::json;

struct Example {
    std::vector<std::int32_t> ids;
    std::vector<double> features;
    double label = 0.0;
    Mat<float> base;  // output of the frozen stack
};

std::vector<Example> prepare_examples(const HybridModel& m, std::span<const corpus::EssayRecord> records,
                                      std::span<const text::FeatureVector> features) {
    std::vector<Example> out;
    out.reserve(records.size());
    const int frozen = m.encoder_config.frozen_layer_count;
    for (std::size_t i = 0; i < records.size(); ++i) {
        Example ex;
        const auto enc = m.tokenizer->encode(records[i].body, m.encoder_config.max_tokens);
        const auto ids = unpadded(enc.token_ids, enc.attention_mask);
        ex.ids.assign(ids.begin(), ids.end());
        ex.features = m.normalizer.apply(features[i]);
        ex.label = records[i].label->value();
        if (frozen > 0) ex.base = EncoderOps<float>::run(m.encoder, ex.ids, frozen);
        out.push_back(std::move(ex));
    }
    return out;
}

void require_labeled(std::span<const corpus::EssayRecord> records, const char* which) {
    if (records.empty()) throw InvalidInput(std::string("empty ") + which + " set");
    for (const auto& r : records) {
        if (!r.label) throw InvalidInput(std::string(which) + " record '" + r.id + "' has no band label");
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate >= 0) || (head_learning_rate && !(*head_learning_rate >= 0))) {
        throw InvalidInput("learning rates must be nonnegative");
    }
    if (!(weight_decay >= 0)) throw InvalidInput("weight_decay must be nonnegative");
    if (!(dropout >= 0 && dropout < 1)) throw InvalidInput("dropout must lie in [0, 1)");
    if (!(target_jitter_sigma >= 0)) throw InvalidInput("target_jitter_sigma must be nonnegative");
    if (grad_accum_steps < 1 || micro_batch < 1) throw InvalidInput("batch settings must be at least 1");
    if (max_epochs < 1 || patience < 1) throw InvalidInput("max_epochs and patience must be at least 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0)) {
        throw InvalidInput("invalid Adam hyperparameters");
    }
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        if (j.contains("head_learning_rate") && !j["head_learning_rate"].is_null()) {
            c.head_learning_rate = j["head_learning_rate"].get<double>();
        }
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.dropout = j.value("dropout", c.dropout);
        c.target_jitter_sigma = j.value("target_jitter_sigma", c.target_jitter_sigma);
        c.grad_accum_steps = j.value("grad_accum_steps", c.grad_accum_steps);
        c.micro_batch = j.value("micro_batch", c.micro_batch);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.seed = j.value("seed", c.seed);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("invalid training config: ") + e.what());
    }
    c.validate();
    return c;
}

json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"head_learning_rate", head_learning_rate ? json(*head_learning_rate) : json(nullptr)},
            {"weight_decay", weight_decay},
            {"dropout", dropout},
            {"target_jitter_sigma", target_jitter_sigma},
            {"grad_accum_steps", grad_accum_steps},
            {"micro_batch", micro_batch},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"seed", seed},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps}};
}

json TrainingHistory::to_json() const {
    json epochs_json = json::array();
    for (const auto& e : epochs) {
        epochs_json.push_back({{"epoch", e.epoch}, {"train_mae", e.train_mae}, {"val_mae", e.val_mae}, {"events", e.events}});
    }
    return {{"epochs", epochs_json},
            {"best_epoch", best_epoch},
            {"best_val_mae", best_val_mae},
            {"stopped_early", stopped_early}};
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw InvalidInput("patience must be at least 1");
}

bool EarlyStopping::update(int epoch, double val_mae) {
    if (best_epoch_ == 0 || val_mae < best_) {
        best_ = val_mae;
        best_epoch_ = epoch;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::add(float* param, float* grad, std::size_t n, bool decay, double lr) {
    f_.push_back({param, grad, n, decay, lr, std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f)});
}

void AdamW::add(double* param, double* grad, std::size_t n, bool decay, double lr) {
    d_.push_back({param, grad, n, decay, lr, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
}

template <typename T>
void AdamW::update(Slot<T>& s) {
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    const T decay = static_cast<T>(1.0 - s.lr * wd_);
    const T b1 = static_cast<T>(b1_), b2 = static_cast<T>(b2_);
    const T step = static_cast<T>(s.lr / c1);
    const T sc2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < s.n; ++i) {
        const T g = s.grad[i];
        if (s.decay) s.param[i] *= decay;
        s.m[i] = b1 * s.m[i] + (T(1) - b1) * g;
        s.v[i] = b2 * s.v[i] + (T(1) - b2) * g * g;
        s.param[i] -= step * s.m[i] / (std::sqrt(s.v[i] * sc2) + eps);
        s.grad[i] = T(0);
    }
}

void AdamW::step() {
    ++t_;
    for (auto& s : f_) update(s);
    for (auto& s : d_) update(s);
}

TrainResult train(std::span<const corpus::EssayRecord> train_set, std::span<const corpus::EssayRecord> val_set,
                  const EncoderConfig& encoder_config, const TrainConfig& config, const text::TextAnalyzer& analyzer,
                  const EpochCallback& on_epoch) {
    config.validate();
    require_labeled(train_set, "training");
    require_labeled(val_set, "validation");
    const auto bundle = resolve_encoder(encoder_config.encoder_id);
    encoder_config.validate(bundle->spec.n_layers);
    if (encoder_config.max_tokens > static_cast<std::size_t>(bundle->spec.max_positions)) {
        throw InvalidInput("max_tokens exceeds the encoder's position table");
    }

    HybridModel m;
    m.encoder_config = encoder_config;
    m.encoder = bundle->load_weights();
    m.tokenizer = bundle->tokenizer;
    m.train_config = config.to_json();
    m.grammar_backend = analyzer.backend().name();
    m.lexicon_top_k = analyzer.lexicon().top_k();
    for (const auto& r : train_set) m.data_ids.train.push_back(r.id);
    for (const auto& r : val_set) m.data_ids.val.push_back(r.id);

    std::vector<text::FeatureVector> train_features, val_features;
    for (const auto& r : train_set) train_features.push_back(analyzer.analyze(r.body).features);
    for (const auto& r : val_set) val_features.push_back(analyzer.analyze(r.body).features);
    m.normalizer = FeatureNormalizer::fit(train_features);

    const std::size_t head_size = m.head_input_size();
    std::mt19937_64 init_rng(mix64(config.seed ^ 0x68656164ULL));
    m.head.weight.resize(static_cast<Eigen::Index>(head_size));
    for (Eigen::Index i = 0; i < m.head.weight.size(); ++i) m.head.weight[i] = 0.02 * normal01(init_rng);
    double label_sum = 0.0;
    for (const auto& r : train_set) label_sum += r.label->value();
    m.head.bias = label_sum / static_cast<double>(train_set.size());

    const auto train_ex = prepare_examples(m, train_set, train_features);
    const auto val_ex = prepare_examples(m, val_set, val_features);

    const int frozen = encoder_config.frozen_layer_count;
    const double head_lr = config.head_learning_rate.value_or(config.learning_rate);
    auto grads = HybridGrad<float>::zeros(m.encoder.spec, head_size);
    AdamW opt(config.adam_beta1, config.adam_beta2, config.adam_eps, config.weight_decay);
    {
        std::vector<std::pair<float*, bool>> params;
        std::vector<float*> grad_ptrs;
        std::vector<std::size_t> sizes;
        auto collect_param = [&](const std::string&, auto& t, bool decay) {
            params.emplace_back(t.data(), decay);
            sizes.push_back(static_cast<std::size_t>(t.size()));
        };
        auto collect_grad = [&](const std::string&, auto& t, bool) { grad_ptrs.push_back(t.data()); };
        if (frozen == 0) {
            m.encoder.visit_embeddings(collect_param);
            grads.encoder.visit_embeddings(collect_grad);
        }
        for (int l = frozen; l < m.encoder.spec.n_layers; ++l) {
            m.encoder.layers[static_cast<std::size_t>(l)].visit(collect_param);
            grads.encoder.layers[static_cast<std::size_t>(l)].visit(collect_grad);
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            opt.add(params[i].first, grad_ptrs[i], sizes[i], params[i].second, config.learning_rate);
        }
    }
    opt.add(m.head.weight.data(), grads.head_weight.data(), head_size, true, head_lr);
    opt.add(&m.head.bias, &grads.head_bias, 1, false, head_lr);

    const auto evaluate = [&](const HybridModel& model) {
        double err = 0.0;
        for (const auto& ex : val_ex) {
            const double p = hybrid_step<float>(model.encoder, model.head, frozen, ex.base, ex.ids, ex.features, 0.0,
                                                0.0, 0.0, nullptr, nullptr);
            err += std::abs(p - ex.label);
        }
        return err / static_cast<double>(val_ex.size());
    };

    TrainResult result;
    HybridModel best = m;
    EarlyStopping stopper(config.patience);
    std::mt19937_64 dropout_rng(mix64(config.seed + 1));
    const std::size_t n = train_ex.size();
    const std::size_t step_size = static_cast<std::size_t>(config.micro_batch) * static_cast<std::size_t>(config.grad_accum_steps);
    std::vector<std::size_t> order(n);
    std::vector<double> targets(n);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(mix64(config.seed ^ (static_cast<std::uint64_t>(epoch) << 32)));
        fisher_yates(order, shuffle_rng);
        std::mt19937_64 jitter_rng(mix64(config.seed + 0x9e37ULL * static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = 0; i < n; ++i) {
            targets[i] = train_ex[i].label;
            if (config.target_jitter_sigma > 0) targets[i] += config.target_jitter_sigma * normal01(jitter_rng);
        }

        double abs_err = 0.0;
        for (std::size_t start = 0; start < n; start += step_size) {
            const std::size_t end = std::min(n, start + step_size);
            const std::size_t mb = static_cast<std::size_t>(config.micro_batch);
            const std::size_t n_micro = (end - start + mb - 1) / mb;
            for (std::size_t ms = start; ms < end; ms += mb) {
                const std::size_t me = std::min(end, ms + mb);
                const double scale = 1.0 / (static_cast<double>(me - ms) * static_cast<double>(n_micro));
                for (std::size_t k = ms; k < me; ++k) {
                    const auto& ex = train_ex[order[k]];
                    const double p = hybrid_step<float>(m.encoder, m.head, frozen, ex.base, ex.ids, ex.features,
                                                        targets[order[k]], scale, config.dropout, &dropout_rng, &grads);
                    if (!std::isfinite(p)) {
                        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", optimizer step " +
                                               std::to_string(opt.steps() + 1));
                    }
                    abs_err += std::abs(p - ex.label);
                }
            }
            opt.step();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mae = abs_err / static_cast<double>(n);
        rec.val_mae = evaluate(m);
        if (!std::isfinite(rec.val_mae)) {
            throw TrainingDiverged("non-finite validation MAE at epoch " + std::to_string(epoch));
        }
        if (stopper.update(epoch, rec.val_mae)) {
            rec.events.push_back("improved");
            best = m;
        }
        const bool stop = stopper.should_stop();
        if (stop) rec.events.push_back("early_stop");
        result.history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stop) {
            result.history.stopped_early = true;
            break;
        }
    }

    result.history.best_epoch = stopper.best_epoch();
    result.history.best_val_mae = stopper.best();
    best.best_epoch = stopper.best_epoch();
    best.best_val_mae = stopper.best();
    best.history = result.history.to_json();
    result.model = std::move(best);
    return result;
}

double evaluate_mae(const HybridModel& model, std::span<const corpus::EssayRecord> records,
                    const text::TextAnalyzer& analyzer) {
    require_labeled(records, "evaluation");
    double err = 0.0;
    for (const auto& r : records) err += std::abs(predict(model, r.body, analyzer).raw - r.label->value());
    return err / static_cast<double>(records.size());
}

}  // namespace ielts::neural
