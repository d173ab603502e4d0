#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ielts/corpus/essay.hpp"
#include "ielts/neural/hybrid.hpp"
#include "ielts/text/features.hpp"

namespace ielts::neural {

struct TrainConfig {
    double learning_rate = 1.5e-5;
    std::optional<double> head_learning_rate;  // defaults to learning_rate
    double weight_decay = 0.02;
    double dropout = 0.35;
    double target_jitter_sigma = 0.05;
    int grad_accum_steps = 4;
    int micro_batch = 8;
    int max_epochs = 30;
    int patience = 5;
    std::uint64_t seed = 42;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_mae = 0.0;
    double val_mae = 0.0;
    std::vector<std::string> events;  // "improved", "early_stop"
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_mae = 0.0;
    bool stopped_early = false;

    nlohmann::json to_json() const;
};

// Tracks the best validation MAE and the number of epochs since it improved.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);

    // Returns true when `val_mae` strictly improves on the best so far.
    bool update(int epoch, double val_mae);
    bool should_stop() const { return since_best_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best() const { return best_; }

private:
    int patience_;
    int best_epoch_ = 0;
    double best_ = 0.0;
    int since_best_ = 0;
};

// Decoupled weight decay Adam over registered float and double buffers.
class AdamW {
public:
    AdamW(double beta1, double beta2, double eps, double weight_decay);

    void add(float* param, float* grad, std::size_t n, bool decay, double lr);
    void add(double* param, double* grad, std::size_t n, bool decay, double lr);

    // One update of every registered buffer; gradients are zeroed afterwards.
    void step();
    long steps() const { return t_; }

private:
    template <typename T>
    struct Slot {
        T* param;
        T* grad;
        std::size_t n;
        bool decay;
        double lr;
        std::vector<T> m, v;
    };
    template <typename T>
    void update(Slot<T>& s);

    double b1_, b2_, eps_, wd_;
    long t_ = 0;
    std::vector<Slot<float>> f_;
    std::vector<Slot<double>> d_;
};

struct TrainResult {
    HybridModel model;
    TrainingHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fine-tunes the hybrid scorer. Feature statistics come from `train` only.
// Raises InvalidInput for empty or unlabeled sets and TrainingDiverged on a
// non-finite loss.
TrainResult train(std::span<const corpus::EssayRecord> train, std::span<const corpus::EssayRecord> val,
                  const EncoderConfig& encoder_config, const TrainConfig& config, const text::TextAnalyzer& analyzer,
                  const EpochCallback& on_epoch = {});

// Mean absolute error of raw predictions against labels.
double evaluate_mae(const HybridModel& model, std::span<const corpus::EssayRecord> records,
                    const text::TextAnalyzer& analyzer);

}  // namespace ielts::neural
