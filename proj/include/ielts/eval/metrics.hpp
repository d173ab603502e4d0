#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "ielts/corpus/band.hpp"

namespace ielts::eval {

// Agreement between raw predictions and labels. MAE, R² and the correlations
// use raw values; the exact and within-k percentages compare
// round_to_band(prediction) with the label. Correlations are absent when the
// predictions are constant.
struct MetricsReport {
    std::size_t n = 0;
    double mae = 0;
    double r2 = 0;
    std::optional<double> pearson_r;
    std::optional<double> spearman_rho;
    double exact_pct = 0;
    double within05_pct = 0;
    double within10_pct = 0;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

// Throws InvalidInput for mismatched or empty inputs, non-finite values, or
// labels with zero variance.
MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> labels);

// Throws InvalidInput when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// 1-based ranks, ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

// Counts indexed [actual][predicted] by band lattice index; both axes are
// binned with round_to_band.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, corpus::kBandCount>, corpus::kBandCount> counts{};
    std::size_t n = 0;

    std::size_t at(corpus::Band actual, corpus::Band predicted) const;
    nlohmann::json to_json() const;
};

ConfusionMatrix confusion(std::span<const double> preds, std::span<const double> labels);

}  // namespace ielts::eval
