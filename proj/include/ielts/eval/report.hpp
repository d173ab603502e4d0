#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ielts/eval/metrics.hpp"
#include "ielts/eval/stats.hpp"

namespace ielts::eval {

// Pretty-printed JSON written through a temporary file; creates parent
// directories and throws IoError when the path is not writable.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& content);

struct Series {
    std::string name;
    std::vector<double> values;
};

// Minimal SVG charts. The JSON written next to them is the canonical output.
std::string svg_scatter(std::span<const double> x, std::span<const double> y, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        std::span<const std::string> groups = {});
std::string svg_box(std::span<const Series> series, const std::string& title);
std::string svg_histogram(std::span<const double> values, double bin_width, double marker, const std::string& title);
std::string svg_confusion(const ConfusionMatrix& m, const std::string& title);

// Fixed-width bins anchored at multiples of `bin_width`.
nlohmann::json histogram_json(std::span<const double> values, double bin_width, double marker);

// Writes metrics.json, confusion.json, predictions.csv and the scatter, box,
// residual and confusion plots for one scored split.
MetricsReport write_benchmark(const std::filesystem::path& out_dir, const std::string& name,
                              std::span<const std::string> ids, std::span<const double> preds,
                              std::span<const double> labels, const nlohmann::json& extra = nlohmann::json::object());

// Writes stats.json, histogram.json and the histogram, box and before/after
// scatter plots for one paired comparison.
void write_paired(const std::filesystem::path& out_dir, const StatsReport& stats, std::span<const double> before,
                  std::span<const double> after, std::span<const std::string> groups = {});

// Side-by-side metrics of several runs (first run is the baseline) with the
// improvement of the last run over the first; MAE improves downwards.
nlohmann::json compare_runs(const std::vector<std::pair<std::string, MetricsReport>>& runs);
std::string compare_table_markdown(const nlohmann::json& comparison);

}  // namespace ielts::eval
