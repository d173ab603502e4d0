#include "ielts/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ielts/common/error.hpp"

namespace ielts::eval {

namespace {

using nlohmann::json;

void check_pairs(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidInput("predictions and labels differ in length");
    if (a.empty()) throw InvalidInput("no predictions");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw InvalidInput("non-finite value");
    }
}

double mean(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sum_sq_dev(std::span<const double> x, double m) {
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return s;
}

bool constant(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
}

double pct(std::size_t k, std::size_t n) { return 100.0 * static_cast<double>(k) / static_cast<double>(n); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pairs(x, y);
    const double mx = mean(x), my = mean(y);
    double sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my);
    if (constant(x) || constant(y)) throw InvalidInput("correlation undefined for zero variance");
    const double sxx = sum_sq_dev(x, mx), syy = sum_sq_dev(y, my);
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pairs(x, y);
    const auto rx = average_ranks(x), ry = average_ranks(y);
    return pearson(rx, ry);
}

MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> labels) {
    check_pairs(preds, labels);
    const double my = mean(labels);
    const double ss_tot = sum_sq_dev(labels, my);
    if (constant(labels)) throw InvalidInput("labels have zero variance; R² is undefined");

    MetricsReport m;
    m.n = preds.size();
    double abs_err = 0, ss_res = 0;
    std::size_t exact = 0, w05 = 0, w10 = 0;
    for (std::size_t i = 0; i < m.n; ++i) {
        const double e = preds[i] - labels[i];
        abs_err += std::abs(e);
        ss_res += e * e;
        const double gap = std::abs(corpus::round_to_band(preds[i]).value() - labels[i]);
        exact += gap < 1e-9;
        w05 += gap <= 0.5 + 1e-9;
        w10 += gap <= 1.0 + 1e-9;
    }
    m.mae = abs_err / static_cast<double>(m.n);
    m.r2 = 1.0 - ss_res / ss_tot;
    if (!constant(preds)) {
        m.pearson_r = pearson(preds, labels);
        m.spearman_rho = spearman(preds, labels);
    }
    m.exact_pct = pct(exact, m.n);
    m.within05_pct = pct(w05, m.n);
    m.within10_pct = pct(w10, m.n);
    return m;
}

json MetricsReport::to_json() const {
    return {{"n", n},
            {"mae", mae},
            {"r2", r2},
            {"pearson_r", optional_json(pearson_r)},
            {"spearman_rho", optional_json(spearman_rho)},
            {"exact_pct", exact_pct},
            {"within05_pct", within05_pct},
            {"within10_pct", within10_pct}};
}

MetricsReport MetricsReport::from_json(const json& j) {
    MetricsReport m;
    try {
        m.n = j.at("n").get<std::size_t>();
        m.mae = j.at("mae").get<double>();
        m.r2 = j.at("r2").get<double>();
        if (!j.at("pearson_r").is_null()) m.pearson_r = j["pearson_r"].get<double>();
        if (!j.at("spearman_rho").is_null()) m.spearman_rho = j["spearman_rho"].get<double>();
        m.exact_pct = j.at("exact_pct").get<double>();
        m.within05_pct = j.at("within05_pct").get<double>();
        m.within10_pct = j.at("within10_pct").get<double>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("metrics: ") + e.what());
    }
    return m;
}

std::size_t ConfusionMatrix::at(corpus::Band actual, corpus::Band predicted) const {
    return counts[actual.index()][predicted.index()];
}

json ConfusionMatrix::to_json() const {
    json bands = json::array(), rows = json::array();
    for (int i = 0; i < corpus::kBandCount; ++i) {
        bands.push_back(corpus::band_at(i).value());
        rows.push_back(counts[i]);
    }
    return {{"bands", bands}, {"counts", rows}, {"n", n}, {"axes", {"actual", "predicted"}}};
}

ConfusionMatrix confusion(std::span<const double> preds, std::span<const double> labels) {
    check_pairs(preds, labels);
    ConfusionMatrix m;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ++m.counts[corpus::round_to_band(labels[i]).index()][corpus::round_to_band(preds[i]).index()];
    }
    m.n = preds.size();
    return m;
}

}  // namespace ielts::eval
