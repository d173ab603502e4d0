#pragma once

// Brute-force reference implementations, written independently of the
// library for oracle-equivalence tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "ielts/common/rng.hpp"

namespace oracle {

inline double nearest_band(double x) {
    double best = 1.0;
    for (int k = 0; k <= 16; ++k) {
        const double v = 1.0 + 0.5 * k;
        if (std::abs(x - v) <= std::abs(x - best)) best = v;  // ties go to the larger band
    }
    return best;
}

struct Metrics {
    double mae, r2, exact_pct, within05_pct, within10_pct;
    std::optional<double> pearson, spearman;
};

inline std::optional<double> textbook_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    long double n = x.size(), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    bool varies = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += (long double)x[i] * x[i];
        syy += (long double)y[i] * y[i];
        sxy += (long double)x[i] * y[i];
        varies |= x[i] != x[0];
    }
    if (!varies) return std::nullopt;
    const long double num = n * sxy - sx * sy;
    const long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    return static_cast<double>(num / den);
}

inline std::vector<double> counting_ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : x) {
            less += v < x[i];
            equal += v == x[i];
        }
        r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
}

inline Metrics metrics(const std::vector<double>& p, const std::vector<double>& y) {
    const double n = p.size();
    double mean_y = 0;
    for (double v : y) mean_y += v;
    mean_y /= n;
    Metrics m{};
    double res = 0, tot = 0;
    int exact = 0, w05 = 0, w10 = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        m.mae += std::abs(p[i] - y[i]) / n;
        res += (p[i] - y[i]) * (p[i] - y[i]);
        tot += (y[i] - mean_y) * (y[i] - mean_y);
        const double gap = std::abs(nearest_band(p[i]) - y[i]);
        exact += gap == 0;
        w05 += gap <= 0.5;
        w10 += gap <= 1.0;
    }
    m.r2 = 1 - res / tot;
    m.exact_pct = 100.0 * exact / n;
    m.within05_pct = 100.0 * w05 / n;
    m.within10_pct = 100.0 * w10 / n;
    m.pearson = textbook_pearson(p, y);
    if (m.pearson) m.spearman = textbook_pearson(counting_ranks(p), counting_ranks(y));
    return m;
}

inline std::array<std::array<std::size_t, 17>, 17> confusion(const std::vector<double>& p, const std::vector<double>& y) {
    std::array<std::array<std::size_t, 17>, 17> c{};
    for (int a = 0; a < 17; ++a) {
        for (int q = 0; q < 17; ++q) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                c[a][q] += nearest_band(y[i]) == 1.0 + 0.5 * a && nearest_band(p[i]) == 1.0 + 0.5 * q;
            }
        }
    }
    return c;
}

// Random (predictions, labels) with lattice labels of nonzero variance and a
// mix of continuous, lattice, quarter-tie and constant predictions.
inline std::pair<std::vector<double>, std::vector<double>> random_case(std::mt19937_64& rng) {
    const std::size_t n = 2 + ielts::uniform_below(rng, 99);
    std::vector<double> p(n), y(n);
    do {
        for (auto& v : y) v = 1.0 + 0.5 * static_cast<double>(ielts::uniform_below(rng, 17));
    } while (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }));
    const auto mode = ielts::uniform_below(rng, 20);
    const double constant = 0.5 + 9.0 * ielts::uniform01(rng);
    for (std::size_t i = 0; i < n; ++i) {
        switch (mode) {
            case 0: p[i] = constant; break;
            case 1: case 2: case 3: p[i] = 1.0 + 0.5 * static_cast<double>(ielts::uniform_below(rng, 17)); break;
            case 4: case 5: p[i] = 0.75 + 0.5 * static_cast<double>(ielts::uniform_below(rng, 18)); break;
            default: p[i] = 0.5 + 9.0 * ielts::uniform01(rng);
        }
    }
    return {p, y};
}

// Two-sided exact signed-rank p-value by enumerating every sign pattern of
// the nonzero differences (mid-ranks for ties).
inline double wilcoxon_exact_p(const std::vector<double>& d) {
    std::vector<double> mags;
    std::vector<bool> positive;
    for (double v : d) {
        if (v != 0) {
            mags.push_back(std::abs(v));
            positive.push_back(v > 0);
        }
    }
    const auto ranks = counting_ranks(mags);
    std::vector<long> twice(ranks.size());
    long observed = 0, total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        twice[i] = std::lround(2 * ranks[i]);
        total += twice[i];
        if (positive[i]) observed += twice[i];
    }
    const long mirror = total - observed;
    const long stat = std::min(observed, mirror);
    std::uint64_t at_most = 0;
    const std::uint64_t patterns = std::uint64_t{1} << ranks.size();
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        long s = 0;
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            if (mask >> i & 1) s += twice[i];
        }
        at_most += s <= stat;
    }
    return std::min(1.0, 2.0 * static_cast<double>(at_most) / static_cast<double>(patterns));
}

}  // namespace oracle
