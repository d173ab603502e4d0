#include "ielts/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ielts/common/error.hpp"
#include "ielts/eval/metrics.hpp"

namespace ielts::eval {

namespace {

double mean(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sample_sd(std::span<const double> x, double m) {
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

constexpr std::size_t kExactLimit = 25;

}  // namespace

double t_two_sided_p(double t, double df) {
    if (!std::isfinite(t) || !(df > 0)) throw InvalidInput("t-test needs a finite statistic and positive df");
    const boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs) {
    std::vector<double> nz;
    for (double d : diffs) {
        if (!std::isfinite(d)) throw InvalidInput("non-finite difference");
        if (d != 0.0) nz.push_back(d);
    }
    if (nz.empty()) throw InvalidInput("all differences are zero");
    std::vector<double> mags(nz.size());
    std::transform(nz.begin(), nz.end(), mags.begin(), [](double d) { return std::abs(d); });
    const auto ranks = average_ranks(mags);

    WilcoxonResult r;
    r.n = nz.size();
    for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
    const double n = static_cast<double>(r.n);

    if (r.n <= kExactLimit) {
        // Mid-ranks are multiples of 0.5, so doubled ranks are integers.
        std::vector<std::size_t> twice(r.n);
        std::size_t total = 0;
        for (std::size_t i = 0; i < r.n; ++i) total += twice[i] = static_cast<std::size_t>(std::lround(2 * ranks[i]));
        std::vector<double> ways(total + 1, 0.0);
        ways[0] = 1.0;
        for (auto w : twice) {
            for (std::size_t s = total; s >= w; --s) {
                ways[s] += ways[s - w];
                if (s == w) break;
            }
        }
        const auto observed = static_cast<std::size_t>(std::lround(2 * r.w_plus));
        const double all = std::ldexp(1.0, static_cast<int>(r.n));
        double lower = 0, upper = 0;
        for (std::size_t s = 0; s <= total; ++s) {
            if (s <= observed) lower += ways[s];
            if (s >= observed) upper += ways[s];
        }
        r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        r.exact = true;
        return r;
    }

    std::map<double, std::size_t> ties;
    for (double m : mags) ++ties[m];
    double tie_term = 0;
    for (const auto& [v, t] : ties) {
        (void)v;
        const double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    const double mu = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    const double z = std::max(0.0, std::abs(r.w_plus - mu) - 0.5) / std::sqrt(var);
    const boost::math::normal_distribution<double> normal;
    r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(normal, z)));
    r.exact = false;
    return r;
}

StatsReport paired_tests(std::span<const double> before, std::span<const double> after, double alpha) {
    if (before.size() != after.size()) throw InvalidInput("paired samples differ in length");
    if (before.size() < 2) throw InvalidInput("paired tests need at least two pairs");
    if (!(alpha > 0 && alpha < 1)) throw InvalidInput("alpha must lie in (0, 1)");
    std::vector<double> d(before.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(before[i]) || !std::isfinite(after[i])) throw InvalidInput("non-finite score");
        d[i] = after[i] - before[i];
    }
    StatsReport s;
    s.n_pairs = d.size();
    s.alpha = alpha;
    s.mean_before = mean(before);
    s.sd_before = sample_sd(before, s.mean_before);
    s.mean_after = mean(after);
    s.sd_after = sample_sd(after, s.mean_after);
    s.mean_delta = mean(d);
    s.sd_delta = sample_sd(d, s.mean_delta);
    if (!(s.sd_delta > 0)) throw InvalidInput("zero-variance differences");

    std::size_t up = 0, down = 0;
    for (double x : d) {
        up += x > 0;
        down += x < 0;
    }
    const double n = static_cast<double>(s.n_pairs);
    s.pct_improved = 100.0 * static_cast<double>(up) / n;
    s.pct_worsened = 100.0 * static_cast<double>(down) / n;
    s.pct_unchanged = 100.0 - s.pct_improved - s.pct_worsened;

    s.t_stat = s.mean_delta / (s.sd_delta / std::sqrt(n));
    s.p_t = t_two_sided_p(s.t_stat, n - 1);
    s.wilcoxon = wilcoxon_signed_rank(d);
    s.cohens_d_paired = s.mean_delta / s.sd_delta;
    return s;
}

nlohmann::json StatsReport::to_json() const {
    return {{"n_pairs", n_pairs},
            {"mean_before", mean_before},
            {"sd_before", sd_before},
            {"mean_after", mean_after},
            {"sd_after", sd_after},
            {"mean_delta", mean_delta},
            {"sd_delta", sd_delta},
            {"pct_improved", pct_improved},
            {"pct_worsened", pct_worsened},
            {"pct_unchanged", pct_unchanged},
            {"t_stat", t_stat},
            {"df", n_pairs - 1},
            {"p_t", p_t},
            {"p_wilcoxon", wilcoxon.p},
            {"wilcoxon",
             {{"w_plus", wilcoxon.w_plus},
              {"w_minus", wilcoxon.w_minus},
              {"n_nonzero", wilcoxon.n},
              {"method", wilcoxon.exact ? "exact" : "normal"}}},
            {"cohens_d_paired", cohens_d_paired},
            {"alpha", alpha},
            {"significant_t", p_t < alpha},
            {"significant_wilcoxon", wilcoxon.p < alpha}};
}

}  // namespace ielts::eval
