#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <json.hpp>

namespace ielts::eval {

struct WilcoxonResult {
    double w_plus = 0;
    double w_minus = 0;
    std::size_t n = 0;  // nonzero differences
    double p = 1;       // two-sided
    bool exact = true;
};

// Signed-rank test on paired differences. Zeros are dropped and tied
// magnitudes share their mean rank. Up to 25 nonzero differences the null
// distribution is enumerated exactly (with the observed mid-ranks); above
// that a tie-corrected normal approximation with continuity correction is
// used. Throws InvalidInput when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs);

// Two-sided p-value of Student's t with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

struct StatsReport {
    std::size_t n_pairs = 0;
    double mean_before = 0, sd_before = 0;
    double mean_after = 0, sd_after = 0;
    double mean_delta = 0, sd_delta = 0;
    double pct_improved = 0, pct_worsened = 0, pct_unchanged = 0;
    double t_stat = 0;
    double p_t = 1;
    WilcoxonResult wilcoxon;
    double cohens_d_paired = 0;
    double alpha = 0.05;

    double p_wilcoxon() const { return wilcoxon.p; }
    nlohmann::json to_json() const;
};

// diffs = after - before. Sample standard deviations throughout. Throws
// InvalidInput for fewer than two pairs, mismatched lengths, or
// zero-variance differences.
StatsReport paired_tests(std::span<const double> before, std::span<const double> after, double alpha = 0.05);

}  // namespace ielts::eval
