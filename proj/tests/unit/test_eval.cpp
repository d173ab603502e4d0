#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include "ielts/common/error.hpp"
#include "ielts/eval/metrics.hpp"
#include "ielts/eval/report.hpp"
#include "ielts/eval/stats.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace ielts;
using namespace ielts::eval;

TEST_CASE("perfect predictor") {
    const std::vector<double> y = {5.0, 6.5, 7.0, 8.0};
    const auto m = compute_metrics(y, y);
    CHECK(m.mae == 0.0);
    CHECK(m.r2 == 1.0);
    CHECK(*m.pearson_r == doctest::Approx(1.0));
    CHECK(*m.spearman_rho == doctest::Approx(1.0));
    CHECK(m.exact_pct == 100.0);
    CHECK(m.within05_pct == 100.0);
    CHECK(m.within10_pct == 100.0);
    CHECK(m.n == 4);
}

TEST_CASE("mean predictor has zero R² and no correlation") {
    const std::vector<double> y = {5.0, 6.5, 7.0, 8.0};
    const std::vector<double> p(4, 6.625);
    const auto m = compute_metrics(p, y);
    CHECK(m.r2 == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(m.pearson_r.has_value());
    CHECK_FALSE(m.spearman_rho.has_value());
    CHECK(m.to_json()["pearson_r"].is_null());
}

TEST_CASE("three-pair example against the oracle") {
    const std::vector<double> p = {5, 6, 7}, y = {5.5, 6.5, 6.5};
    const auto m = compute_metrics(p, y);
    const auto o = oracle::metrics(p, y);
    CHECK(m.mae == 0.5);
    CHECK(m.within05_pct == 100.0);
    // No rounded prediction equals its label: 5 vs 5.5, 6 vs 6.5, 7 vs 6.5.
    CHECK(o.exact_pct == 0.0);
    CHECK(m.exact_pct == o.exact_pct);
}

TEST_CASE("metric errors") {
    const std::vector<double> a = {1, 2}, b = {3, 3}, c = {1};
    CHECK_THROWS_AS(compute_metrics(a, b), InvalidInput);
    CHECK_THROWS_AS(compute_metrics(a, c), InvalidInput);
    CHECK_THROWS_AS(compute_metrics({}, {}), InvalidInput);
    CHECK_THROWS_AS(pearson(b, a), InvalidInput);
    const std::vector<double> bad = {1, NAN};
    CHECK_THROWS_AS(compute_metrics(bad, a), InvalidInput);
}

TEST_CASE("metrics match the brute-force oracle on random vectors") {
    std::mt19937_64 rng(2024);
    int compared_corr = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto [p, y] = oracle::random_case(rng);
        const auto m = compute_metrics(p, y);
        const auto o = oracle::metrics(p, y);
        CHECK(std::abs(m.mae - o.mae) <= 1e-9);
        CHECK(std::abs(m.r2 - o.r2) <= 1e-9);
        CHECK(m.exact_pct == o.exact_pct);
        CHECK(m.within05_pct == o.within05_pct);
        CHECK(m.within10_pct == o.within10_pct);
        CHECK(m.exact_pct <= m.within05_pct);
        CHECK(m.within05_pct <= m.within10_pct);
        REQUIRE(m.pearson_r.has_value() == o.pearson.has_value());
        REQUIRE(m.spearman_rho.has_value() == o.spearman.has_value());
        if (o.pearson) {
            CHECK(std::abs(*m.pearson_r - *o.pearson) <= 1e-9);
            CHECK(std::abs(*m.spearman_rho - *o.spearman) <= 1e-9);
            ++compared_corr;
        }
        const auto c = confusion(p, y);
        const auto oc = oracle::confusion(p, y);
        CHECK(c.counts == oc);
        CHECK(c.n == p.size());
    }
    CHECK(compared_corr > 900);
}

TEST_CASE("correlation invariances") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        auto [p, y] = oracle::random_case(rng);
        if (!compute_metrics(p, y).pearson_r) continue;
        const double r = pearson(p, y), rho = spearman(p, y);
        std::vector<double> affine(p.size()), monotone(p.size());
        const double a = 0.1 + 3.0 * uniform01(rng), b = 10.0 * uniform01(rng) - 5.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            affine[i] = a * p[i] + b;
            monotone[i] = std::exp(p[i]) + p[i] * p[i] * p[i];
        }
        CHECK(pearson(affine, y) == doctest::Approx(r).epsilon(1e-9));
        CHECK(pearson(y, affine) == doctest::Approx(r).epsilon(1e-9));
        CHECK(spearman(monotone, y) == doctest::Approx(rho).epsilon(1e-12));
    }
}

TEST_CASE("confusion examples") {
    const std::vector<double> y = {5.0, 6.5, 7.0, 9.0};
    const auto c = confusion(y, y);
    for (int a = 0; a < corpus::kBandCount; ++a) {
        for (int p = 0; p < corpus::kBandCount; ++p) CHECK(c.counts[a][p] == (a == p ? (y.end() != std::find_if(y.begin(), y.end(), [&](double v) { return corpus::round_to_band(v).index() == a; })) : 0u));
    }
    const std::vector<double> p1 = {6.2}, y1 = {6.5};
    const auto one = confusion(p1, y1);
    CHECK(one.at(corpus::Band::from_lattice(6.5), corpus::Band::from_lattice(6.0)) == 1);
    CHECK(one.n == 1);
    CHECK_THROWS_AS(confusion({}, {}), InvalidInput);
}

TEST_CASE("paired t-test reproduces the reported statistic") {
    // Standardised pattern rescaled to mean 0.06015 and sample sd 0.12139.
    std::vector<double> z(30);
    for (int i = 0; i < 30; ++i) z[i] = std::sin(1.7 * i + 0.3) + 0.2 * ((i * 7) % 5);
    double m = 0, s = 0;
    for (double v : z) m += v / 30;
    for (double v : z) s += (v - m) * (v - m);
    s = std::sqrt(s / 29);
    std::vector<double> before(30), after(30);
    for (int i = 0; i < 30; ++i) {
        before[i] = 6.0 + 0.1 * (i % 7);
        after[i] = before[i] + 0.06015 + 0.12139 * (z[i] - m) / s;
    }
    const auto r = paired_tests(before, after);
    CHECK(r.mean_delta == doctest::Approx(0.06015).epsilon(1e-9));
    CHECK(r.sd_delta == doctest::Approx(0.12139).epsilon(1e-9));
    CHECK(std::abs(r.t_stat - 2.714) <= 0.005);
    CHECK(std::abs(r.cohens_d_paired - 0.4955) <= 0.005);
    // scipy.stats.t.sf reference for t = 2.714, df = 29.
    CHECK(t_two_sided_p(2.714, 29) == doctest::Approx(0.011072718773391214).epsilon(1e-10));
    CHECK(r.pct_improved + r.pct_worsened + r.pct_unchanged == doctest::Approx(100.0));
    CHECK(r.n_pairs == 30);
}

TEST_CASE("degenerate paired inputs") {
    const std::vector<double> a = {5, 6, 7};
    CHECK_THROWS_WITH_AS(paired_tests(a, a), "zero-variance differences", InvalidInput);
    const std::vector<double> shifted = {5.5, 6.5, 7.5};
    CHECK_THROWS_AS(paired_tests(a, shifted), InvalidInput);
    const std::vector<double> one = {5};
    CHECK_THROWS_AS(paired_tests(one, one), InvalidInput);
}

TEST_CASE("exact Wilcoxon matches enumeration") {
    SUBCASE("8-pair textbook case") {
        const std::vector<double> d = {-1.5, 2.1, 3.0, 4.2, -0.6, 5.3, 6.1, 0.9};
        const auto w = wilcoxon_signed_rank(d);
        CHECK(w.exact);
        CHECK(w.w_minus == 4.0);
        CHECK(w.w_plus == 32.0);
        CHECK(w.p == oracle::wilcoxon_exact_p(d));
        CHECK(w.p == 0.0546875);
    }
    SUBCASE("single negative rank") {
        const std::vector<double> d = {-1, 2, 3, 4, 5, 6, 7, 8};
        CHECK(wilcoxon_signed_rank(d).p == 0.015625);
    }
    SUBCASE("published 15-difference example") {
        const std::vector<double> d = {6, 8, 14, 16, 23, 24, 28, 29, 41, -48, 49, 56, 60, -67, 75};
        CHECK(wilcoxon_signed_rank(d).p == 0.041259765625);
    }
    SUBCASE("random cases with ties and zeros") {
        std::mt19937_64 rng(99);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 2 + uniform_below(rng, 13);
            std::vector<double> d(n);
            for (auto& x : d) x = (static_cast<double>(uniform_below(rng, 9)) - 4.0) * 0.25;
            if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0; })) continue;
            CHECK(wilcoxon_signed_rank(d).p == oracle::wilcoxon_exact_p(d));
        }
    }
}

TEST_CASE("normal approximation above 25 pairs") {
    std::vector<double> d;
    for (int i = 0; i < 30; ++i) d.push_back(static_cast<double>((i * 37) % 17 - 5) / 4.0);
    const auto w = wilcoxon_signed_rank(d);
    CHECK_FALSE(w.exact);
    CHECK(w.n == 29);
    // scipy.stats.wilcoxon(method="approx", correction=True) on the same data.
    CHECK(w.p == doctest::Approx(0.011293918081693933).epsilon(1e-9));
    CHECK(std::min(w.w_plus, w.w_minus) == 100.0);
}

TEST_CASE("paired tests are invariant under reordering and sign-consistent") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + uniform_below(rng, 40);
        std::vector<double> before(n), after(n);
        for (std::size_t i = 0; i < n; ++i) {
            before[i] = 4 + 4 * uniform01(rng);
            after[i] = before[i] + 0.25 * (static_cast<double>(uniform_below(rng, 7)) - 2.5);
        }
        std::optional<StatsReport> r;
        try {
            r = paired_tests(before, after);
        } catch (const InvalidInput&) {
            continue;
        }
        CHECK((r->mean_delta > 0) == (r->t_stat > 0));
        auto b2 = before, a2 = after;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        fisher_yates(perm, rng);
        for (std::size_t i = 0; i < n; ++i) {
            b2[i] = before[perm[i]];
            a2[i] = after[perm[i]];
        }
        const auto s = paired_tests(b2, a2);
        CHECK(s.p_t == doctest::Approx(r->p_t).epsilon(1e-12));
        CHECK(s.p_wilcoxon() == r->p_wilcoxon());
        CHECK(s.pct_improved + s.pct_worsened + s.pct_unchanged == doctest::Approx(100.0));
    }
}

TEST_CASE("report files") {
    test_util::TempDir dir;
    const std::vector<std::string> ids = {"a", "b,c", "d", "e"};
    const std::vector<double> p = {5.2, 6.4, 7.1, 5.9}, y = {5.0, 6.5, 7.5, 6.0};
    const auto m = write_benchmark(dir / "run", "neural", ids, p, y, {{"scorer", "neural"}});
    for (const char* f : {"metrics.json", "confusion.json", "predictions.csv", "scatter.svg", "box.svg", "residual.svg",
                          "confusion.svg"}) {
        CHECK(std::filesystem::exists(dir / "run" / f));
    }
    const auto j = nlohmann::json::parse(std::ifstream(dir / "run" / "metrics.json"));
    CHECK(j["scorer"] == "neural");
    CHECK(MetricsReport::from_json(j).mae == m.mae);
    CHECK(test_util::read(dir / "run" / "predictions.csv").find("\"b,c\",6.4000000000000004,6.5,6.5") !=
          std::string::npos);

    const std::vector<double> before = {6.0, 6.5, 7.0, 5.5}, after = {6.2, 6.4, 7.3, 5.9};
    const auto s = paired_tests(before, after);
    const std::vector<std::string> groups = {"P1", "P1", "P2", "P2"};
    write_paired(dir / "paired", s, before, after, groups);
    const auto h = nlohmann::json::parse(std::ifstream(dir / "paired" / "histogram.json"));
    CHECK(h["mean_delta"].get<double>() == s.mean_delta);
    std::size_t total = 0;
    for (const auto& b : h["bins"]) total += b["count"].get<std::size_t>();
    CHECK(total == 4);
    const auto first = test_util::read(dir / "paired" / "stats.json");
    write_paired(dir / "paired", s, before, after, groups);
    CHECK(test_util::read(dir / "paired" / "stats.json") == first);
    CHECK_THROWS_AS(write_json("/proc/no/such/dir/x.json", {}), IoError);
}

TEST_CASE("cycle comparison rows") {
    MetricsReport a, b;
    a.exact_pct = 13;
    a.within05_pct = 47;
    a.r2 = -0.0242;
    a.mae = 1.27;
    b.exact_pct = 17;
    b.within05_pct = 60;
    b.r2 = -0.0052;
    b.mae = 1.14;
    const auto c = compare_runs({{"cycle2", a}, {"cycle3", b}});
    std::map<std::string, double> improvement;
    for (const auto& row : c["rows"]) improvement[row["metric"]] = row["improvement"];
    CHECK(improvement.at("exact_pct") == doctest::Approx(4));
    CHECK(improvement.at("within05_pct") == doctest::Approx(13));
    CHECK(improvement.at("r2") == doctest::Approx(0.019));
    CHECK(improvement.at("mae") == doctest::Approx(0.13));
    CHECK(compare_table_markdown(c).find("| Exact Match (%) | 13.00 | 17.00 | 4.00 |") != std::string::npos);
    CHECK_THROWS_AS(compare_runs({{"x", a}}), InvalidInput);
}
