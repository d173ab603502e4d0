// Acceptance runner: one PASS/FAIL line per primary criterion.
//   ielts_acceptance            run all
//   ielts_acceptance --only 6   run one
//   ielts_acceptance --list
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"
#include "ielts/corpus/band.hpp"
#include "ielts/corpus/csv.hpp"
#include "ielts/corpus/dataset.hpp"
#include "ielts/corpus/split.hpp"
#include "ielts/eval/metrics.hpp"
#include "ielts/eval/stats.hpp"
#include "ielts/neural/registry.hpp"
#include "ielts/neural/trainer.hpp"
#include "ielts/persona/persona.hpp"
#include "ielts/rubric/rule_scorer.hpp"
#include "ielts/service/http.hpp"
#include "ielts/service/platform.hpp"
#include "ielts/synth/generator.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace ielts;
using nlohmann::json;

namespace {

// Pinned tolerances.
constexpr double kMetricTol = 1e-9;
constexpr double kOracleSeconds = 10.0;
constexpr double kTargetT = 2.714, kTargetD = 0.4955, kStatTol = 0.005;
constexpr double kDeskMae = 0.85, kDeskR2 = 0.15, kDeskSpearman = 0.45;
constexpr std::size_t kDeskTrain = 1200, kDeskTest = 200;
constexpr double kGradTol = 1e-4;
constexpr double kLatencyP95 = 2.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

neural::EncoderConfig mini_encoder(std::size_t max_tokens = 128, int frozen = 4) {
    neural::EncoderConfig e;
    e.encoder_id = "mini";
    e.max_tokens = max_tokens;
    e.frozen_layer_count = frozen;
    return e;
}

neural::TrainConfig mini_regime(int epochs, std::uint64_t seed = 11) {
    neural::TrainConfig c;
    c.learning_rate = 2e-3;
    c.max_epochs = epochs;
    c.patience = 5;
    c.target_jitter_sigma = 0.0;
    c.seed = seed;
    return c;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    double worst = 0;
    std::size_t mismatches = 0, with_corr = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto [p, y] = oracle::random_case(rng);
        const auto m = eval::compute_metrics(p, y);
        const auto o = oracle::metrics(p, y);
        auto cmp = [&](double a, double b) {
            worst = std::max(worst, std::abs(a - b));
            if (!(std::abs(a - b) <= kMetricTol)) ++mismatches;
        };
        cmp(m.mae, o.mae);
        cmp(m.r2, o.r2);
        cmp(m.exact_pct, o.exact_pct);
        cmp(m.within05_pct, o.within05_pct);
        cmp(m.within10_pct, o.within10_pct);
        if (m.pearson_r.has_value() != o.pearson.has_value() || m.spearman_rho.has_value() != o.spearman.has_value()) {
            ++mismatches;
        } else if (o.pearson) {
            ++with_corr;
            cmp(*m.pearson_r, *o.pearson);
            cmp(*m.spearman_rho, *o.spearman);
        }
        if (eval::confusion(p, y).counts != oracle::confusion(p, y)) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < kOracleSeconds,
            fmt("1000 vectors (%zu with correlations), %zu mismatches, max |diff| %.3g, %.2f s", with_corr, mismatches,
                worst, secs)};
}

Outcome statistical_fidelity() {
    std::mt19937_64 rng(30);
    std::vector<double> z(30);
    for (auto& v : z) v = normal01(rng);
    const double m = mean_of(z), s = sd_of(z);
    std::vector<double> before(30), after(30);
    for (int i = 0; i < 30; ++i) {
        before[i] = 5.0 + 0.5 * static_cast<double>(i % 6);
        after[i] = before[i] + 0.06015 + 0.12139 * (z[i] - m) / s;
    }
    const auto r = eval::paired_tests(before, after);
    const std::vector<double> d8 = {-1.5, 2.1, 3.0, 4.2, -0.6, 5.3, 6.1, 0.9};
    const auto w = eval::wilcoxon_signed_rank(d8);
    const double enumerated = oracle::wilcoxon_exact_p(d8);
    const bool ok = std::abs(r.t_stat - kTargetT) <= kStatTol && std::abs(r.cohens_d_paired - kTargetD) <= kStatTol &&
                    w.exact && w.p == enumerated;
    return {ok, fmt("t %.4f (target %.3f), d %.4f (target %.4f), p_t %.5f; Wilcoxon 8 pairs p %.7f vs enumeration %.7f",
                    r.t_stat, kTargetT, r.cohens_d_paired, kTargetD, r.p_t, w.p, enumerated)};
}

Outcome ta_scaling() {
    const rubric::RuleScorer scorer;
    const auto& analyzer = text::TextAnalyzer::builtin();
    std::mt19937_64 rng(91);
    std::size_t violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto e = synth::generate_one(uniform01(rng), 5000 + i, "ta" + std::to_string(i)).record;
        const auto a = analyzer.analyze(e.body);
        const auto task = rubric::TaskSpec::from_prompt(e.prompt, 250);
        auto f = a.features;
        f.word_count = 100000;
        const double base = scorer.score_ta(f, a.tokens, task);
        double prev = -1;
        for (int wc = 0; wc <= 600; wc += 1 + static_cast<int>(uniform_below(rng, 25))) {
            f.word_count = wc;
            const double s = scorer.score_ta(f, a.tokens, task);
            if (s < prev) ++violations;
            if (wc >= 250 && s != base) ++violations;
            prev = s;
        }
    }
    const double example = scorer.scale_ta(7.0, 125, 250);
    return {violations == 0 && example == 3.5,
            fmt("1000 essays, %zu violations; wc 125 at base 7.0 gives %.17g", violations, example)};
}

Outcome band_lattice() {
    std::size_t bad = 0, points = 0;
    for (int i = 0; i <= 1000; ++i) {
        const double x = i / 100.0;
        const double b = corpus::round_to_band(x).value();
        ++points;
        const bool on_lattice = b >= 1.0 && b <= 9.0 && std::fmod(b * 2.0, 1.0) == 0.0;
        const bool idempotent = corpus::round_to_band(b).value() == b;
        const bool nearest = b == oracle::nearest_band(x);
        if (!on_lattice || !idempotent || !nearest) ++bad;
    }
    for (int k = 0; k < corpus::kBandCount; ++k) {
        const auto b = corpus::band_at(k);
        if (b.index() != k || corpus::round_to_band(b.value()).value() != b.value()) ++bad;
    }
    return {bad == 0, fmt("%zu grid points on [0, 10] plus 17 lattice points, %zu failures", points, bad)};
}

std::vector<corpus::EssayRecord> external_corpus() {
    const char* path = std::getenv("IELTS_CORPUS");
    if (!path || !*path) return {};
    return corpus::load_dataset(path);
}

Outcome rule_compression() {
    std::vector<std::pair<std::string, std::vector<corpus::EssayRecord>>> corpora;
    corpora.emplace_back("synthetic", synth::generate_records({400, 2718, "cmp"}));
    if (auto ext = external_corpus(); !ext.empty()) corpora.emplace_back("IELTS_CORPUS", std::move(ext));

    const scoring::EssayScorer scorer(nullptr, text::BuiltinGrammarBackend::shared_default());
    bool ok = true;
    std::string detail;
    for (const auto& [name, records] : corpora) {
        std::vector<double> labels, bands;
        for (const auto& r : records) {
            if (!r.label) continue;
            labels.push_back(r.label->value());
            bands.push_back(corpus::round_to_band(scorer.raw_score(r.body, r.prompt)).value());
        }
        const double ls = sd_of(labels), bs = sd_of(bands);
        if (ls >= 1.0) {
            ok = ok && bs < ls;
        } else {
            ok = false;
        }
        detail += fmt("%s%s n=%zu: label sd %.3f, rule band sd %.3f%s", detail.empty() ? "" : "; ", name.c_str(),
                      labels.size(), ls, bs, ls >= 1.0 ? "" : " (label sd below 1.0, not applicable)");
    }
    return {ok, detail};
}

Outcome desk_scale() {
    const char* encoder = std::getenv("IELTS_ENCODER");
    auto records = external_corpus();
    if (records.empty() || !encoder || !*encoder) {
        // Proxy on synthetic data with the seeded mini encoder; reported, never a pass.
        const auto t0 = std::chrono::steady_clock::now();
        const auto recs = synth::generate_records({1720, 4242, "desk"});
        const auto split = corpus::split_dataset(recs, {0.70, 0.15, 0.15, 7});
        const auto res = neural::train(split.train, split.val, mini_encoder(), mini_regime(4),
                                       text::TextAnalyzer::builtin());
        const scoring::EssayScorer nn(std::make_shared<const neural::HybridModel>(res.model),
                                      text::BuiltinGrammarBackend::shared_default());
        const scoring::EssayScorer rule(nullptr, text::BuiltinGrammarBackend::shared_default());
        std::vector<double> pn, pr, y;
        for (const auto& r : split.test) {
            pn.push_back(nn.raw_score(r.body, r.prompt));
            pr.push_back(rule.raw_score(r.body, r.prompt));
            y.push_back(r.label->value());
        }
        const auto mn = eval::compute_metrics(pn, y);
        const auto mr = eval::compute_metrics(pr, y);
        return {false,
                fmt("no public IELTS corpus and pretrained encoder (set IELTS_CORPUS and IELTS_ENCODER); synthetic "
                    "proxy %zu/%zu, mini encoder: MAE %.3f, R2 %.3f, Spearman %.3f, rule MAE %.3f, %.0f s",
                    split.train.size(), split.test.size(), mn.mae, mn.r2, mn.spearman_rho.value_or(NAN), mr.mae,
                    seconds_since(t0))};
    }

    const auto bundle = neural::resolve_encoder(encoder);
    if (!bundle->has_weights) return {false, fmt("encoder '%s' has no pretrained weights", encoder)};
    std::erase_if(records, [](const corpus::EssayRecord& r) { return !r.label; });
    const auto split = corpus::split_dataset(records, {0.70, 0.15, 0.15, 42});
    if (split.train.size() < kDeskTrain || split.test.size() < kDeskTest) {
        return {false, fmt("corpus too small: %zu train / %zu test", split.train.size(), split.test.size())};
    }
    const auto t0 = std::chrono::steady_clock::now();
    neural::EncoderConfig enc;
    enc.encoder_id = encoder;
    enc.max_tokens = 256;
    enc.frozen_layer_count = 2;
    const neural::TrainConfig cfg;  // lr 1.5e-5, wd 0.02, dropout 0.35, patience 5
    const auto res = neural::train(split.train, split.val, enc, cfg, text::TextAnalyzer::builtin());
    const scoring::EssayScorer nn(std::make_shared<const neural::HybridModel>(res.model),
                                  text::BuiltinGrammarBackend::shared_default());
    const scoring::EssayScorer rule(nullptr, text::BuiltinGrammarBackend::shared_default());
    std::vector<double> pn, pr, y;
    for (const auto& r : split.test) {
        pn.push_back(nn.raw_score(r.body, r.prompt));
        pr.push_back(rule.raw_score(r.body, r.prompt));
        y.push_back(r.label->value());
    }
    const auto mn = eval::compute_metrics(pn, y);
    const auto mr = eval::compute_metrics(pr, y);
    const double rho = mn.spearman_rho.value_or(-1.0);
    const bool ok = mn.mae <= kDeskMae && mn.r2 > kDeskR2 && rho >= kDeskSpearman && mn.mae < mr.mae;
    return {ok, fmt("%zu train / %zu test: MAE %.3f, R2 %.3f, Spearman %.3f, rule MAE %.3f, best epoch %d, %.0f s",
                    split.train.size(), split.test.size(), mn.mae, mn.r2, rho, mr.mae, res.history.best_epoch,
                    seconds_since(t0))};
}

Outcome training_contracts() {
    // Head gradient against central differences.
    std::mt19937_64 rng(5);
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
        neural::RegressionHead head;
        head.weight = Eigen::VectorXd(16);
        Eigen::VectorXd x(16);
        for (int i = 0; i < 16; ++i) {
            head.weight[i] = normal01(rng);
            x[i] = normal01(rng);
        }
        head.bias = normal01(rng);
        const double y = 6.0 + normal01(rng);
        auto loss = [&](const neural::RegressionHead& h) {
            const double d = h.forward(x) - y;
            return d * d;
        };
        Eigen::VectorXd gw = Eigen::VectorXd::Zero(16);
        double gb = 0;
        head.backward(x, 2.0 * (head.forward(x) - y), gw, gb);
        const double eps = 1e-6;
        for (int i = 0; i <= 16; ++i) {
            auto hp = head, hm = head;
            if (i < 16) {
                hp.weight[i] += eps;
                hm.weight[i] -= eps;
            } else {
                hp.bias += eps;
                hm.bias -= eps;
            }
            const double fd = (loss(hp) - loss(hm)) / (2 * eps);
            const double an = i < 16 ? gw[i] : gb;
            worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
        }
    }

    // Early stopping returns the minimum-val-MAE checkpoint.
    neural::EarlyStopping es(5);
    const double maes[] = {1.0, 0.9, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.6, 0.56, 0.58, 0.57, 0.555, 0.5};
    int stopped = 0;
    for (int e = 1; e <= 14 && !stopped; ++e) {
        es.update(e, maes[e - 1]);
        if (es.should_stop()) stopped = e;
    }
    const auto recs = synth::generate_records({70, 99, "nn"});
    const std::vector<corpus::EssayRecord> tr(recs.begin(), recs.begin() + 50), va(recs.begin() + 50, recs.end());
    const auto& analyzer = text::TextAnalyzer::builtin();
    auto cfg = mini_regime(5);
    cfg.patience = 2;
    const auto run = neural::train(tr, va, mini_encoder(128, 2), cfg, analyzer);
    bool best_ok = std::abs(neural::evaluate_mae(run.model, va, analyzer) - run.history.best_val_mae) <= 1e-12;
    for (const auto& e : run.history.epochs) best_ok = best_ok && run.history.best_val_mae <= e.val_mae;
    const bool smoke = run.history.epochs.back().train_mae < run.history.epochs.front().train_mae;

    // Learning rate 0 leaves every weight unchanged.
    auto zero = mini_regime(3);
    zero.learning_rate = 0.0;
    const auto z3 = neural::train(tr, va, mini_encoder(128, 2), zero, analyzer);
    zero.max_epochs = 1;
    const auto z1 = neural::train(tr, va, mini_encoder(128, 2), zero, analyzer);
    auto pristine = z3.model;
    pristine.encoder = neural::resolve_encoder("mini")->load_weights();
    const bool frozen = z3.model.weights_digest() == z1.model.weights_digest() &&
                        z3.model.weights_digest() == pristine.weights_digest() &&
                        z3.history.epochs.front().val_mae == z3.history.epochs.back().val_mae;

    const bool ok = worst < kGradTol && stopped == 13 && es.best_epoch() == 8 && best_ok && smoke && frozen;
    return {ok, fmt("head grad rel err %.2e; early stop at %d with best epoch %d; returned checkpoint %s; smoke train "
                    "MAE %.4f -> %.4f over %zu epochs; lr 0 weights %s",
                    worst, stopped, es.best_epoch(), best_ok ? "is the minimum" : "NOT the minimum",
                    run.history.epochs.front().train_mae, run.history.epochs.back().train_mae,
                    run.history.epochs.size(), frozen ? "unchanged" : "CHANGED")};
}

std::size_t paragraphs_of(std::string_view text) {
    std::size_t n = 0;
    bool inside = false;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        const bool blank = line.find_first_not_of(" \t\r\f\v") == std::string::npos;
        if (!blank && !inside) ++n;
        inside = !blank;
    }
    return n;
}

// A mini model trained on synthetic essays, saved and reloaded from disk.
std::shared_ptr<const neural::HybridModel> frozen_model(const std::filesystem::path& artifact) {
    const auto recs = synth::generate_records({150, 808, "fit"});
    const std::vector<corpus::EssayRecord> tr(recs.begin(), recs.begin() + 120), va(recs.begin() + 120, recs.end());
    auto res = neural::train(tr, va, mini_encoder(), mini_regime(4), text::TextAnalyzer::builtin());
    res.model.save(artifact);
    return std::make_shared<const neural::HybridModel>(neural::HybridModel::load(artifact));
}

Outcome persona_integrity() {
    test_util::TempDir dir;
    const auto model = frozen_model(dir / "model.safetensors");
    const scoring::EssayScorer scorer(model, text::BuiltinGrammarBackend::shared_default());

    persona::ExperimentSpec spec;
    spec.essays = synth::generate_records({30, 1234, "held"});
    spec.seed = 42;
    for (const auto* ids : {&model->data_ids.train, &model->data_ids.val, &model->data_ids.test}) {
        spec.excluded_ids.insert(spec.excluded_ids.end(), ids->begin(), ids->end());
    }
    const auto digest = scorer.model_digest();
    const auto a = persona::run_experiment(spec, scorer);
    const auto b = persona::run_experiment(spec, scorer);

    std::map<std::string, int> per;
    for (const auto& r : a.results) ++per[r.persona_id];
    bool six = per.size() == 5;
    for (const auto& [id, n] : per) six = six && n == 6;
    const bool hash_ok = a.model_digest_before == digest && a.model_digest_after == digest &&
                         b.model_digest_after == digest && scorer.model_digest() == digest;
    const bool repro = a.stats && b.stats && a.stats->to_json() == b.stats->to_json() &&
                       a.summary_json() == b.summary_json();

    std::map<std::string, const corpus::EssayRecord*> originals;
    for (const auto& e : spec.essays) originals[e.id] = &e;
    const auto& lexicon = scorer.analyzer().lexicon();
    std::size_t broken = 0;
    for (const auto& r : a.results) {
        const auto& before = originals.at(r.essay_id)->body;
        const auto applied = std::count_if(r.edits_applied.begin(), r.edits_applied.end(),
                                           [](const persona::AuditEntry& e) { return e.outcome == "applied"; });
        if ((r.persona_id == "P1" || r.persona_id == "P5") && paragraphs_of(before) != paragraphs_of(r.revised_text)) {
            ++broken;
        }
        if (r.persona_id == "P3" && applied > 2) ++broken;
        if (r.persona_id == "P4") {
            const auto old_words = persona::out_of_lexicon_words(before, lexicon);
            const std::set<std::string> known(old_words.begin(), old_words.end());
            for (const auto& w : persona::out_of_lexicon_words(r.revised_text, lexicon)) broken += !known.count(w);
        }
    }

    // Surface fixes at full compliance, scored by the grammar-driven rule scorer.
    const scoring::EssayScorer rule(nullptr, text::BuiltinGrammarBackend::shared_default());
    auto full = spec;
    full.personas = persona::personas_with_compliance(1.0);
    full.excluded_ids.clear();
    const auto rule_run = persona::run_experiment(full, rule);
    const auto neural_run = persona::run_experiment(full, scorer);
    auto p1_mean = [](const persona::ExperimentResult& r) -> double {
        for (const auto& s : r.personas) {
            if (s.persona_id == "P1") return s.delta_mean;
        }
        return NAN;
    };
    const double p1_rule = p1_mean(rule_run), p1_neural = p1_mean(neural_run);

    const bool ok = six && hash_ok && repro && broken == 0 && p1_rule >= 0.0;
    std::string table;
    for (const auto& s : a.personas) table += fmt(" %s %+.3f", s.persona_id.c_str(), s.delta_mean);
    return {ok, fmt("30 essays, 6 per persona: %s; model hash %s; seed rerun %s; %zu constraint breaches; P1 at "
                    "compliance 1.0 mean delta %+.4f (rule), %+.4f (neural, not gated); directional: mean delta %+.4f, "
                    "%.1f%% improved, p_t %.4f;%s",
                    six ? "yes" : "NO", hash_ok ? "unchanged" : "CHANGED", repro ? "identical" : "DIFFERS", broken,
                    p1_rule, p1_neural, a.stats ? a.stats->mean_delta : NAN, a.stats ? a.stats->pct_improved : NAN,
                    a.stats ? a.stats->p_t : NAN, table.c_str())};
}

std::string essay_text(double q, std::uint64_t seed) {
    return synth::generate_one(q, seed, "s" + std::to_string(seed)).record.body;
}

Outcome service_contracts() {
    test_util::TempDir dir;
    const auto artifact = dir / "model.safetensors";
    const auto model = frozen_model(artifact);
    const scoring::EssayScorer scorer(model, text::BuiltinGrammarBackend::shared_default());
    const auto tasks = service::load_tasks(data_file("tasks.json"));
    const auto db = dir / "platform.db";
    std::vector<std::string> notes;

    // Two racing final attempts through two stores on one database file.
    int race_wins = 0, race_rounds = 0;
    {
        service::Platform a(std::make_shared<service::SqliteStore>(db), scorer, tasks);
        service::Platform b(std::make_shared<service::SqliteStore>(db), scorer, tasks);
        for (int round = 0; round < 5; ++round) {
            const auto s = a.create_session({"Ana", 24, std::nullopt, std::nullopt});
            a.submit(s.id, essay_text(0.5, 1));
            b.submit(s.id, essay_text(0.5, 2));
            std::atomic<int> ok{0};
            auto go = [&](service::Platform& p, std::uint64_t seed) {
                try {
                    p.submit(s.id, essay_text(0.5, seed));
                    ++ok;
                } catch (const AttemptLimitReached&) {
                }
            };
            std::thread t1(go, std::ref(a), 3), t2(go, std::ref(b), 4);
            t1.join();
            t2.join();
            ++race_rounds;
            race_wins += ok == 1 && a.session(s.id).attempts_remaining == 0 && b.submissions(s.id).size() == 3;
        }
    }
    const bool race_ok = race_wins == race_rounds;

    // Restart: a fresh platform on the same file sees identical progress.
    std::string sid;
    json before;
    {
        service::Platform p(std::make_shared<service::SqliteStore>(db), scorer, tasks);
        sid = p.create_session({"Bo", 31, std::nullopt, std::nullopt}).id;
        p.submit(sid, essay_text(0.3, 10));
        p.submit(sid, essay_text(0.7, 11));
        before = {service::progress_to_json(p.progress(sid)), p.submissions(sid).back().to_json()};
    }
    service::Platform reopened(std::make_shared<service::SqliteStore>(db), scorer, tasks);
    const json after = {service::progress_to_json(reopened.progress(sid)), reopened.submissions(sid).back().to_json()};
    const bool restart_ok = before == after && reopened.session(sid).attempts_remaining == 1;

    // Pipeline identity with the offline score command.
    service::Platform live(std::make_shared<service::SqliteStore>(":memory:"), scorer, tasks);
    std::vector<std::pair<std::string, double>> served;
    std::vector<corpus::EssayRecord> offline_in;
    for (int i = 0; i < 6; ++i) {
        const auto s = live.create_session({"Cy", 40, std::nullopt, std::nullopt});
        const auto text = essay_text(0.15 * i + 0.1, 200 + i);
        served.emplace_back("x" + std::to_string(i), live.submit(s.id, text).record.raw);
        offline_in.push_back({"x" + std::to_string(i), tasks.front().prompt, text, std::nullopt});
    }
    corpus::write_dataset_csv(dir / "in.csv", offline_in);
    const std::string cmd = std::string("\"") + IELTS_CLI + "\" score --model \"" + artifact.string() + "\" --in \"" +
                            (dir / "in.csv").string() + "\" --out \"" + (dir / "out.csv").string() +
                            "\" --required-words 250 > /dev/null 2>&1";
    bool identical = std::system(cmd.c_str()) == 0;
    std::size_t compared = 0;
    if (identical) {
        const auto rows = corpus::parse_csv(test_util::read(dir / "out.csv"));
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& f = rows[i].fields;
            const auto it = std::find_if(served.begin(), served.end(), [&](const auto& s) { return s.first == f[0]; });
            identical = identical && it != served.end() && std::strtod(f[1].c_str(), nullptr) == it->second;
            ++compared;
        }
        identical = identical && compared == served.size();
    }

    // p95 latency over HTTP with the model preloaded.
    service::HttpService http(live);
    const int port = http.start();
    httplib::Client client("127.0.0.1", port);
    std::vector<double> secs;
    for (int i = 0; i < 10; ++i) {
        auto res = client.Post("/sessions", json{{"name", "Di"}, {"age", 22}}.dump(), "application/json");
        if (!res) break;
        const auto id = json::parse(res->body)["id"].get<std::string>();
        for (int k = 0; k < 3; ++k) {
            const auto body = json{{"text", essay_text(0.1 * i, 300 + 3 * i + k)}}.dump();
            const auto t0 = std::chrono::steady_clock::now();
            auto r = client.Post("/sessions/" + id + "/submissions", body, "application/json");
            if (r && r->status == 201) secs.push_back(seconds_since(t0));
        }
    }
    http.stop();
    std::sort(secs.begin(), secs.end());
    const double p95 = secs.empty() ? INFINITY : secs[static_cast<std::size_t>(0.95 * (secs.size() - 1))];
    const bool latency_ok = secs.size() == 30 && p95 <= kLatencyP95;

    return {race_ok && restart_ok && identical && latency_ok,
            fmt("race: exactly one winner in %d/%d rounds; restart round trip %s; offline score CLI bit-identical on "
                "%zu/%zu essays; p95 latency %.4f s over %zu submissions (mini encoder)",
                race_wins, race_rounds, restart_ok ? "equal" : "DIFFERS", identical ? compared : 0, served.size(), p95,
                secs.size())};
}

Outcome dialogue_machine() {
    using S = service::DialogueStage;
    const auto graph = service::check_dialogue_graph();
    const auto& replies = service::ReplyCatalog::default_catalog();
    const std::vector<std::pair<std::string, S>> script = {
        {"hello", S::ask_name}, {"My name is Ana", S::ask_age}, {"24", S::offer_exercise},
        {"yes", S::section_select}, {"introduction", S::writing}};
    service::DialogueState st;
    std::vector<std::string> path = {std::string(service::to_string(st.stage))};
    bool scripted = true;
    for (const auto& [input, expected] : script) {
        const auto r = service::dialogue_step(st, input, replies);
        scripted = scripted && r.next.stage == expected && !r.reply.empty();
        st = r.next;
        path.push_back(std::string(service::to_string(st.stage)));
    }
    scripted = scripted && st.name == "Ana" && st.age == 24 && st.section == service::Section::introduction;
    std::string joined;
    for (const auto& p : path) joined += (joined.empty() ? "" : " > ") + p;
    return {graph.ok() && scripted, fmt("%zu unreachable, %zu dead ends; scripted path %s %s", graph.unreachable.size(),
                                        graph.dead_ends.size(), joined.c_str(), scripted ? "ok" : "BROKEN")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list = {
        {1, "metric-oracle-equivalence", metric_oracle},
        {2, "statistical-test-fidelity", statistical_fidelity},
        {3, "ta-scaling-property", ta_scaling},
        {4, "band-lattice-property", band_lattice},
        {5, "rule-scorer-compression", rule_compression},
        {6, "neural-training-desk-scale", desk_scale},
        {7, "training-loop-contracts", training_contracts},
        {8, "persona-experiment-integrity", persona_integrity},
        {9, "service-contracts", service_contracts},
        {10, "dialogue-machine", dialogue_machine},
    };
    return list;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else if (!std::strcmp(argv[i], "--list")) {
            for (const auto& c : criteria()) std::cout << c.id << " " << c.name << "\n";
            return 0;
        } else {
            std::cerr << "usage: " << argv[0] << " [--only N] [--list]\n";
            return 2;
        }
    }
    int failed = 0, ran = 0;
    for (const auto& c : criteria()) {
        if (only && c.id != only) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << fmt("%02d ", c.id) << c.name
                  << fmt(" (%.1f s): ", seconds_since(t0)) << o.detail << std::endl;
    }
    if (!ran) {
        std::cerr << "no criterion " << only << "\n";
        return 2;
    }
    return failed ? 1 : 0;
}
