#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <pthread.h>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/corpus/csv.hpp"
#include "ielts/corpus/dataset.hpp"
#include "ielts/corpus/split.hpp"
#include "ielts/eval/report.hpp"
#include "ielts/neural/trainer.hpp"
#include "ielts/persona/persona.hpp"
#include "ielts/service/http.hpp"
#include "ielts/synth/generator.hpp"

namespace ielts::cli {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string hex_digest(std::uint64_t d) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

std::shared_ptr<const text::GrammarBackend> backend_of(const GrammarOptions& g) {
    return text::make_grammar_backend(g.backend, g.languagetool_url);
}

}  // namespace

scoring::EssayScorer make_scorer(const std::optional<fs::path>& model, const GrammarOptions& grammar) {
    std::shared_ptr<const neural::HybridModel> m;
    if (model) m = std::make_shared<const neural::HybridModel>(neural::HybridModel::load(*model));
    return scoring::EssayScorer(std::move(m), backend_of(grammar));
}

int dataset_validate(const fs::path& path, std::ostream& out, std::ostream& err) {
    const auto errors = corpus::validate_dataset(path, corpus::format_from_path(path));
    for (const auto& e : errors) err << path.string() << ": row " << e.row << ": " << e.message << "\n";
    if (!errors.empty()) {
        out << errors.size() << " invalid row(s)\n";
        return 1;
    }
    const auto records = corpus::load_dataset(path);
    std::size_t labeled = 0;
    for (const auto& r : records) labeled += r.label.has_value();
    out << "ok: " << records.size() << " records, " << labeled << " labeled\n";
    return 0;
}

int train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
    json cfg = json::object();
    if (o.config) {
        try {
            cfg = json::parse(read_file(*o.config));
        } catch (const json::exception& e) {
            throw InvalidInput(o.config->string() + ": " + e.what());
        }
    }
    const auto train_cfg = neural::TrainConfig::from_json(cfg);
    const auto enc_cfg = neural::EncoderConfig::from_json(cfg);
    corpus::SplitSpec split;
    split.seed = train_cfg.seed;
    if (cfg.contains("split")) {
        const auto& s = cfg["split"];
        split.train_frac = s.value("train_frac", split.train_frac);
        split.val_frac = s.value("val_frac", split.val_frac);
        split.test_frac = s.value("test_frac", split.test_frac);
        split.seed = s.value("seed", split.seed);
    }

    const auto records = corpus::load_dataset(o.data);
    const auto parts = corpus::split_dataset(records, split);
    err << "train " << parts.train.size() << ", val " << parts.val.size() << ", test " << parts.test.size() << "\n";

    const text::TextAnalyzer analyzer(text::FrequencyLexicon::default_lexicon(), backend_of(o.grammar));
    auto result = neural::train(parts.train, parts.val, enc_cfg, train_cfg, analyzer, [&](const neural::EpochRecord& e) {
        err << "epoch " << e.epoch << " train_mae " << e.train_mae << " val_mae " << e.val_mae;
        for (const auto& ev : e.events) err << " " << ev;
        err << "\n";
    });
    for (const auto& r : parts.test) result.model.data_ids.test.push_back(r.id);
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    result.model.save(o.out);

    json summary = {{"artifact", o.out.string()},
                    {"best_epoch", result.history.best_epoch},
                    {"best_val_mae", result.history.best_val_mae},
                    {"stopped_early", result.history.stopped_early},
                    {"weights_digest", hex_digest(result.model.weights_digest())}};
    if (!parts.test.empty()) summary["test_mae"] = neural::evaluate_mae(result.model, parts.test, analyzer);
    out << summary.dump(2) << "\n";
    return 0;
}

int score(const ScoreOptions& o, std::ostream& out, std::ostream& err) {
    const auto scorer = make_scorer(o.model, o.grammar);
    const auto records = corpus::load_dataset(o.in);
    std::string csv = "id,raw_score,band\n";
    for (const auto& r : records) {
        const double raw = scorer.raw_score(r.body, r.prompt, o.required_words);
        csv += corpus::csv_escape(r.id) + "," + fmt17(raw) + "," + fmt17(corpus::round_to_band(raw).value()) + "\n";
    }
    eval::write_text(o.out, csv);
    err << "scored " << records.size() << " essays with " << scorer.model_digest() << "\n";
    out << o.out.string() << "\n";
    return 0;
}

int benchmark(const BenchmarkOptions& o, std::ostream& out, std::ostream& err) {
    if (o.scorer != "rule" && o.scorer != "neural") throw InvalidInput("--scorer must be rule or neural");
    if (o.scorer == "neural" && !o.model) throw InvalidInput("--scorer neural needs --model");
    const auto scorer = make_scorer(o.scorer == "neural" ? o.model : std::nullopt, o.grammar);

    auto records = corpus::load_dataset(o.data);
    if (o.test_split_only) {
        if (!o.model) throw InvalidInput("--test-split needs --model");
        const auto m = neural::HybridModel::load(*o.model);
        const std::set<std::string> test(m.data_ids.test.begin(), m.data_ids.test.end());
        std::erase_if(records, [&](const corpus::EssayRecord& r) { return !test.count(r.id); });
    }
    std::erase_if(records, [](const corpus::EssayRecord& r) { return !r.label; });
    if (records.empty()) throw InvalidInput("no labeled essays to benchmark");

    std::vector<std::string> ids;
    std::vector<double> preds, labels, bands;
    for (const auto& r : records) {
        ids.push_back(r.id);
        preds.push_back(scorer.raw_score(r.body, r.prompt));
        bands.push_back(corpus::round_to_band(preds.back()).value());
        labels.push_back(r.label->value());
    }
    fs::create_directories(o.out);
    const json extra = {{"scorer", o.scorer},
                        {"model_digest", scorer.model_digest()},
                        {"band_sd", sd(bands)},
                        {"label_sd", sd(labels)}};
    const auto m = eval::write_benchmark(o.out, o.out.filename().string().empty() ? o.scorer : o.out.filename().string(),
                                         ids, preds, labels, extra);
    auto j = m.to_json();
    for (const auto& [k, v] : extra.items()) j[k] = v;
    out << j.dump(2) << "\n";
    err << "wrote " << o.out.string() << "\n";
    return 0;
}

int compare(const CompareOptions& o, std::ostream& out, std::ostream&) {
    if (o.runs.size() < 2) throw InvalidInput("compare needs at least two run directories");
    std::vector<std::pair<std::string, eval::MetricsReport>> runs;
    for (const auto& dir : o.runs) {
        json j;
        try {
            j = json::parse(read_file(dir / "metrics.json"));
        } catch (const json::exception& e) {
            throw InvalidInput((dir / "metrics.json").string() + ": " + e.what());
        }
        runs.emplace_back(j.value("name", dir.filename().string()), eval::MetricsReport::from_json(j));
    }
    const auto table = eval::compare_runs(runs);
    if (o.out) {
        if (o.out->has_parent_path()) fs::create_directories(o.out->parent_path());
        eval::write_json(*o.out, table);
    }
    out << eval::compare_table_markdown(table);
    return 0;
}

int simulate_personas(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
    const auto scorer = make_scorer(o.model, o.grammar);
    persona::ExperimentSpec spec;
    spec.seed = o.seed;
    spec.essays_per_persona = o.essays_per_persona;
    if (o.compliance) spec.personas = persona::personas_with_compliance(*o.compliance);
    if (const auto* m = scorer.model()) {
        for (const auto* ids : {&m->data_ids.train, &m->data_ids.val, &m->data_ids.test}) {
            spec.excluded_ids.insert(spec.excluded_ids.end(), ids->begin(), ids->end());
        }
    }
    const std::set<std::string> excluded(spec.excluded_ids.begin(), spec.excluded_ids.end());
    const std::size_t needed = spec.personas.size() * spec.essays_per_persona;
    std::size_t skipped = 0;
    for (auto& r : corpus::load_dataset(o.essays)) {
        if (excluded.count(r.id)) {
            ++skipped;
        } else if (spec.essays.size() < needed) {
            spec.essays.push_back(std::move(r));
        }
    }
    if (skipped) err << "skipped " << skipped << " essays seen during training\n";
    if (spec.essays.size() < needed) {
        throw InvalidInput("need " + std::to_string(needed) + " held-out essays, found " +
                           std::to_string(spec.essays.size()));
    }
    const auto result = persona::run_experiment(spec, scorer);
    persona::write_experiment(o.out, result);
    out << result.summary_json().dump(2) << "\n";
    return 0;
}

int synth(const SynthOptions& o, std::ostream& out, std::ostream&) {
    const auto records = synth::generate_records({o.count, o.seed, o.id_prefix, o.label_noise});
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    corpus::write_dataset_csv(o.out, records);
    out << "wrote " << records.size() << " essays to " << o.out.string() << "\n";
    return 0;
}

int serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
    // Worker threads inherit the mask; one thread waits for the signal.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto scorer = make_scorer(o.model, o.grammar);
    const auto tasks = service::load_tasks(o.tasks.empty() ? data_file("tasks.json") : o.tasks);
    service::Platform platform(std::make_shared<service::SqliteStore>(o.store), std::move(scorer), tasks);
    service::HttpService http(platform);
    const int port = http.bind(o.host, o.port);
    out << "listening on http://" << o.host << ":" << port << " (model " << platform.scorer().model_digest()
        << ", store " << o.store.string() << ")" << std::endl;
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        http.stop();
    });
    http.listen();
    err << "stopped\n";
    waiter.join();
    return 0;
}

}  // namespace ielts::cli
