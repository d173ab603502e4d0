#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ielts/scoring/scorer.hpp"

namespace ielts::cli {

namespace fs = std::filesystem;

struct GrammarOptions {
    std::string backend = "builtin";  // or "languagetool"
    std::string languagetool_url;
};

// Rule-only when `model` is empty.
scoring::EssayScorer make_scorer(const std::optional<fs::path>& model, const GrammarOptions& grammar);

// Each command returns a process exit code; diagnostics go to `err`.

int dataset_validate(const fs::path& path, std::ostream& out, std::ostream& err);

struct TrainOptions {
    fs::path data;
    std::optional<fs::path> config;
    fs::path out;
    GrammarOptions grammar;
};
// Config keys: any TrainConfig or EncoderConfig field, plus an optional
// "split" object with train_frac, val_frac, test_frac and seed.
int train(const TrainOptions& o, std::ostream& out, std::ostream& err);

struct ScoreOptions {
    std::optional<fs::path> model;
    fs::path in;
    fs::path out;
    int required_words = 250;
    GrammarOptions grammar;
};
// Writes id,raw_score,band with raw scores at full double precision.
int score(const ScoreOptions& o, std::ostream& out, std::ostream& err);

struct BenchmarkOptions {
    std::string scorer = "rule";  // "rule" or "neural"
    std::optional<fs::path> model;
    fs::path data;
    fs::path out;
    bool test_split_only = false;  // keep only the model's recorded test ids
    GrammarOptions grammar;
};
int benchmark(const BenchmarkOptions& o, std::ostream& out, std::ostream& err);

struct CompareOptions {
    std::vector<fs::path> runs;
    std::optional<fs::path> out;
};
int compare(const CompareOptions& o, std::ostream& out, std::ostream& err);

struct SimulateOptions {
    std::optional<fs::path> model;
    fs::path essays;
    std::uint64_t seed = 42;
    fs::path out;
    std::size_t essays_per_persona = 6;
    std::optional<double> compliance;  // overrides every persona's compliance
    GrammarOptions grammar;
};
int simulate_personas(const SimulateOptions& o, std::ostream& out, std::ostream& err);

struct SynthOptions {
    std::size_t count = 200;
    std::uint64_t seed = 1;
    std::string id_prefix = "synth";
    double label_noise = 0.45;
    fs::path out;
};
int synth(const SynthOptions& o, std::ostream& out, std::ostream& err);

struct ServeOptions {
    std::optional<fs::path> model;
    fs::path store = "ielts.db";
    fs::path tasks;
    std::string host = "127.0.0.1";
    int port = 8080;
    GrammarOptions grammar;
};
int serve(const ServeOptions& o, std::ostream& out, std::ostream& err);

}  // namespace ielts::cli
