#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ielts/common/error.hpp"

namespace {

void add_grammar(CLI::App* cmd, ielts::cli::GrammarOptions& g) {
    cmd->add_option("--grammar", g.backend, "Grammar backend")
        ->check(CLI::IsMember({"builtin", "languagetool"}))
        ->envname("IELTS_GRAMMAR")
        ->capture_default_str();
    cmd->add_option("--languagetool-url", g.languagetool_url, "LanguageTool server, e.g. http://localhost:8081")
        ->envname("IELTS_LANGUAGETOOL_URL");
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = ielts::cli;
    CLI::App app{"IELTS Writing Task 2 scoring, feedback and practice tools"};
    app.require_subcommand(1);
    int code = 0;

    auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
    dataset->require_subcommand(1);
    std::filesystem::path validate_path;
    auto* validate = dataset->add_subcommand("validate", "Report every invalid row of a CSV or JSONL corpus");
    validate->add_option("path", validate_path)->required()->check(CLI::ExistingFile);
    validate->callback([&] { code = cli::dataset_validate(validate_path, std::cout, std::cerr); });

    cli::TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Fine-tune the hybrid scorer");
    train_cmd->add_option("--data", train.data, "Labeled corpus (CSV or JSONL)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--config", train.config, "JSON with TrainConfig and EncoderConfig fields")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train.out, "Model artifact path")->required();
    add_grammar(train_cmd, train.grammar);
    train_cmd->callback([&] { code = cli::train(train, std::cout, std::cerr); });

    cli::ScoreOptions score;
    auto* score_cmd = app.add_subcommand("score", "Score essays; writes id,raw_score,band");
    score_cmd->add_option("--model", score.model, "Model artifact (rule scorer when omitted)")
        ->check(CLI::ExistingFile);
    score_cmd->add_option("--in", score.in, "Essays (CSV or JSONL)")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--out", score.out, "Output CSV")->required();
    score_cmd->add_option("--required-words", score.required_words, "Word target")->capture_default_str();
    add_grammar(score_cmd, score.grammar);
    score_cmd->callback([&] { code = cli::score(score, std::cout, std::cerr); });

    cli::BenchmarkOptions bench;
    auto* bench_cmd = app.add_subcommand("benchmark", "Metrics, confusion matrix and plots against labels");
    bench_cmd->add_option("--scorer", bench.scorer)->check(CLI::IsMember({"rule", "neural"}))->capture_default_str();
    bench_cmd->add_option("--model", bench.model, "Model artifact")->check(CLI::ExistingFile);
    bench_cmd->add_option("--data", bench.data, "Labeled essays")->required()->check(CLI::ExistingFile);
    bench_cmd->add_option("--out", bench.out, "Output directory")->required();
    bench_cmd->add_flag("--test-split", bench.test_split_only, "Keep only the model's held-out test ids");
    add_grammar(bench_cmd, bench.grammar);
    bench_cmd->callback([&] { code = cli::benchmark(bench, std::cout, std::cerr); });

    cli::CompareOptions cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "Compare benchmark runs; the first is the baseline");
    cmp_cmd->add_option("--runs", cmp.runs, "Benchmark output directories")->required()->expected(2, -1);
    cmp_cmd->add_option("--out", cmp.out, "Also write the comparison as JSON");
    cmp_cmd->callback([&] { code = cli::compare(cmp, std::cout, std::cerr); });

    cli::SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate-personas", "Feedback-driven revision experiment");
    sim_cmd->add_option("--model", sim.model, "Frozen model artifact (rule scorer when omitted)")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--essays", sim.essays, "Held-out essays")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "Output directory")->required();
    sim_cmd->add_option("--essays-per-persona", sim.essays_per_persona)->capture_default_str();
    sim_cmd->add_option("--compliance", sim.compliance, "Override every persona's compliance")
        ->check(CLI::Range(0.0, 1.0));
    add_grammar(sim_cmd, sim.grammar);
    sim_cmd->callback([&] { code = cli::simulate_personas(sim, std::cout, std::cerr); });

    cli::SynthOptions syn;
    auto* syn_cmd = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
    syn_cmd->add_option("--count", syn.count)->capture_default_str();
    syn_cmd->add_option("--seed", syn.seed)->capture_default_str();
    syn_cmd->add_option("--prefix", syn.id_prefix)->capture_default_str();
    syn_cmd->add_option("--noise", syn.label_noise, "Label noise sd in bands")->capture_default_str();
    syn_cmd->add_option("--out", syn.out, "Output CSV")->required();
    syn_cmd->callback([&] { code = cli::synth(syn, std::cout, std::cerr); });

    cli::ServeOptions srv;
    auto* srv_cmd = app.add_subcommand("serve", "Run the practice platform HTTP API");
    srv_cmd->add_option("--model", srv.model, "Model artifact, loaded at startup")
        ->envname("IELTS_MODEL")
        ->check(CLI::ExistingFile);
    srv_cmd->add_option("--store", srv.store, "SQLite database file")->envname("IELTS_STORE")->capture_default_str();
    srv_cmd->add_option("--tasks", srv.tasks, "Task catalog JSON")->envname("IELTS_TASKS")->check(CLI::ExistingFile);
    srv_cmd->add_option("--host", srv.host)->envname("IELTS_HOST")->capture_default_str();
    srv_cmd->add_option("--port", srv.port)->envname("IELTS_PORT")->capture_default_str();
    add_grammar(srv_cmd, srv.grammar);
    srv_cmd->callback([&] { code = cli::serve(srv, std::cout, std::cerr); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ielts::Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return code;
}
