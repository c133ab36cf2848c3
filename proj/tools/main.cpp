// cslnet command-line tool: train, cv, reconstruct-demo, bench.

#include <exception>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "commands.hpp"
#include "cslnet/errors.hpp"
#include "cslnet/version.hpp"

namespace {

using cslnet::cli::ExperimentOptions;

void add_experiment_flags(CLI::App* cmd, ExperimentOptions& o, bool cv) {
    auto* dataset = cmd->add_option("--dataset", o.data.directory, "Directory with negative/ and positive/ images");
    auto* synthetic =
        cmd->add_option("--synthetic", o.data.synthetic, "Generate N synthetic samples per class instead");
    dataset->excludes(synthetic);
    cmd->add_option("--difficulty", o.data.difficulty, "Synthetic difficulty: easy, moderate, hard or 0..1")
        ->capture_default_str();
    cmd->add_option("--seed-data", o.data.seed, "Synthetic generator seed")->capture_default_str();
    cmd->add_option("--combo", o.combo, cv ? "GCT, a comma list, all, or none" : "Channel combo, e.g. GCT, or none")
        ->capture_default_str();
    if (cv) {
        cmd->add_flag("--ordered", o.ordered, "With --combo all, use the 27 ordered triples");
        cmd->add_option("--k", o.k, "Number of folds")->capture_default_str();
    } else {
        cmd->add_option("--test-frac", o.test_frac, "Holdout fraction per class")->capture_default_str();
    }
    cmd->add_option("--measurements", o.measurements, "Rows M of every sensing matrix")->capture_default_str();
    cmd->add_option("--conv", o.conv, "Conv block widths, comma-separated (empty for none)")->capture_default_str();
    cmd->add_option("--hidden", o.hidden, "Hidden dense widths, comma-separated")->capture_default_str();
    cmd->add_option("--epochs", o.epochs)->capture_default_str();
    cmd->add_option("--batch", o.batch)->capture_default_str();
    cmd->add_option("--lr", o.lr)->capture_default_str();
    cmd->add_option("--optimizer", o.optimizer, "adam or momentum")->capture_default_str();
    cmd->add_flag("!--no-normalize", o.normalize, "Feed raw compressed values (no per-channel standardization)");
    cmd->add_option("--seed-matrix", o.seed_matrix)->capture_default_str();
    cmd->add_option("--seed-split", o.seed_split)->capture_default_str();
    cmd->add_option("--seed-init", o.seed_init)->capture_default_str();
    cmd->add_option("--seed-shuffle", o.seed_shuffle)->capture_default_str();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_flag("--force", o.force, "Replace a non-empty output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressive-learning image classifier"};
    app.set_version_flag("--version", cslnet::kVersion);
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress output");

    ExperimentOptions train_opts, cv_opts;
    auto* train = app.add_subcommand("train", "Train on a holdout split and save a checkpoint");
    add_experiment_flags(train, train_opts, false);
    auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation over channel combos");
    add_experiment_flags(cv, cv_opts, true);

    cslnet::cli::ReconstructOptions rec;
    std::string rec_m = "32", rec_n = "64", rec_s = "4", rec_kind = "G", rec_amp = "gaussian";
    auto* demo = app.add_subcommand("reconstruct-demo", "Sparse-recovery success rates of OMP and ISTA");
    demo->add_option("--M", rec_m, "Measurement counts, comma-separated")->capture_default_str();
    demo->add_option("--N", rec_n, "Signal lengths, comma-separated")->capture_default_str();
    demo->add_option("--s", rec_s, "Sparsity levels, comma-separated")->capture_default_str();
    demo->add_option("--trials", rec.trials)->capture_default_str();
    demo->add_option("--seed", rec.seed)->capture_default_str();
    demo->add_option("--kind", rec_kind, "G, C or T")->capture_default_str();
    demo->add_option("--amplitude", rec_amp, "sign or gaussian")->capture_default_str();
    demo->add_option("--out", rec.out, "Also write reconstruct.csv and reconstruct.json here");
    demo->add_flag("--force", rec.force);

    cslnet::cli::BenchOptions bench;
    std::string sizes = "256,1024,4096";
    auto* bench_cmd = app.add_subcommand("bench", "Dense vs FFT application of circulant and Toeplitz matrices");
    bench_cmd->add_option("--sizes", sizes, "Comma-separated N values (empty for none)")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
    bench_cmd->add_option("--reps", bench.reps)->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "Also write bench.csv and bench.json here");
    bench_cmd->add_flag("--force", bench.force);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(cslnet::ErrorCategory::Config);
    }

    std::ostringstream sink;
    std::ostream& log = quiet ? static_cast<std::ostream&>(sink) : std::cerr;
    try {
        if (*train) {
            cslnet::cli::cmd_train(train_opts, log);
        } else if (*cv) {
            cslnet::cli::cmd_cv(cv_opts, log);
        } else if (*demo) {
            rec.rows = cslnet::cli::parse_size_list(rec_m);
            rec.cols = cslnet::cli::parse_size_list(rec_n);
            rec.sparsity = cslnet::cli::parse_size_list(rec_s);
            if (rec_kind.size() != 1) throw cslnet::ConfigError("--kind must be G, C or T");
            rec.kind = cslnet::sensing::kind_from_letter(rec_kind[0]);
            rec.amplitude = cslnet::reconstruct::parse_amplitude(rec_amp);
            cslnet::cli::cmd_reconstruct_demo(rec, std::cout);
        } else if (*bench_cmd) {
            bench.sizes = cslnet::cli::parse_size_list(sizes);
            cslnet::cli::cmd_bench(bench, std::cout);
        }
    } catch (const cslnet::Error& e) {
        std::cerr << "error [" << cslnet::category_name(e.category()) << "]: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error [io]: " << e.what() << "\n";
        return static_cast<int>(cslnet::ErrorCategory::Io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
