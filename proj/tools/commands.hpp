#pragma once

// Subcommands of the `cslnet` tool, callable without going through argv.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cslnet/reconstruct.hpp"
#include "cslnet/sensing.hpp"

namespace cslnet::cli {

struct DatasetOptions {
    std::filesystem::path directory;  // either this ...
    std::size_t synthetic = 0;        // ... or this many samples per class
    std::string difficulty = "easy";
    std::uint64_t seed = 0;  // synthetic generator
};

struct ExperimentOptions {
    DatasetOptions data;
    std::string combo = "GCT";  // three letters, comma list, "all" or "none"
    bool ordered = false;       // "all" means the 27 ordered triples instead of the 10 multisets
    std::size_t measurements = 64;
    std::string conv = "16,32,64";
    std::string hidden = "128";
    std::size_t epochs = 20;
    std::size_t batch = 32;
    double lr = 1e-3;
    std::string optimizer = "adam";
    bool normalize = true;
    std::size_t k = 5;
    double test_frac = 0.2;
    std::uint64_t seed_matrix = 1;
    std::uint64_t seed_split = 2;
    std::uint64_t seed_init = 3;
    std::uint64_t seed_shuffle = 4;
    std::filesystem::path out;
    bool force = false;  // replace an existing, non-empty output directory
};

/// Holdout training. Writes model.cslnet, metrics.csv, metrics.json and matrices/.
void cmd_train(const ExperimentOptions& options, std::ostream& log);

/// k-fold cross-validation over every selected combo. Writes metrics.csv
/// (fold rows plus one "mean" row per combo), metrics.json and matrices/.
void cmd_cv(const ExperimentOptions& options, std::ostream& log);

struct ReconstructOptions {
    std::vector<std::size_t> rows{32};
    std::vector<std::size_t> cols{64};
    std::vector<std::size_t> sparsity{4};
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    sensing::Kind kind = sensing::Kind::Gaussian;
    reconstruct::Amplitude amplitude = reconstruct::Amplitude::Gaussian;
    std::filesystem::path out;  // optional: reconstruct.csv + reconstruct.json
    bool force = false;
};

struct ReconstructRow {
    std::string solver;  // "omp" or "ista"
    sensing::Kind kind = sensing::Kind::Gaussian;
    std::size_t rows = 0, cols = 0, sparsity = 0, trials = 0;
    double success_rate = 0.0;
};

/// One matrix per (M, N) from `seed`; signals from a stream seeded by seed + 1.
/// Success means the recovered support (s largest magnitudes for ISTA) equals the true one.
std::vector<ReconstructRow> reconstruct_demo(const ReconstructOptions& options);
std::string format_reconstruct_csv(const std::vector<ReconstructRow>& rows);
void cmd_reconstruct_demo(const ReconstructOptions& options, std::ostream& out);

struct BenchOptions {
    std::vector<std::size_t> sizes{256, 1024, 4096};
    std::uint64_t seed = 0;
    std::size_t reps = 20;
    std::filesystem::path out;  // optional: bench.csv
    bool force = false;
};

struct BenchRow {
    sensing::Kind kind = sensing::Kind::Circulant;
    std::size_t n = 0;
    double dense_ms = 0.0;       // median, precomputed dense matrix times vector
    double structured_ms = 0.0;  // median, FFT path
    double speedup = 0.0;
    double max_abs_diff = 0.0;
};

inline constexpr double kBenchTolerance = 1e-10;

/// Square circulant and Toeplitz matrices at every size. Throws DataError if
/// any size deviates by kBenchTolerance or more.
std::vector<BenchRow> run_bench(const BenchOptions& options);
std::string format_bench_csv(const std::vector<BenchRow>& rows);
void cmd_bench(const BenchOptions& options, std::ostream& out);

/// "1,2,3" -> {1, 2, 3}. Empty text gives an empty list.
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace cslnet::cli
