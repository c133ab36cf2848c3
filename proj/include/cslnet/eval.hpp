#pragma once

// Splitting, cross-validation and experiment grids over channel combos.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cslnet/data.hpp"
#include "cslnet/features.hpp"
#include "cslnet/nn.hpp"

namespace cslnet::eval {

struct Split {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
};

/// Per class, shuffles that class's indices and sends the first
/// round(test_fraction * class_size) to the test side. Classes are visited
/// in ascending label order with one shared stream seeded by `seed`.
/// Throws ConfigError for a class with fewer than 2 samples.
Split holdout_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

/// k test folds with exactly floor(min_class_size / k) samples of every
/// class each; leftover samples go to `pool`, which joins every training set.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> folds;  // each ascending
    std::vector<std::size_t> pool;                // ascending
    std::vector<std::vector<std::size_t>> class_counts;  // [fold][label]

    /// All other folds plus the pool, ascending.
    std::vector<std::size_t> train_indices(std::size_t fold) const;
    /// FNV-1a over k, every fold and the pool.
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

/// Shuffles each class with a stream seeded by `seed` and deals the first
/// per_fold * k members round-robin to folds. Throws ConfigError if k < 2 or
/// k exceeds the smallest class.
FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// Fold identifier of a metrics row: a fold index, the holdout split, or a summary.
struct FoldId {
    enum class Kind { Index, Holdout, Mean };
    Kind kind = Kind::Index;
    std::size_t index = 0;

    static FoldId fold(std::size_t i) { return {Kind::Index, i}; }
    static FoldId holdout() { return {Kind::Holdout, 0}; }
    static FoldId mean() { return {Kind::Mean, 0}; }

    std::string str() const;
    static FoldId parse(const std::string& text);
    bool operator==(const FoldId&) const = default;
};

struct MetricsRecord {
    std::string combo;  // e.g. "GCT", or "none" for the uncompressed baseline
    FoldId fold;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double val_loss = 0.0;
    std::size_t epochs_run = 0;
};

struct Summary {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample standard deviation
    double mean_val_loss = 0.0;
    double std_val_loss = 0.0;
};

Summary summarize(std::span<const MetricsRecord> records);

/// Network, optimizer and seeds shared by every fold and combo of one experiment.
struct ExperimentSetup {
    nn::NetworkSpec network;
    nn::TrainConfig train;
    std::uint64_t init_seed = 0;
    bool normalize = true;  // per-channel standardization from training statistics
};

struct CvResult {
    std::vector<MetricsRecord> records;  // one per fold
    Summary summary;
    std::string fold_hash;
    std::vector<std::vector<nn::EpochMetrics>> histories;  // per fold
};

/// Trains on train_indices(i) and evaluates on fold i, for every fold.
/// `combo_label` fills the records' combo column.
CvResult run_cv(std::span<const features::FeatureTensor> tensors, std::span<const int> labels, const FoldPlan& plan,
                const ExperimentSetup& setup, const std::string& combo_label);

/// Builds the plan from (k, split_seed) first.
CvResult run_cv(std::span<const features::FeatureTensor> tensors, std::span<const int> labels, std::size_t k,
                std::uint64_t split_seed, const ExperimentSetup& setup, const std::string& combo_label);

struct HoldoutResult {
    MetricsRecord record;
    nn::TrainResult training;
    features::ChannelStats stats;
};

HoldoutResult run_holdout(std::span<const features::FeatureTensor> tensors, std::span<const int> labels,
                          const Split& split, const ExperimentSetup& setup, const std::string& combo_label);

/// Compressed features for every sample, or the resized baseline when `combo` is empty.
std::vector<features::FeatureTensor> extract_all(const data::Dataset& dataset,
                                                 const std::optional<features::ChannelCombo>& combo,
                                                 const features::MatrixBank& bank, std::size_t baseline_side);

struct GridRow {
    std::string combo;
    CvResult cv;
};

struct GridResult {
    std::vector<GridRow> rows;
    std::string fold_hash;  // shared by every row
};

/// One k-fold run per combo over a single shared fold plan.
GridResult run_grid(const data::Dataset& dataset, const features::MatrixBank& bank,
                    std::span<const features::ChannelCombo> combos, const ExperimentSetup& setup, std::size_t k,
                    std::uint64_t split_seed);

/// Header `combo,fold,seed,accuracy,val_loss,epochs_run`, LF line endings, six decimals.
std::string format_csv(std::span<const MetricsRecord> records);
void export_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path);
std::vector<MetricsRecord> parse_csv(const std::string& text);
std::vector<MetricsRecord> read_csv(const std::filesystem::path& path);

/// Pretty-printed JSON with sorted keys and a trailing newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

nlohmann::json to_json(const Summary& summary);
nlohmann::json to_json(const nn::TrainConfig& config);
nlohmann::json to_json(const std::vector<nn::EpochMetrics>& history);
/// FNV-1a of the network descriptor, as 16 hex digits.
std::string spec_digest(const nn::NetworkSpec& spec);

/// FeatureTensor -> network input volume (pixel (r, c) -> column r * width + c).
nn::Volume to_volume(const features::FeatureTensor& tensor);

}  // namespace cslnet::eval
