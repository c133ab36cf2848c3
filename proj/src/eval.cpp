#include "cslnet/eval.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cslnet/errors.hpp"
#include "cslnet/rng.hpp"

namespace cslnet::eval {

namespace {

constexpr std::string_view kCsvHeader = "combo,fold,seed,accuracy,val_loss,epochs_run";

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ull;
    void add(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) {
            h ^= (v >> (8 * k)) & 0xFFu;
            h *= 0x100000001b3ull;
        }
    }
    void add(std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    }
};

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

// Indices of each label, in label order.
std::map<int, std::vector<std::size_t>> group_by_label(std::span<const int> labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    return groups;
}

std::vector<nn::Volume> prepare(std::span<const features::FeatureTensor> tensors, std::span<const std::size_t> indices,
                                const std::optional<features::ChannelStats>& stats) {
    std::vector<nn::Volume> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(to_volume(stats ? features::normalize(tensors[i], *stats) : tensors[i]));
    return out;
}

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels[i]);
    return out;
}

struct TrainedFold {
    nn::TrainResult training;
    nn::Evaluation evaluation;
    std::optional<features::ChannelStats> stats;
};

TrainedFold train_and_score(std::span<const features::FeatureTensor> tensors, std::span<const int> labels,
                            std::span<const std::size_t> train_idx, std::span<const std::size_t> test_idx,
                            const ExperimentSetup& setup) {
    TrainedFold out;
    if (setup.normalize) out.stats = features::compute_stats(tensors, train_idx);
    const auto train_x = prepare(tensors, train_idx, out.stats);
    const auto test_x = prepare(tensors, test_idx, out.stats);
    const auto train_y = gather(labels, train_idx);
    const auto test_y = gather(labels, test_idx);

    auto state = nn::init_network(setup.network, setup.init_seed);
    out.training = nn::train(std::move(state), setup.network, setup.train, {train_x, train_y}, {test_x, test_y});
    const auto& last = out.training.history.back();
    out.evaluation = {last.val_accuracy, last.val_loss, test_idx.size()};
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw DataError("bad number '" + s + "' in metrics CSV");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw DataError("bad integer '" + s + "' in metrics CSV");
    return v;
}

}  // namespace

Split holdout_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
    Xoshiro256ss rng(seed);
    Split split;
    for (auto& [label, members] : group_by_label(labels)) {
        if (members.size() < 2)
            throw ConfigError("class " + std::to_string(label) + " has fewer than 2 samples; cannot split");
        rng.shuffle(std::span<std::size_t>(members));
        const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(members.size())));
        split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold needs k >= 2, got " + std::to_string(k));
    auto groups = group_by_label(labels);
    if (groups.empty()) throw ConfigError("k-fold on an empty label set");
    std::size_t smallest = labels.size();
    for (const auto& [label, members] : groups) smallest = std::min(smallest, members.size());
    if (k > smallest)
        throw ConfigError("k = " + std::to_string(k) + " exceeds the smallest class size " + std::to_string(smallest));

    const std::size_t per_fold = smallest / k;
    Xoshiro256ss rng(seed);
    FoldPlan plan;
    plan.k = k;
    plan.folds.assign(k, {});
    plan.class_counts.assign(k, std::vector<std::size_t>(static_cast<std::size_t>(groups.rbegin()->first + 1), 0));
    for (auto& [label, members] : groups) {
        if (label < 0) throw ConfigError("negative class label");
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t r = 0; r < members.size(); ++r) {
            if (r < per_fold * k) {
                plan.folds[r % k].push_back(members[r]);
                ++plan.class_counts[r % k][static_cast<std::size_t>(label)];
            } else {
                plan.pool.push_back(members[r]);
            }
        }
    }
    for (auto& f : plan.folds) std::sort(f.begin(), f.end());
    std::sort(plan.pool.begin(), plan.pool.end());
    return plan;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out(pool);
    for (std::size_t f = 0; f < folds.size(); ++f)
        if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t FoldPlan::hash() const {
    Fnv1a h;
    h.add(k);
    for (const auto& f : folds) {
        h.add(f.size());
        for (auto i : f) h.add(i);
    }
    h.add(pool.size());
    for (auto i : pool) h.add(i);
    return h.h;
}

std::string FoldPlan::hash_hex() const { return hex16(hash()); }

std::string FoldId::str() const {
    switch (kind) {
        case Kind::Index: return std::to_string(index);
        case Kind::Holdout: return "holdout";
        case Kind::Mean: return "mean";
    }
    return "?";
}

FoldId FoldId::parse(const std::string& text) {
    if (text == "holdout") return holdout();
    if (text == "mean") return mean();
    return fold(static_cast<std::size_t>(parse_u64(text)));
}

Summary summarize(std::span<const MetricsRecord> records) {
    Summary s;
    if (records.empty()) return s;
    const double n = static_cast<double>(records.size());
    for (const auto& r : records) {
        s.mean_accuracy += r.accuracy;
        s.mean_val_loss += r.val_loss;
    }
    s.mean_accuracy /= n;
    s.mean_val_loss /= n;
    if (records.size() > 1) {
        for (const auto& r : records) {
            s.std_accuracy += (r.accuracy - s.mean_accuracy) * (r.accuracy - s.mean_accuracy);
            s.std_val_loss += (r.val_loss - s.mean_val_loss) * (r.val_loss - s.mean_val_loss);
        }
        s.std_accuracy = std::sqrt(s.std_accuracy / (n - 1.0));
        s.std_val_loss = std::sqrt(s.std_val_loss / (n - 1.0));
    }
    return s;
}

nn::Volume to_volume(const features::FeatureTensor& tensor) {
    const auto h = static_cast<std::size_t>(tensor.channels[0].rows());
    const auto w = static_cast<std::size_t>(tensor.channels[0].cols());
    nn::Volume v({features::kChannels, h, w});
    for (std::size_t c = 0; c < features::kChannels; ++c) {
        const auto& ch = tensor.channels[c];
        if (static_cast<std::size_t>(ch.rows()) != h || static_cast<std::size_t>(ch.cols()) != w)
            throw ConfigError("feature channels differ in size");
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t col = 0; col < w; ++col)
                v.at(c, r, col) = ch(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
    }
    return v;
}

CvResult run_cv(std::span<const features::FeatureTensor> tensors, std::span<const int> labels, const FoldPlan& plan,
                const ExperimentSetup& setup, const std::string& combo_label) {
    if (tensors.size() != labels.size()) throw ConfigError("run_cv: tensors and labels differ in length");
    CvResult result;
    result.fold_hash = plan.hash_hex();
    for (std::size_t f = 0; f < plan.k; ++f) {
        const auto train_idx = plan.train_indices(f);
        TrainedFold fold;
        try {
            fold = train_and_score(tensors, labels, train_idx, plan.folds[f], setup);
        } catch (const DivergenceError& e) {
            throw DivergenceError(combo_label + " fold " + std::to_string(f) + ": " + e.what(), e.epoch());
        }
        result.records.push_back({combo_label, FoldId::fold(f), setup.init_seed, fold.evaluation.accuracy,
                                  fold.evaluation.loss, fold.training.history.size()});
        result.histories.push_back(std::move(fold.training.history));
    }
    result.summary = summarize(result.records);
    return result;
}

CvResult run_cv(std::span<const features::FeatureTensor> tensors, std::span<const int> labels, std::size_t k,
                std::uint64_t split_seed, const ExperimentSetup& setup, const std::string& combo_label) {
    return run_cv(tensors, labels, stratified_kfold(labels, k, split_seed), setup, combo_label);
}

HoldoutResult run_holdout(std::span<const features::FeatureTensor> tensors, std::span<const int> labels,
                          const Split& split, const ExperimentSetup& setup, const std::string& combo_label) {
    if (tensors.size() != labels.size()) throw ConfigError("run_holdout: tensors and labels differ in length");
    if (split.train.empty() || split.test.empty()) throw ConfigError("run_holdout: empty train or test split");
    auto fold = train_and_score(tensors, labels, split.train, split.test, setup);
    HoldoutResult out;
    out.record = {combo_label, FoldId::holdout(), setup.init_seed, fold.evaluation.accuracy, fold.evaluation.loss,
                  fold.training.history.size()};
    out.training = std::move(fold.training);
    if (fold.stats) out.stats = *fold.stats;
    else out.stats.stddev.fill(1.0);
    return out;
}

std::vector<features::FeatureTensor> extract_all(const data::Dataset& dataset,
                                                 const std::optional<features::ChannelCombo>& combo,
                                                 const features::MatrixBank& bank, std::size_t baseline_side) {
    std::vector<features::FeatureTensor> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset.samples)
        out.push_back(combo ? features::extract_channels(s.image, *combo, bank, s.source)
                            : features::resized_baseline(s.image, baseline_side, s.source));
    return out;
}

GridResult run_grid(const data::Dataset& dataset, const features::MatrixBank& bank,
                    std::span<const features::ChannelCombo> combos, const ExperimentSetup& setup, std::size_t k,
                    std::uint64_t split_seed) {
    if (combos.empty()) throw ConfigError("run_grid needs at least one combo");
    const auto labels = dataset.labels();
    const FoldPlan plan = stratified_kfold(labels, k, split_seed);
    GridResult grid;
    grid.fold_hash = plan.hash_hex();
    for (const auto& combo : combos) {
        const auto tensors = extract_all(dataset, combo, bank, 0);
        grid.rows.push_back({combo.str(), run_cv(tensors, labels, plan, setup, combo.str())});
    }
    return grid;
}

std::string format_csv(std::span<const MetricsRecord> records) {
    std::string out(kCsvHeader);
    out += '\n';
    char line[256];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, ",%s,%" PRIu64 ",%.6f,%.6f,%zu\n", r.fold.str().c_str(), r.seed, r.accuracy,
                      r.val_loss, r.epochs_run);
        out += r.combo;
        out += line;
    }
    return out;
}

void export_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string text = format_csv(records);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MetricsRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw DataError("metrics CSV header mismatch");
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw DataError("metrics CSV row has " + std::to_string(f.size()) + " fields");
        out.push_back({f[0], FoldId::parse(f[1]), parse_u64(f[2]), parse_double(f[3]), parse_double(f[4]),
                       static_cast<std::size_t>(parse_u64(f[5]))});
    }
    return out;
}

std::vector<MetricsRecord> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json to_json(const Summary& s) {
    return {{"mean_accuracy", s.mean_accuracy},
            {"std_accuracy", s.std_accuracy},
            {"mean_val_loss", s.mean_val_loss},
            {"std_val_loss", s.std_val_loss}};
}

nlohmann::json to_json(const nn::TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"shuffle_seed", c.seed},
            {"optimizer", c.optimizer == nn::OptimizerKind::Adam ? "adam" : "momentum"},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon}};
}

nlohmann::json to_json(const std::vector<nn::EpochMetrics>& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : history)
        out.push_back({{"epoch", m.epoch},
                       {"train_loss", m.train_loss},
                       {"val_loss", m.val_loss},
                       {"val_accuracy", m.val_accuracy}});
    return out;
}

std::string spec_digest(const nn::NetworkSpec& spec) {
    Fnv1a h;
    h.add(spec.describe());
    return hex16(h.h);
}

}  // namespace cslnet::eval
