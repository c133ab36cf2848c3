#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cslnet/data.hpp"
#include "cslnet/errors.hpp"
#include "cslnet/eval.hpp"
#include "cslnet/features.hpp"
#include "cslnet/nn.hpp"
#include "cslnet/rng.hpp"
#include "cslnet/version.hpp"

namespace cslnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Output is written into a hidden sibling directory, then renamed onto the
// target by commit(). Uncommitted staging directories are removed.
class StagedDir {
public:
    StagedDir(const fs::path& target, bool force) : target_(target) {
        if (target.empty()) throw ConfigError("--out is required");
        std::error_code ec;
        if (fs::exists(target, ec)) {
            if (!fs::is_directory(target, ec)) throw ConfigError(target.string() + " exists and is not a directory");
            if (!fs::is_empty(target, ec) && !force)
                throw ConfigError(target.string() + " is not empty (use --force to replace it)");
        }
        const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
        fs::create_directories(parent, ec);
        if (ec) throw IoError("cannot create " + parent.string() + ": " + ec.message());
        staging_ = parent / ("." + target.filename().string() + ".partial");
        fs::remove_all(staging_, ec);
        if (!fs::create_directory(staging_, ec)) throw IoError("cannot create " + staging_.string() + ": " + ec.message());
    }

    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;

    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }

    const fs::path& path() const noexcept { return staging_; }

    void commit() {
        std::error_code ec;
        fs::remove_all(target_, ec);
        fs::rename(staging_, target_, ec);
        if (ec) throw IoError("cannot move results into " + target_.string() + ": " + ec.message());
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return out;
}

data::Dataset load_data(const DatasetOptions& o) {
    const bool has_dir = !o.directory.empty();
    if (has_dir == (o.synthetic > 0)) throw ConfigError("give exactly one of --dataset DIR or --synthetic N");
    if (has_dir) return data::load_dataset(o.directory);
    return data::synthesize_dataset(o.synthetic, o.seed, data::parse_difficulty(o.difficulty));
}

json dataset_json(const data::Dataset& ds, const DatasetOptions& o) {
    json j;
    if (ds.provenance.kind == data::Provenance::Kind::Directory) {
        j["kind"] = "directory";
        j["root"] = o.directory.string();
        j["skipped_files"] = ds.provenance.skipped_files;
    } else {
        j["kind"] = "synthetic";
        j["n_per_class"] = o.synthetic;
        j["seed"] = ds.provenance.seed;
        j["difficulty"] = ds.provenance.difficulty;
    }
    j["size"] = ds.size();
    j["class_counts"] = {{"negative", ds.class_counts[data::kNegative]},
                         {"positive", ds.class_counts[data::kPositive]}};
    return j;
}

// Empty optional = uncompressed baseline.
std::vector<std::optional<features::ChannelCombo>> select_combos(const std::string& text, bool ordered) {
    std::vector<std::optional<features::ChannelCombo>> out;
    for (const auto& item : split_list(text)) {
        if (item == "all") {
            for (const auto& c : features::enumerate_combos(!ordered)) out.emplace_back(c);
        } else if (item == "none") {
            out.emplace_back(std::nullopt);
        } else {
            out.emplace_back(features::ChannelCombo::parse(item));
        }
    }
    if (out.empty()) throw ConfigError("no channel combo selected");
    std::set<std::string> seen;
    for (const auto& c : out)
        if (!seen.insert(c ? c->str() : "none").second)
            throw ConfigError("channel combo " + (c ? c->str() : std::string("none")) + " selected twice");
    return out;
}

std::string combo_label(const std::optional<features::ChannelCombo>& c) { return c ? c->str() : "none"; }

eval::ExperimentSetup make_setup(const ExperimentOptions& o) {
    eval::ExperimentSetup s;
    s.network.input = {features::kChannels, o.measurements, o.measurements};
    s.network.conv_channels.clear();
    for (const auto& w : split_list(o.conv))
        if (!w.empty()) s.network.conv_channels.push_back(parse_size_list(w).front());
    s.network.hidden = parse_size_list(o.hidden);
    s.network.classes = 2;
    s.network.validate();

    s.train.epochs = o.epochs;
    s.train.batch_size = o.batch;
    s.train.learning_rate = o.lr;
    s.train.seed = o.seed_shuffle;
    if (o.optimizer == "adam") s.train.optimizer = nn::OptimizerKind::Adam;
    else if (o.optimizer == "momentum") s.train.optimizer = nn::OptimizerKind::Momentum;
    else throw ConfigError("optimizer must be adam or momentum, got '" + o.optimizer + "'");
    s.train.validate();

    s.init_seed = o.seed_init;
    s.normalize = o.normalize;
    return s;
}

void check_measurements(const ExperimentOptions& o) {
    if (o.measurements == 0 || o.measurements > data::kImageSide)
        throw ConfigError("--measurements must lie in [1, " + std::to_string(data::kImageSide) + "]");
}

// Writes the matrix pairs of every kind the combos use; returns their relative paths.
std::vector<std::string> save_bank(const features::MatrixBank& bank,
                                   const std::vector<std::optional<features::ChannelCombo>>& combos,
                                   const fs::path& dir) {
    std::set<sensing::Kind> kinds;
    for (const auto& c : combos)
        if (c) kinds.insert(c->kinds.begin(), c->kinds.end());
    std::vector<std::string> files;
    if (kinds.empty()) return files;
    fs::create_directories(dir / "matrices");
    for (auto kind : kinds) {
        const std::string letter(1, sensing::kind_letter(kind));
        const auto& pair = bank.pair(kind);
        for (const auto& [suffix, m] : {std::pair{"row", &pair.row}, std::pair{"col", &pair.col}}) {
            const std::string rel = "matrices/" + letter + "_" + suffix + ".cslmat";
            sensing::save_matrix(*m, dir / rel);
            files.push_back(rel);
        }
    }
    return files;
}

json base_manifest(const std::string& command, const ExperimentOptions& o, const eval::ExperimentSetup& setup,
                   const data::Dataset& ds, const std::vector<std::optional<features::ChannelCombo>>& combos) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["dataset"] = dataset_json(ds, o.data);
    json names = json::array();
    for (const auto& c : combos) names.push_back(combo_label(c));
    m["combos"] = names;
    m["measurements"] = o.measurements;
    m["image_side"] = data::kImageSide;
    m["seeds"] = {{"matrix", o.seed_matrix},
                  {"split", o.seed_split},
                  {"init", o.seed_init},
                  {"shuffle", o.seed_shuffle},
                  {"data", o.data.seed}};
    m["network"] = {{"descriptor", setup.network.describe()},
                    {"digest", eval::spec_digest(setup.network)},
                    {"parameters", setup.network.parameter_count()}};
    m["train"] = eval::to_json(setup.train);
    m["normalize"] = setup.normalize;
    return m;
}

json stats_json(const features::ChannelStats& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}};
}

void log_history(std::ostream& log, const std::string& prefix, const std::vector<nn::EpochMetrics>& history) {
    for (const auto& e : history) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s epoch %zu: train_loss %.4f val_loss %.4f val_acc %.4f\n", prefix.c_str(),
                      e.epoch + 1, e.train_loss, e.val_loss, e.val_accuracy);
        log << buf;
    }
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    if (text.find_first_not_of(" \t") == std::string::npos) return out;
    for (const auto& item : split_list(text)) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (item.empty() || used != item.size() || item.front() == '-')
            throw ConfigError("expected a comma-separated list of non-negative integers, got '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

void cmd_train(const ExperimentOptions& o, std::ostream& log) {
    check_measurements(o);
    const auto setup = make_setup(o);
    const auto combos = select_combos(o.combo, o.ordered);
    if (combos.size() != 1) throw ConfigError("train takes a single combo; use cv for grids");
    StagedDir out(o.out, o.force);

    const auto ds = load_data(o.data);
    log << "dataset: " << ds.size() << " samples (" << ds.class_counts[0] << " negative, " << ds.class_counts[1]
        << " positive)\n";
    const auto bank = features::MatrixBank::build(o.measurements, data::kImageSide, data::kImageSide, o.seed_matrix);
    const auto labels = ds.labels();
    const auto tensors = eval::extract_all(ds, combos[0], bank, o.measurements);
    const auto split = eval::holdout_split(labels, o.test_frac, o.seed_split);
    const std::string label = combo_label(combos[0]);

    const auto result = eval::run_holdout(tensors, labels, split, setup, label);
    log_history(log, label, result.training.history);
    log << label << " holdout accuracy " << fmt("%.4f", result.record.accuracy) << " val_loss "
        << fmt("%.4f", result.record.val_loss) << "\n";

    nn::save_checkpoint(result.training.state, setup.network, out.path() / "model.cslnet");
    const std::vector<eval::MetricsRecord> records{result.record};
    eval::export_csv(records, out.path() / "metrics.csv");

    json m = base_manifest("train", o, setup, ds, combos);
    m["protocol"] = {{"kind", "holdout"},
                     {"test_fraction", o.test_frac},
                     {"train_size", split.train.size()},
                     {"test_size", split.test.size()}};
    m["normalization"] = setup.normalize ? stats_json(result.stats) : json(nullptr);
    m["history"] = eval::to_json(result.training.history);
    m["result"] = {{"accuracy", result.record.accuracy}, {"val_loss", result.record.val_loss}};
    json files = {"metrics.csv", "model.cslnet"};
    for (const auto& f : save_bank(bank, combos, out.path())) files.push_back(f);
    m["artifacts"] = files;
    eval::write_json(m, out.path() / "metrics.json");
    out.commit();
}

void cmd_cv(const ExperimentOptions& o, std::ostream& log) {
    check_measurements(o);
    const auto setup = make_setup(o);
    const auto combos = select_combos(o.combo, o.ordered);
    StagedDir out(o.out, o.force);

    const auto ds = load_data(o.data);
    log << "dataset: " << ds.size() << " samples (" << ds.class_counts[0] << " negative, " << ds.class_counts[1]
        << " positive)\n";
    const auto labels = ds.labels();
    const auto plan = eval::stratified_kfold(labels, o.k, o.seed_split);
    const auto bank = features::MatrixBank::build(o.measurements, data::kImageSide, data::kImageSide, o.seed_matrix);

    std::vector<eval::MetricsRecord> records;
    json summaries = json::object();
    json histories = json::object();
    for (const auto& combo : combos) {
        const std::string label = combo_label(combo);
        const auto tensors = eval::extract_all(ds, combo, bank, o.measurements);
        const auto cv = eval::run_cv(tensors, labels, plan, setup, label);
        for (std::size_t f = 0; f < cv.records.size(); ++f) {
            log << label << " fold " << f << ": accuracy " << fmt("%.4f", cv.records[f].accuracy) << " val_loss "
                << fmt("%.4f", cv.records[f].val_loss) << "\n";
            records.push_back(cv.records[f]);
        }
        records.push_back({label, eval::FoldId::mean(), setup.init_seed, cv.summary.mean_accuracy,
                           cv.summary.mean_val_loss, setup.train.epochs});
        log << label << " mean accuracy " << fmt("%.4f", cv.summary.mean_accuracy) << " (std "
            << fmt("%.4f", cv.summary.std_accuracy) << ")\n";
        summaries[label] = eval::to_json(cv.summary);
        json per_fold = json::array();
        for (const auto& h : cv.histories) per_fold.push_back(eval::to_json(h));
        histories[label] = per_fold;
    }
    eval::export_csv(records, out.path() / "metrics.csv");

    json m = base_manifest("cv", o, setup, ds, combos);
    json counts = json::array();
    for (const auto& c : plan.class_counts) counts.push_back(c);
    m["protocol"] = {{"kind", "kfold"},
                     {"k", plan.k},
                     {"fold_hash", plan.hash_hex()},
                     {"per_fold_class_counts", counts},
                     {"pool_size", plan.pool.size()}};
    m["summaries"] = summaries;
    m["histories"] = histories;
    json files = {"metrics.csv"};
    for (const auto& f : save_bank(bank, combos, out.path())) files.push_back(f);
    m["artifacts"] = files;
    eval::write_json(m, out.path() / "metrics.json");
    out.commit();
}

std::vector<ReconstructRow> reconstruct_demo(const ReconstructOptions& o) {
    if (o.trials == 0) throw ConfigError("--trials must be positive");
    for (auto m : o.rows)
        for (auto n : o.cols)
            for (auto s : o.sparsity)
                if (s < 1 || s > m || m > n)
                    throw ConfigError("need 1 <= s <= M <= N, got s=" + std::to_string(s) + " M=" + std::to_string(m) +
                                      " N=" + std::to_string(n));

    std::vector<ReconstructRow> rows;
    for (auto m : o.rows) {
        for (auto n : o.cols) {
            const auto matrix = sensing::SensingMatrix::build({o.kind, m, n, o.seed});
            for (auto s : o.sparsity) {
                Xoshiro256ss rng(o.seed + 1);
                std::size_t omp_hits = 0, ista_hits = 0;
                for (std::size_t t = 0; t < o.trials; ++t) {
                    const auto x = reconstruct::random_sparse_signal(n, s, rng, o.amplitude);
                    const auto truth = x.support();
                    const Eigen::VectorXd y = sensing::apply(matrix, x.values);

                    auto omp_support = reconstruct::omp(y, matrix, s).support;
                    std::sort(omp_support.begin(), omp_support.end());
                    omp_hits += omp_support == truth;

                    const auto ista = reconstruct::ista_l1(y, matrix, reconstruct::default_lambda(y, matrix));
                    std::vector<std::size_t> order(n);
                    std::iota(order.begin(), order.end(), std::size_t{0});
                    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                        return std::abs(ista.estimate[static_cast<Eigen::Index>(a)]) >
                               std::abs(ista.estimate[static_cast<Eigen::Index>(b)]);
                    });
                    order.resize(s);
                    std::sort(order.begin(), order.end());
                    ista_hits += order == truth;
                }
                const double denom = static_cast<double>(o.trials);
                rows.push_back({"omp", o.kind, m, n, s, o.trials, static_cast<double>(omp_hits) / denom});
                rows.push_back({"ista", o.kind, m, n, s, o.trials, static_cast<double>(ista_hits) / denom});
            }
        }
    }
    return rows;
}

std::string format_reconstruct_csv(const std::vector<ReconstructRow>& rows) {
    std::string out = "solver,kind,M,N,s,trials,success_rate\n";
    for (const auto& r : rows) {
        out += r.solver + "," + std::string(sensing::kind_name(r.kind)) + "," + std::to_string(r.rows) + "," +
               std::to_string(r.cols) + "," + std::to_string(r.sparsity) + "," + std::to_string(r.trials) + "," +
               fmt("%.6f", r.success_rate) + "\n";
    }
    return out;
}

void cmd_reconstruct_demo(const ReconstructOptions& o, std::ostream& out) {
    const auto rows = reconstruct_demo(o);
    const auto csv = format_reconstruct_csv(rows);
    out << csv;
    if (o.out.empty()) return;
    StagedDir dir(o.out, o.force);
    write_text(dir.path() / "reconstruct.csv", csv);
    json m;
    m["command"] = "reconstruct-demo";
    m["version"] = kVersion;
    m["kind"] = sensing::kind_name(o.kind);
    m["amplitude"] = reconstruct::amplitude_name(o.amplitude);
    m["rows"] = o.rows;
    m["cols"] = o.cols;
    m["sparsity"] = o.sparsity;
    m["trials"] = o.trials;
    m["seed"] = o.seed;
    m["ista"] = {{"lambda", "1e-3 * max|A^T y|"}, {"max_iters", reconstruct::IstaOptions{}.max_iters},
                 {"tol", reconstruct::IstaOptions{}.tol}};
    eval::write_json(m, dir.path() / "reconstruct.json");
    dir.commit();
}

std::vector<BenchRow> run_bench(const BenchOptions& o) {
    using clock = std::chrono::steady_clock;
    if (o.reps == 0) throw ConfigError("--reps must be positive");
    for (auto n : o.sizes)
        if (n == 0 || n > 8192) throw ConfigError("bench sizes must lie in [1, 8192], got " + std::to_string(n));

    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t h = v.size() / 2;
        return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    };
    volatile double sink = 0.0;

    std::vector<BenchRow> rows;
    for (auto n : o.sizes) {
        for (auto kind : {sensing::Kind::Circulant, sensing::Kind::Toeplitz}) {
            const auto matrix = sensing::SensingMatrix::build({kind, n, n, o.seed});
            const Eigen::MatrixXd dense = matrix.dense();
            Xoshiro256ss rng(o.seed + 1);
            Eigen::VectorXd x(static_cast<Eigen::Index>(n));
            for (auto& v : x) v = rng.normal();

            Eigen::VectorXd yd(static_cast<Eigen::Index>(n));
            yd.noalias() = dense * x;  // warm-up
            Eigen::VectorXd ys = sensing::apply_structured(matrix, x);

            std::vector<double> td, ts;
            for (std::size_t r = 0; r < o.reps; ++r) {
                auto t0 = clock::now();
                yd.noalias() = dense * x;
                auto t1 = clock::now();
                ys = sensing::apply_structured(matrix, x);
                auto t2 = clock::now();
                sink = sink + yd[0] + ys[0];
                td.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                ts.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
            }
            BenchRow row;
            row.kind = kind;
            row.n = n;
            row.dense_ms = median(td);
            row.structured_ms = median(ts);
            row.speedup = row.structured_ms > 0 ? row.dense_ms / row.structured_ms : 0.0;
            row.max_abs_diff = (yd - ys).cwiseAbs().maxCoeff();
            if (!(row.max_abs_diff < kBenchTolerance))
                throw DataError(std::string(sensing::kind_name(kind)) + " N=" + std::to_string(n) +
                                ": structured and dense results differ by " + fmt("%.3e", row.max_abs_diff));
            rows.push_back(row);
        }
    }
    return rows;
}

std::string format_bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "kind,n,dense_ms,structured_ms,speedup,max_abs_diff\n";
    for (const auto& r : rows)
        out += std::string(sensing::kind_name(r.kind)) + "," + std::to_string(r.n) + "," + fmt("%.6f", r.dense_ms) +
               "," + fmt("%.6f", r.structured_ms) + "," + fmt("%.2f", r.speedup) + "," + fmt("%.3e", r.max_abs_diff) +
               "\n";
    return out;
}

void cmd_bench(const BenchOptions& o, std::ostream& out) {
    const auto csv = format_bench_csv(run_bench(o));
    out << csv;
    if (o.out.empty()) return;
    StagedDir dir(o.out, o.force);
    write_text(dir.path() / "bench.csv", csv);
    json m;
    m["command"] = "bench";
    m["version"] = kVersion;
    m["sizes"] = o.sizes;
    m["seed"] = o.seed;
    m["reps"] = o.reps;
    m["dense_path"] = "precomputed dense matrix-vector product";
    m["structured_path"] = "real FFT (circulant embedding for Toeplitz)";
    eval::write_json(m, dir.path() / "bench.json");
    dir.commit();
}

}  // namespace cslnet::cli
