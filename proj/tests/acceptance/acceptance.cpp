// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--cli PATH] [criterion ...]
// With no criterion numbers every criterion runs. --cli points criterion 8
// at the built command-line tool; without it the commands run in-process.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "cslnet/data.hpp"
#include "cslnet/eval.hpp"
#include "cslnet/features.hpp"
#include "cslnet/nn.hpp"
#include "cslnet/reconstruct.hpp"
#include "cslnet/rng.hpp"
#include "cslnet/sensing.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace cslnet;
using sensing::Kind;
using sensing::SensingMatrix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("cslnet_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// 1. Structured vs dense application.
Outcome structured_equivalence() {
    double worst = 0.0;
    std::size_t count = 0;
    for (auto kind : {Kind::Circulant, Kind::Toeplitz}) {
        for (std::size_t n : {64u, 120u, 256u, 1024u}) {
            for (std::uint64_t seed = 0; seed < 50; ++seed) {
                const std::size_t m = seed % 2 ? n : n / 2;
                const auto mat = SensingMatrix::build({kind, m, n, 1000 * n + seed});
                Xoshiro256ss rng(seed + 7);
                Eigen::VectorXd x(static_cast<Eigen::Index>(n));
                for (auto& v : x) v = rng.normal();
                const Eigen::VectorXd dense = mat.dense() * x;
                worst = std::max(worst, (sensing::apply_structured(mat, x) - dense).cwiseAbs().maxCoeff());
                ++count;
            }
        }
    }
    return {worst < 1e-10, std::to_string(count) + " matrices (50 seeds x 2 kinds x N in {64,120,256,1024}), max |diff| " +
                               fmt("%.3e", worst) + " (< 1e-10)"};
}

// 2. Backprop vs central finite differences.
Outcome gradient_check() {
    const auto spec = test::tiny_spec();
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        worst = std::max(worst, test::gradient_check(spec, seed).max_rel_error);
    return {worst < 1e-4 && spec.parameter_count() <= 2000,
            std::to_string(spec.parameter_count()) + " parameters, 5 seeds, eps 1e-5, max relative error " +
                fmt("%.3e", worst) + " (< 1e-4)"};
}

// 3. OMP recovery rate, OMP vs exhaustive agreement, ISTA monotonicity.
Outcome sparse_recovery() {
    using namespace reconstruct;
    const auto g = SensingMatrix::build({Kind::Gaussian, 32, 64, 3});
    Xoshiro256ss rng(3);
    int omp_hits = 0;
    std::size_t ista_steps = 0, ista_strict_rises = 0, ista_violations = 0;
    double worst_rise = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto x = random_sparse_signal(64, 4, rng, Amplitude::Gaussian);
        const Eigen::VectorXd y = sensing::apply(g, x.values);
        omp_hits += sorted(omp(y, g, 4).support) == x.support();

        const auto r = ista_l1(y, g, default_lambda(y, g));
        for (std::size_t k = 1; k < r.objective.size(); ++k) {
            ++ista_steps;
            const double prev = r.objective[k - 1], cur = r.objective[k];
            if (cur > prev) {
                ++ista_strict_rises;
                worst_rise = std::max(worst_rise, (cur - prev) / prev);
            }
            if (cur > prev * (1 + 1e-12) + 1e-15) ++ista_violations;
        }
    }

    // Sign spikes, the hardest amplitude model for greedy selection; reported only.
    Xoshiro256ss rng_sign(3);
    int sign_hits = 0;
    for (int t = 0; t < 100; ++t) {
        const auto x = random_sparse_signal(64, 4, rng_sign, Amplitude::Sign);
        sign_hits += sorted(omp(sensing::apply(g, x.values), g, 4).support) == x.support();
    }

    // N = 12: M >= 2 s ceil(log2 12) = 8 s, so s = 1 with M = 8.
    const auto small = SensingMatrix::build({Kind::Gaussian, 8, 12, 5});
    Xoshiro256ss rng_small(5);
    int agree = 0;
    for (int t = 0; t < 100; ++t) {
        const auto x = random_sparse_signal(12, 1, rng_small, Amplitude::Gaussian);
        const Eigen::VectorXd y = sensing::apply(small, x.values);
        agree += sorted(omp(y, small, 1).support) == sorted(brute_force_l0(y, small, 1).support);
    }
    // Outside the bound (s = 2, M = 8); reported only.
    int agree2 = 0;
    for (int t = 0; t < 100; ++t) {
        const auto x = random_sparse_signal(12, 2, rng_small, Amplitude::Gaussian);
        const Eigen::VectorXd y = sensing::apply(small, x.values);
        agree2 += sorted(omp(y, small, 2).support) == sorted(brute_force_l0(y, small, 2).support);
    }

    const bool pass = omp_hits >= 95 && agree >= 90 && ista_violations == 0;
    return {pass, "OMP exact support " + std::to_string(omp_hits) + "/100 (>= 95; sign-spike signals " +
                      std::to_string(sign_hits) + "/100, informational); OMP = L0 search " + std::to_string(agree) +
                      "/100 at N=12 M=8 s=1 (>= 90; s=2 outside the bound " + std::to_string(agree2) +
                      "/100, informational); ISTA " + std::to_string(ista_steps) + " steps, " +
                      std::to_string(ista_violations) + " increases beyond roundoff (" +
                      std::to_string(ista_strict_rises) + " bitwise rises, largest relative " +
                      fmt("%.1e", worst_rise) + ")"};
}

// 4. Fold plans for 349 + 397 samples.
Outcome fold_invariants() {
    std::vector<int> labels(397, data::kNegative);
    labels.insert(labels.end(), 349, data::kPositive);
    bool ok = true;
    std::size_t leaks = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto plan = eval::stratified_kfold(labels, 5, seed);
        std::vector<int> seen(labels.size(), 0);
        for (auto i : plan.pool) ++seen[i];
        for (std::size_t f = 0; f < 5; ++f) {
            ok &= plan.class_counts[f] == std::vector<std::size_t>{69, 69};
            std::size_t pos = 0;
            for (auto i : plan.folds[f]) {
                ++seen[i];
                pos += labels[i] == data::kPositive;
            }
            ok &= pos == 69 && plan.folds[f].size() == 138;
            const auto train = plan.train_indices(f);
            std::vector<std::size_t> both;
            std::set_intersection(train.begin(), train.end(), plan.folds[f].begin(), plan.folds[f].end(),
                                  std::back_inserter(both));
            leaks += both.size();
            ok &= train.size() + plan.folds[f].size() == labels.size();
        }
        ok &= std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
        ok &= plan.pool.size() == (349 - 345) + (397 - 345);
    }
    return {ok && leaks == 0, "20 seeds: 69 per class in every fold, folds + pool partition 746 indices, pool 4 + 52, " +
                                  std::to_string(leaks) + " leaked indices"};
}

// 5. Default pipeline on the easy synthetic task.
Outcome synthetic_learnability() {
    const auto dir = scratch("c5");
    cli::ExperimentOptions o;
    o.data.synthetic = 200;
    o.data.difficulty = "easy";
    o.combo = "GCT";
    o.out = dir / "run";
    std::ostringstream log;
    cli::cmd_train(o, log);
    const auto records = eval::read_csv(o.out / "metrics.csv");
    const double acc = records.at(0).accuracy;
    return {acc >= 0.95, "GCT, default network, 20 epochs, 400 images, 80 held out: accuracy " + fmt("%.4f", acc) +
                             " (>= 0.95; majority baseline 0.50)"};
}

// 6. Mixed channels versus single-kind triples at moderate difficulty.
Outcome compression_benefit() {
    const std::vector<std::string> combos{"GCT", "GGG", "CCC", "TTT"};
    std::vector<double> total(combos.size(), 0.0);
    std::string per_set;
    for (std::uint64_t set = 0; set < 3; ++set) {
        const auto dir = scratch("c6_" + std::to_string(set));
        cli::ExperimentOptions o;
        o.data.synthetic = 100;
        o.data.difficulty = "moderate";
        o.data.seed = 100 + set;
        o.combo = "GCT,GGG,CCC,TTT";
        o.k = 5;
        o.seed_matrix = 10 * set + 1;
        o.seed_split = 10 * set + 2;
        o.seed_init = 10 * set + 3;
        o.seed_shuffle = 10 * set + 4;
        o.out = dir / "run";
        std::ostringstream log;
        cli::cmd_cv(o, log);
        per_set += " set " + std::to_string(set) + ":";
        for (const auto& r : eval::read_csv(o.out / "metrics.csv")) {
            if (!(r.fold == eval::FoldId::mean())) continue;
            const auto c = static_cast<std::size_t>(std::find(combos.begin(), combos.end(), r.combo) - combos.begin());
            total.at(c) += r.accuracy;
            per_set += " " + r.combo + " " + fmt("%.3f", r.accuracy);
        }
        per_set += ";";
    }
    for (auto& t : total) t /= 3.0;
    const double best_single = std::max({total[1], total[2], total[3]});
    const bool pass = total[0] >= best_single - 0.02;
    return {pass, "mean 5-fold accuracy over 3 paired seed sets: GCT " + fmt("%.4f", total[0]) + ", GGG " +
                      fmt("%.4f", total[1]) + ", CCC " + fmt("%.4f", total[2]) + ", TTT " + fmt("%.4f", total[3]) +
                      " (GCT >= best single - 0.02 = " + fmt("%.4f", best_single - 0.02) + ");" + per_set};
}

// 7. FFT path speed at N = 4096.
Outcome performance() {
    cli::BenchOptions o;
    o.sizes = {64, 120, 256, 1024, 4096};
    o.reps = 20;
    const auto rows = cli::run_bench(o);
    double speedup = 0.0, worst = 0.0;
    for (const auto& r : rows) {
        worst = std::max(worst, r.max_abs_diff);
        if (r.kind == Kind::Circulant && r.n == 4096) speedup = r.speedup;
    }
    return {speedup >= 10.0 && worst < 1e-10, "circulant N=4096 median of 20: " + fmt("%.1f", speedup) +
                                                  "x faster than dense (>= 10x); max |diff| over all sizes " +
                                                  fmt("%.3e", worst) + " (< 1e-10)"};
}

int run_process(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 8. Two identical cv runs.
Outcome determinism(const std::string& cli_path) {
    const auto dir = scratch("c8");
    const std::string args =
        " cv --synthetic 24 --difficulty moderate --combo GCT,TTT --k 3 --epochs 3 --seed-matrix 5 --seed-split 6"
        " --seed-init 7 --seed-shuffle 8 --seed-data 9";
    for (const char* run : {"a", "b"}) {
        if (!cli_path.empty()) {
            const int code = run_process(cli_path + " --quiet" + args + " --out " + (dir / run).string());
            if (code != 0) return {false, "cslnet exited with " + std::to_string(code)};
        } else {
            cli::ExperimentOptions o;
            o.data.synthetic = 24;
            o.data.difficulty = "moderate";
            o.data.seed = 9;
            o.combo = "GCT,TTT";
            o.k = 3;
            o.epochs = 3;
            o.seed_matrix = 5;
            o.seed_split = 6;
            o.seed_init = 7;
            o.seed_shuffle = 8;
            o.out = dir / run;
            std::ostringstream log;
            cli::cmd_cv(o, log);
        }
    }
    const bool csv = slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv");
    const bool manifest = slurp(dir / "a" / "metrics.json") == slurp(dir / "b" / "metrics.json");
    const bool nonempty = !slurp(dir / "a" / "metrics.csv").empty();
    return {csv && manifest && nonempty, std::string(cli_path.empty() ? "in-process" : "separate processes") +
                                             ": metrics.csv " + (csv ? "identical" : "DIFFERS") + ", metrics.json " +
                                             (manifest ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli_path;
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) cli_path = argv[++i];
        else selected.insert(std::atoi(a.c_str()));
    }

    // Budgets in seconds: wall clock, except criterion 5 which is process CPU time.
    const std::vector<double> budget{60, 120, 180, 10, 900, 0, 0, 0};
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"structured-operator equivalence", structured_equivalence},
        {"gradient check", gradient_check},
        {"sparse-recovery oracle", sparse_recovery},
        {"fold-plan invariants", fold_invariants},
        {"end-to-end synthetic learnability", synthetic_learnability},
        {"compression benefit", compression_benefit},
        {"performance", performance},
        {"determinism", [&] { return determinism(cli_path); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        const std::clock_t c0 = std::clock();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double cpu = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
        std::string timing = fmt("%.1f s", secs) + ", cpu " + fmt("%.1f s", cpu);
        if (budget[i] > 0) {
            const double used = id == 5 ? cpu : secs;
            timing += fmt(", budget %.0f s", budget[i]);
            if (used >= budget[i]) {
                o.pass = false;
                timing += " EXCEEDED";
            }
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
                  << timing << ")" << std::endl;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
