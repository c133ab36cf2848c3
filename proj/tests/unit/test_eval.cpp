#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "unit/test_helpers.hpp"

#include "cslnet/errors.hpp"
#include "cslnet/eval.hpp"
#include "cslnet/rng.hpp"

using namespace cslnet;
using namespace cslnet::eval;

namespace {

std::vector<int> make_labels(std::size_t neg, std::size_t pos) {
    std::vector<int> l(neg, 0);
    l.insert(l.end(), pos, 1);
    return l;
}

std::vector<std::size_t> merged(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    return a;
}

// Label-shifted Gaussian noise, 3 x 8 x 8.
std::vector<features::FeatureTensor> separable_tensors(const std::vector<int>& labels, std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    std::vector<features::FeatureTensor> out;
    for (int y : labels) {
        features::FeatureTensor t;
        for (auto& ch : t.channels) {
            ch.resize(8, 8);
            for (auto& v : ch.reshaped()) v = rng.normal() + (y ? 1.0 : -1.0);
        }
        out.push_back(std::move(t));
    }
    return out;
}

ExperimentSetup small_setup() {
    ExperimentSetup s;
    s.network.input = {3, 8, 8};
    s.network.conv_channels = {4};
    s.network.hidden = {8};
    s.train.epochs = 15;
    s.train.batch_size = 8;
    s.init_seed = 5;
    return s;
}

}  // namespace

TEST_CASE("holdout split examples") {
    const auto labels = make_labels(100, 100);
    const auto s = holdout_split(labels, 0.2, 1);
    CHECK(s.test.size() == 40);
    CHECK(s.train.size() == 160);
    std::size_t pos = 0;
    for (auto i : s.test) pos += labels[i];
    CHECK(pos == 20);
    CHECK(merged(s.train, s.test).size() == 200);
    std::vector<std::size_t> all(200);
    std::iota(all.begin(), all.end(), 0);
    CHECK(merged(s.train, s.test) == all);

    const auto again = holdout_split(labels, 0.2, 1);
    CHECK(again.test == s.test);
    CHECK(holdout_split(labels, 0.2, 2).test != s.test);

    // 6.5% of 349 + 397 samples: round(22.685) + round(25.805) = 23 + 26.
    const auto clinical = holdout_split(make_labels(397, 349), 0.065, 3);
    CHECK(clinical.test.size() == 49);
    CHECK(std::abs(static_cast<double>(clinical.test.size()) - 0.065 * 746) <= 1.5);

    CHECK_THROWS_AS(holdout_split(make_labels(1, 10), 0.2, 1), ConfigError);
    CHECK_THROWS_AS(holdout_split(labels, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(holdout_split(labels, 1.0, 1), ConfigError);
}

TEST_CASE("k-fold examples") {
    const auto even = stratified_kfold(make_labels(50, 50), 5, 1);
    CHECK(even.folds.size() == 5);
    CHECK(even.pool.empty());
    for (const auto& c : even.class_counts) CHECK(c == std::vector<std::size_t>{10, 10});

    const auto labels = make_labels(397, 349);  // 0 = non-COVID, 1 = COVID
    const auto plan = stratified_kfold(labels, 5, 7);
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(plan.class_counts[f] == std::vector<std::size_t>{69, 69});
        CHECK(plan.folds[f].size() == 138);
    }
    std::size_t pool_pos = 0;
    for (auto i : plan.pool) pool_pos += labels[i];
    CHECK(pool_pos == 349 - 5 * 69);
    CHECK(plan.pool.size() - pool_pos == 397 - 5 * 69);

    CHECK_THROWS_AS(stratified_kfold(make_labels(3, 10), 4, 1), ConfigError);
    CHECK_THROWS_AS(stratified_kfold(make_labels(10, 10), 1, 1), ConfigError);
}

TEST_CASE("property: fold plans partition and never leak") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto labels = make_labels(30 + seed, 25 + 2 * seed);
        const auto plan = stratified_kfold(labels, 4, seed);
        std::vector<std::size_t> all = plan.pool;
        for (const auto& f : plan.folds) all = merged(all, f);
        std::vector<std::size_t> expect(labels.size());
        std::iota(expect.begin(), expect.end(), 0);
        CHECK(all == expect);
        for (std::size_t f = 0; f < plan.k; ++f) {
            const auto train = plan.train_indices(f);
            std::vector<std::size_t> both;
            std::set_intersection(train.begin(), train.end(), plan.folds[f].begin(), plan.folds[f].end(),
                                  std::back_inserter(both));
            CHECK(both.empty());
            CHECK(train.size() + plan.folds[f].size() == labels.size());
            CHECK(plan.class_counts[f] == plan.class_counts[0]);
            CHECK(plan.class_counts[f][0] == plan.class_counts[f][1]);
        }
        CHECK(stratified_kfold(labels, 4, seed).hash() == plan.hash());
    }
}

TEST_CASE("fold ids") {
    CHECK(FoldId::fold(3).str() == "3");
    CHECK(FoldId::holdout().str() == "holdout");
    CHECK(FoldId::mean().str() == "mean");
    for (const auto& id : {FoldId::fold(0), FoldId::fold(12), FoldId::holdout(), FoldId::mean()})
        CHECK(FoldId::parse(id.str()) == id);
    CHECK_THROWS(FoldId::parse("x1"));
}

TEST_CASE("summary uses the sample standard deviation") {
    std::vector<MetricsRecord> r(3);
    r[0].accuracy = 0.5;
    r[1].accuracy = 0.7;
    r[2].accuracy = 0.9;
    r[0].val_loss = 1.0;
    r[1].val_loss = 1.0;
    r[2].val_loss = 1.0;
    const auto s = summarize(r);
    CHECK(std::abs(s.mean_accuracy - 0.7) < 1e-12);
    CHECK(std::abs(s.std_accuracy - 0.2) < 1e-12);
    CHECK(s.std_val_loss == 0.0);
}

TEST_CASE("run_cv on a separable task") {
    const auto labels = make_labels(40, 40);
    const auto tensors = separable_tensors(labels, 1);
    const auto result = run_cv(tensors, labels, 2, 3, small_setup(), "GCT");
    REQUIRE(result.records.size() == 2);
    for (std::size_t f = 0; f < 2; ++f) {
        CHECK(result.records[f].accuracy >= 0.95);
        CHECK(result.records[f].fold == FoldId::fold(f));
        CHECK(result.records[f].epochs_run == 15);
        CHECK(result.records[f].seed == 5);
    }
    const double mean = (result.records[0].accuracy + result.records[1].accuracy) / 2;
    CHECK(std::abs(result.summary.mean_accuracy - mean) < 1e-12);
    CHECK(result.fold_hash == stratified_kfold(labels, 2, 3).hash_hex());
}

TEST_CASE("run_holdout records the holdout fold") {
    const auto labels = make_labels(30, 30);
    const auto tensors = separable_tensors(labels, 2);
    const auto split = holdout_split(labels, 0.2, 1);
    const auto r = run_holdout(tensors, labels, split, small_setup(), "none");
    CHECK(r.record.fold == FoldId::holdout());
    CHECK(r.record.combo == "none");
    CHECK(r.record.accuracy >= 0.95);
    CHECK(r.training.history.size() == 15);
}

TEST_CASE("run_grid shares one fold plan and is repeatable") {
    const auto ds = data::synthesize_dataset(12, 4, data::kEasy, 16);
    const auto bank = features::MatrixBank::build(8, 16, 16, 1);
    auto setup = small_setup();
    setup.train.epochs = 2;
    const std::vector<features::ChannelCombo> one{features::ChannelCombo::parse("GGG")};
    const auto g1 = run_grid(ds, bank, one, setup, 3, 9);
    CHECK(g1.rows.size() == 1);
    CHECK(g1.rows[0].cv.records.size() == 3);

    const auto all = features::enumerate_combos(true);
    const auto g10 = run_grid(ds, bank, all, setup, 3, 9);
    CHECK(g10.rows.size() == 10);
    for (const auto& row : g10.rows) {
        CHECK(row.cv.records.size() == 3);
        CHECK(row.cv.fold_hash == g10.fold_hash);
    }
    CHECK(g10.rows[0].combo == "GGG");
    CHECK(format_csv(g10.rows[0].cv.records) == format_csv(g1.rows[0].cv.records));
    CHECK_THROWS_AS(run_grid(ds, bank, {}, setup, 3, 9), ConfigError);
}

TEST_CASE("extract_all and to_volume") {
    const auto ds = data::synthesize_dataset(2, 4, data::kEasy, 16);
    const auto bank = features::MatrixBank::build(8, 16, 16, 1);
    const auto t = extract_all(ds, features::ChannelCombo::parse("GCT"), bank, 8);
    CHECK(t.size() == 4);
    CHECK(t[0].channels[0].rows() == 8);
    const auto base = extract_all(ds, std::nullopt, bank, 8);
    CHECK(base[0].channels[1].rows() == 8);

    const auto v = to_volume(t[1]);
    CHECK(v.shape == nn::Shape3{3, 8, 8});
    CHECK(v.at(2, 3, 5) == t[1].channels[2](3, 5));
}

TEST_CASE("csv export") {
    CHECK(format_csv({}) == "combo,fold,seed,accuracy,val_loss,epochs_run\n");
    MetricsRecord r{"GCT", FoldId::fold(2), 42, 0.9375, 0.1234567, 20};
    const std::vector<MetricsRecord> one{r};
    const auto text = format_csv(one);
    CHECK(text == "combo,fold,seed,accuracy,val_loss,epochs_run\nGCT,2,42,0.937500,0.123457,20\n");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find('\r') == std::string::npos);

    std::vector<MetricsRecord> many{r, {"none", FoldId::holdout(), 1, 1.0, 0.0, 5},
                                    {"TTT", FoldId::mean(), 0, 0.5, 2.5, 20}};
    const auto dir = test::scratch_dir("eval");
    export_csv(many, dir / "m.csv");
    const auto back = read_csv(dir / "m.csv");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].combo == many[i].combo);
        CHECK(back[i].fold == many[i].fold);
        CHECK(back[i].seed == many[i].seed);
        CHECK(std::abs(back[i].accuracy - many[i].accuracy) <= 5e-7);
        CHECK(std::abs(back[i].val_loss - many[i].val_loss) <= 5e-7);
        CHECK(back[i].epochs_run == many[i].epochs_run);
    }
    CHECK_THROWS_AS(parse_csv("a,b\n"), DataError);
    CHECK_THROWS_AS(export_csv(many, dir / "no" / "such" / "dir.csv"), IoError);
}

TEST_CASE("json helpers are deterministic") {
    const auto dir = test::scratch_dir("eval_json");
    nlohmann::json doc;
    doc["z"] = 1;
    doc["a"] = to_json(nn::TrainConfig{});
    write_json(doc, dir / "a.json");
    std::ifstream in(dir / "a.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    CHECK(text.back() == '\n');
    CHECK(text.find("\"a\"") < text.find("\"z\""));
    CHECK(spec_digest(nn::NetworkSpec{}).size() == 16);
    CHECK(spec_digest(nn::NetworkSpec{}) != spec_digest(small_setup().network));
}
