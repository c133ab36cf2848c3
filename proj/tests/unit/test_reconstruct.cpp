#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "cslnet/errors.hpp"
#include "cslnet/reconstruct.hpp"

using namespace cslnet;
using namespace cslnet::reconstruct;
using sensing::Kind;
using sensing::SensingMatrix;

namespace {

SensingMatrix identity(std::size_t n) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    c[0] = 1.0;
    return SensingMatrix::from_generator({Kind::Circulant, n, n, 0}, c);
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

bool monotone(const std::vector<double>& f) {
    for (std::size_t k = 1; k < f.size(); ++k)
        if (f[k] > f[k - 1] * (1 + 1e-12) + 1e-15) return false;
    return true;
}

}  // namespace

TEST_CASE("random sparse signal") {
    Xoshiro256ss rng(1);
    const auto x = random_sparse_signal(30, 5, rng);
    CHECK(x.values.size() == 30);
    CHECK(x.sparsity() == 5);
    CHECK(x.support().size() == 5);
    for (auto i : x.support()) CHECK(std::abs(x.values[i]) == 1.0);
    CHECK_THROWS_AS(random_sparse_signal(3, 4, rng), ConfigError);

    const auto g = random_sparse_signal(30, 5, rng, Amplitude::Gaussian);
    CHECK(g.sparsity() == 5);
    CHECK(parse_amplitude("gaussian") == Amplitude::Gaussian);
    CHECK(amplitude_name(Amplitude::Sign) == "sign");
    CHECK_THROWS_AS(parse_amplitude("uniform"), ConfigError);
}

TEST_CASE("ista on identity equals soft thresholding") {
    const auto r = ista_l1(Eigen::Vector3d(3, 0, -2), identity(3), 1.0);
    CHECK(r.converged);
    CHECK((r.estimate - Eigen::Vector3d(2, 0, -1)).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(monotone(r.objective));
}

TEST_CASE("ista with zero measurement") {
    const auto m = SensingMatrix::build({Kind::Gaussian, 8, 16, 3});
    const auto r = ista_l1(Eigen::VectorXd::Zero(8), m, 0.1);
    CHECK(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(r.estimate.isZero(0.0));
}

TEST_CASE("ista recovers a sparse support") {
    const auto m = SensingMatrix::build({Kind::Gaussian, 32, 64, 2});
    Xoshiro256ss rng(2);
    const auto x = random_sparse_signal(64, 4, rng);
    const Eigen::VectorXd y = sensing::apply(m, x.values);
    const auto r = ista_l1(y, m, 1e-3);
    CHECK(support_of(r.estimate, 0.1) == x.support());
    CHECK(monotone(r.objective));
    CHECK(r.residual_norm == doctest::Approx((sensing::apply(m, r.estimate) - y).norm()).epsilon(1e-12));
}

TEST_CASE("ista rejects bad input") {
    const auto m = SensingMatrix::build({Kind::Gaussian, 8, 16, 3});
    CHECK_THROWS_AS(ista_l1(Eigen::VectorXd::Zero(8), m, 0.0), ConfigError);
    CHECK_THROWS_AS(ista_l1(Eigen::VectorXd::Zero(7), m, 0.1), ConfigError);
}

TEST_CASE("lipschitz constant matches the spectral norm") {
    const auto m = SensingMatrix::build({Kind::Toeplitz, 20, 40, 8});
    const Eigen::MatrixXd d = m.dense();
    const double top = Eigen::JacobiSVD<Eigen::MatrixXd>(d).singularValues()[0];
    CHECK(lipschitz_constant(m, 500) == doctest::Approx(top * top).epsilon(1e-6));
}

TEST_CASE("omp examples") {
    const auto r = omp(Eigen::Vector4d(0, 7, 0, 0), identity(4), 1);
    CHECK(r.estimate == Eigen::VectorXd(Eigen::Vector4d(0, 7, 0, 0)));
    CHECK(r.residual_norm == 0.0);

    const auto m = SensingMatrix::build({Kind::Gaussian, 10, 30, 5});
    Xoshiro256ss rng(9);
    Eigen::VectorXd y(10);
    for (auto& v : y) v = rng.normal();
    const auto full = omp(y, m, 10);
    CHECK(full.residual_norm < 1e-8);

    CHECK_THROWS_AS(omp(y, m, 0), ConfigError);
    CHECK_THROWS_AS(omp(y, m, 11), ConfigError);
}

TEST_CASE("omp ranks columns by normalized correlation") {
    // Column 0 = (3, 3) has the larger raw correlation with y = (1, 0), but
    // column 1 = (1, 0) explains y exactly.
    Eigen::VectorXd table(4);
    table << 3, 1, 3, 0;
    const auto m = SensingMatrix::from_generator({Kind::Gaussian, 2, 2, 0}, table);
    const auto r = omp(Eigen::Vector2d(1, 0), m, 1);
    CHECK(r.support == std::vector<std::size_t>{1});
    CHECK(r.residual_norm < 1e-12);
    CHECK(brute_force_l0(Eigen::Vector2d(1, 0), m, 1).support == r.support);
}

TEST_CASE("property: omp agrees with exhaustive search for s = 1") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = SensingMatrix::build({Kind::Gaussian, 8, 12, seed});
        Xoshiro256ss rng(seed + 100);
        const auto x = random_sparse_signal(12, 1, rng, Amplitude::Gaussian);
        const Eigen::VectorXd y = sensing::apply(m, x.values);
        CHECK(omp(y, m, 1).support == brute_force_l0(y, m, 1).support);
    }
}

TEST_CASE("property: omp support grows by one, residual orthogonal") {
    const auto m = SensingMatrix::build({Kind::Gaussian, 20, 50, 6});
    const Eigen::MatrixXd d = m.dense();
    Xoshiro256ss rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd y(20);
        for (auto& v : y) v = rng.normal();
        for (std::size_t s = 1; s <= 8; ++s) {
            const auto r = omp(y, m, s);
            CHECK(r.support.size() == s);
            CHECK(std::set<std::size_t>(r.support.begin(), r.support.end()).size() == s);
            CHECK(support_of(r.estimate).size() <= s);
            const Eigen::VectorXd resid = d * r.estimate - y;
            for (auto j : r.support) CHECK(std::abs(d.col(static_cast<Eigen::Index>(j)).dot(resid)) < 1e-8);
            if (s > 1) {
                const auto prev = omp(y, m, s - 1);
                CHECK(std::equal(prev.support.begin(), prev.support.end(), r.support.begin()));
            }
        }
    }
}

TEST_CASE("omp recovers s=3 supports at M=24, N=48") {
    const auto m = SensingMatrix::build({Kind::Gaussian, 24, 48, 4});
    Xoshiro256ss rng(4);
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
        const auto x = random_sparse_signal(48, 3, rng, Amplitude::Gaussian);
        const auto r = omp(sensing::apply(m, x.values), m, 3);
        hits += sorted(r.support) == x.support();
    }
    CHECK(hits >= 95);
}

TEST_CASE("brute force examples") {
    const auto m = SensingMatrix::build({Kind::Gaussian, 4, 6, 12});
    Xoshiro256ss rng(12);
    for (int t = 0; t < 10; ++t) {
        const auto x = random_sparse_signal(6, 1, rng);
        const Eigen::VectorXd y = sensing::apply(m, x.values);
        const auto b = brute_force_l0(y, m, 1);
        const auto o = omp(y, m, 1);
        CHECK(b.estimate == o.estimate);
    }

    const auto z = brute_force_l0(Eigen::VectorXd::Zero(4), m, 2);
    CHECK(z.estimate.isZero(0.0));

    const auto m86 = SensingMatrix::build({Kind::Gaussian, 6, 8, 13});
    for (int t = 0; t < 10; ++t) {
        const auto x = random_sparse_signal(8, 2, rng);
        const auto r = brute_force_l0(sensing::apply(m86, x.values), m86, 2);
        CHECK(r.residual_norm < 1e-10);
        CHECK(sorted(r.support) == x.support());
    }

    CHECK_THROWS_AS(brute_force_l0(Eigen::VectorXd::Zero(4), SensingMatrix::build({Kind::Gaussian, 4, 21, 1}), 1),
                    ConfigError);
    CHECK_THROWS_AS(brute_force_l0(Eigen::VectorXd::Zero(4), m, 4), ConfigError);
}

TEST_CASE("brute force breaks ties towards the first support") {
    Eigen::VectorXd table(6);
    table << 1, 1, 0, 0, 0, 1;  // columns 0 and 1 identical
    const auto m = SensingMatrix::from_generator({Kind::Gaussian, 2, 3, 0}, table);
    const auto r = brute_force_l0(Eigen::Vector2d(2, 0), m, 1);
    CHECK(r.support == std::vector<std::size_t>{0});
}

TEST_CASE("property: noiseless consistency") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = SensingMatrix::build({Kind::Toeplitz, 16, 32, seed});
        Xoshiro256ss rng(seed);
        const auto x = random_sparse_signal(32, 2, rng);
        const Eigen::VectorXd y = sensing::apply(m, x.values);
        for (const auto& r : {omp(y, m, 2), ista_l1(y, m, 1e-4)}) {
            if (r.converged && r.residual_norm < 1e-8)
                CHECK((sensing::apply(m, r.estimate) - y).cwiseAbs().maxCoeff() < 1e-7);
        }
    }
}
