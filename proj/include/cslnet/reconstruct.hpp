#pragma once

// Sparse recovery from compressed measurements. Used to check that the
// sensing matrices behave as compressive-sensing operators; the
// classification pipeline never reconstructs.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cslnet/rng.hpp"
#include "cslnet/sensing.hpp"

namespace cslnet::reconstruct {

struct SparseSignal {
    Eigen::VectorXd values;

    std::size_t sparsity() const noexcept;
    std::vector<std::size_t> support() const;
};

/// Nonzero values: random signs (+1 / -1) or standard normal draws.
enum class Amplitude { Sign, Gaussian };

std::string_view amplitude_name(Amplitude amplitude) noexcept;
Amplitude parse_amplitude(std::string_view text);

/// s distinct positions drawn uniformly, filled according to `amplitude`.
SparseSignal random_sparse_signal(std::size_t n, std::size_t s, Xoshiro256ss& rng,
                                  Amplitude amplitude = Amplitude::Sign);

struct RecoveryResult {
    Eigen::VectorXd estimate;
    double residual_norm = 0.0;  // ||Phi * estimate - y||_2
    std::size_t iterations = 0;
    bool converged = false;
    /// Selected columns in selection order (OMP, brute force).
    std::vector<std::size_t> support;
    /// ISTA only: composite objective before the first step and after every step.
    std::vector<double> objective;
};

/// Indices with |v_i| > threshold, ascending.
std::vector<std::size_t> support_of(const Eigen::VectorXd& v, double threshold = 0.0);

/// Largest eigenvalue of Phi^T Phi by power iteration from the all-ones vector.
double lipschitz_constant(const sensing::SensingMatrix& matrix, std::size_t iterations = 50);

/// 1e-3 * ||Phi^T y||_inf.
double default_lambda(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix);

struct IstaOptions {
    std::size_t max_iters = 5000;
    double tol = 1e-8;
    std::size_t power_iterations = 50;
    double step_fraction = 0.99;  // step = step_fraction / L
};

/// Iterative soft-thresholding for min 1/2 ||Phi x - y||^2 + lambda ||x||_1,
/// starting from x = 0. Converged means ||x_{k+1} - x_k||_2 < tol.
RecoveryResult ista_l1(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, double lambda,
                       const IstaOptions& options = {});

/// Orthogonal matching pursuit, s greedy steps with a least-squares refit
/// after each. Each step picks the unused column maximizing
/// |<phi_j, r>| / ||phi_j|| (zero columns are never picked). Stops early once
/// the residual vanishes.
RecoveryResult omp(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, std::size_t s);

/// Exhaustive search over every support of size <= s (N <= 20, s <= 3).
/// Supports are visited by size, then lexicographically; a later support
/// only wins with a strictly smaller residual (beyond 1e-12 relative), so
/// ties resolve to the smallest, then lexicographically first, support.
RecoveryResult brute_force_l0(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, std::size_t s);

}  // namespace cslnet::reconstruct
