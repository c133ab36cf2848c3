#include "cslnet/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cslnet/errors.hpp"

namespace cslnet::reconstruct {

namespace {

void check_measurement(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, const char* who) {
    if (static_cast<std::size_t>(y.size()) != matrix.rows())
        throw ConfigError(std::string(who) + ": measurement length " + std::to_string(y.size()) + " != rows " +
                          std::to_string(matrix.rows()));
}

double soft(double v, double threshold) {
    if (v > threshold) return v - threshold;
    if (v < -threshold) return v + threshold;
    return 0.0;
}

struct LeastSquares {
    Eigen::VectorXd coef;
    bool full_rank = false;
};

LeastSquares solve_on_support(const Eigen::MatrixXd& phi, const std::vector<std::size_t>& support,
                              const Eigen::VectorXd& y) {
    Eigen::MatrixXd sub(phi.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k)
        sub.col(static_cast<Eigen::Index>(k)) = phi.col(static_cast<Eigen::Index>(support[k]));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    LeastSquares out;
    out.full_rank = qr.rank() == sub.cols();
    if (out.full_rank) out.coef = qr.solve(y);
    return out;
}

Eigen::VectorXd scatter(std::size_t n, const std::vector<std::size_t>& support, const Eigen::VectorXd& coef) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < support.size(); ++k)
        x[static_cast<Eigen::Index>(support[k])] = coef[static_cast<Eigen::Index>(k)];
    return x;
}

}  // namespace

std::size_t SparseSignal::sparsity() const noexcept {
    return static_cast<std::size_t>((values.array() != 0.0).count());
}

std::vector<std::size_t> SparseSignal::support() const { return support_of(values); }

SparseSignal random_sparse_signal(std::size_t n, std::size_t s, Xoshiro256ss& rng, Amplitude amplitude) {
    if (s > n) throw ConfigError("sparsity " + std::to_string(s) + " exceeds length " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first s slots become the support.
    for (std::size_t i = 0; i < s; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    SparseSignal signal{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
    for (std::size_t i = 0; i < s; ++i)
        signal.values[static_cast<Eigen::Index>(idx[i])] =
            amplitude == Amplitude::Sign ? ((rng.next() >> 63) ? -1.0 : 1.0) : rng.normal();
    return signal;
}

std::string_view amplitude_name(Amplitude amplitude) noexcept {
    return amplitude == Amplitude::Sign ? "sign" : "gaussian";
}

Amplitude parse_amplitude(std::string_view text) {
    if (text == "sign") return Amplitude::Sign;
    if (text == "gaussian") return Amplitude::Gaussian;
    throw ConfigError("amplitude must be 'sign' or 'gaussian', got '" + std::string(text) + "'");
}

std::vector<std::size_t> support_of(const Eigen::VectorXd& v, double threshold) {
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > threshold) out.push_back(static_cast<std::size_t>(i));
    return out;
}

double lipschitz_constant(const sensing::SensingMatrix& matrix, std::size_t iterations) {
    const Eigen::MatrixXd phi = matrix.dense();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(phi.cols()) / std::sqrt(static_cast<double>(phi.cols()));
    double estimate = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = phi.transpose() * (phi * v);
        estimate = w.norm();
        if (estimate == 0.0) return 0.0;
        v = w / estimate;
    }
    return estimate;
}

double default_lambda(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix) {
    check_measurement(y, matrix, "default_lambda");
    const Eigen::VectorXd corr = matrix.dense().transpose() * y;
    return 1e-3 * corr.cwiseAbs().maxCoeff();
}

RecoveryResult ista_l1(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, double lambda,
                       const IstaOptions& options) {
    check_measurement(y, matrix, "ista_l1");
    if (!(lambda > 0.0)) throw ConfigError("ista_l1: lambda must be positive");

    const Eigen::MatrixXd phi = matrix.dense();
    const double lip = lipschitz_constant(matrix, options.power_iterations);
    const double step = lip > 0.0 ? options.step_fraction / lip : 1.0;
    const double threshold = step * lambda;

    auto objective = [&](const Eigen::VectorXd& x) {
        return 0.5 * (phi * x - y).squaredNorm() + lambda * x.lpNorm<1>();
    };

    RecoveryResult result;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(phi.cols());
    result.objective.push_back(objective(x));
    for (std::size_t it = 0; it < options.max_iters; ++it) {
        const Eigen::VectorXd grad = phi.transpose() * (phi * x - y);
        Eigen::VectorXd next = x - step * grad;
        for (Eigen::Index i = 0; i < next.size(); ++i) next[i] = soft(next[i], threshold);
        const double change = (next - x).norm();
        x = std::move(next);
        result.objective.push_back(objective(x));
        result.iterations = it + 1;
        if (change < options.tol) {
            result.converged = true;
            break;
        }
    }
    result.residual_norm = (phi * x - y).norm();
    result.support = support_of(x);
    result.estimate = std::move(x);
    return result;
}

RecoveryResult omp(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, std::size_t s) {
    check_measurement(y, matrix, "omp");
    if (s < 1 || s > matrix.rows())
        throw ConfigError("omp: sparsity " + std::to_string(s) + " outside [1, " + std::to_string(matrix.rows()) + "]");

    const Eigen::MatrixXd phi = matrix.dense();
    const Eigen::VectorXd col_norm = phi.colwise().norm().transpose();
    const double stop = 1e-14 * std::max(1.0, y.norm());
    RecoveryResult result;
    Eigen::VectorXd residual = y;
    Eigen::VectorXd coef;
    std::vector<bool> taken(matrix.cols(), false);

    while (result.support.size() < s && residual.norm() > stop) {
        const Eigen::VectorXd corr = phi.transpose() * residual;
        Eigen::Index best = -1;
        double best_abs = -1.0;
        for (Eigen::Index j = 0; j < corr.size(); ++j) {
            if (taken[static_cast<std::size_t>(j)] || col_norm[j] == 0.0) continue;
            const double score = std::abs(corr[j]) / col_norm[j];
            if (score > best_abs) {
                best_abs = score;
                best = j;
            }
        }
        if (best < 0) break;
        taken[static_cast<std::size_t>(best)] = true;
        result.support.push_back(static_cast<std::size_t>(best));

        auto ls = solve_on_support(phi, result.support, y);
        if (!ls.full_rank) throw DataError("omp: singular least-squares subproblem at step " +
                                           std::to_string(result.support.size()));
        coef = std::move(ls.coef);
        residual = y - phi * scatter(matrix.cols(), result.support, coef);
        ++result.iterations;
    }

    result.estimate = result.support.empty() ? Eigen::VectorXd::Zero(phi.cols())
                                             : scatter(matrix.cols(), result.support, coef);
    result.residual_norm = (phi * result.estimate - y).norm();
    result.converged = true;
    return result;
}

RecoveryResult brute_force_l0(const Eigen::VectorXd& y, const sensing::SensingMatrix& matrix, std::size_t s) {
    check_measurement(y, matrix, "brute_force_l0");
    const std::size_t n = matrix.cols();
    if (n > 20) throw ConfigError("brute_force_l0: N = " + std::to_string(n) + " exceeds the limit of 20");
    if (s > 3) throw ConfigError("brute_force_l0: sparsity " + std::to_string(s) + " exceeds the limit of 3");

    const Eigen::MatrixXd phi = matrix.dense();
    const double tie = 1e-12 * std::max(1.0, y.norm());

    std::vector<std::size_t> best_support;
    Eigen::VectorXd best_coef;
    double best_residual = y.norm();
    std::size_t visited = 1;  // the empty support

    std::vector<std::size_t> current;
    auto consider = [&] {
        ++visited;
        auto ls = solve_on_support(phi, current, y);
        if (!ls.full_rank) return;
        const double res = (y - phi * scatter(n, current, ls.coef)).norm();
        if (res < best_residual - tie) {
            best_residual = res;
            best_support = current;
            best_coef = std::move(ls.coef);
        }
    };
    // Depth-first combinations of a fixed size in lexicographic order.
    auto enumerate = [&](auto&& self, std::size_t start, std::size_t size) -> void {
        if (current.size() == size) {
            consider();
            return;
        }
        for (std::size_t j = start; j < n; ++j) {
            current.push_back(j);
            self(self, j + 1, size);
            current.pop_back();
        }
    };
    for (std::size_t size = 1; size <= std::min(s, n); ++size) enumerate(enumerate, 0, size);

    RecoveryResult result;
    result.estimate = best_support.empty() ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))
                                           : scatter(n, best_support, best_coef);
    result.residual_norm = (phi * result.estimate - y).norm();
    result.support = std::move(best_support);
    result.iterations = visited;
    result.converged = true;
    return result;
}

}  // namespace cslnet::reconstruct
