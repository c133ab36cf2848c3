#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>

#include <Eigen/Dense>

namespace cslnet::sensing {

enum class Kind : std::uint8_t { Gaussian = 0, Circulant = 1, Toeplitz = 2 };

/// 'G', 'C' or 'T'.
char kind_letter(Kind kind) noexcept;
Kind kind_from_letter(char letter);
std::string_view kind_name(Kind kind) noexcept;

struct MatrixSpec {
    Kind kind = Kind::Gaussian;
    std::size_t rows = 0;  // M
    std::size_t cols = 0;  // N
    std::uint64_t seed = 0;

    bool operator==(const MatrixSpec&) const = default;
};

namespace detail {
struct SpectralPlan;
}

/// A seeded M x N measurement operator.
///
/// Storage depends on the kind:
///   Gaussian   all M*N entries, row-major
///   Circulant  c of length N,       entry(i, j) = c[(j - i) mod N]
///   Toeplitz   t of length M+N-1,   entry(i, j) = t[(i - j) + N - 1]
///
/// Generator entries are i.i.d. N(0, 1/M) drawn from Xoshiro256ss(seed), so
/// `scale()` (= 1/sqrt(M)) is already folded into the stored values.
/// Instances are immutable and safe to share between threads.
class SensingMatrix {
public:
    /// Draws a fresh matrix from `spec`. Throws ConfigError if M or N is zero.
    static SensingMatrix build(const MatrixSpec& spec);

    /// Wraps an explicit generator (or entry table for Gaussian). The length must
    /// match the kind; the seed in `spec` is carried along as provenance only.
    static SensingMatrix from_generator(const MatrixSpec& spec, Eigen::VectorXd generator);

    const MatrixSpec& spec() const noexcept { return spec_; }
    Kind kind() const noexcept { return spec_.kind; }
    std::size_t rows() const noexcept { return spec_.rows; }
    std::size_t cols() const noexcept { return spec_.cols; }
    double scale() const noexcept { return scale_; }
    const Eigen::VectorXd& generator() const noexcept { return generator_; }

    double entry(std::size_t i, std::size_t j) const noexcept;

    /// Materializes the full M x N table.
    Eigen::MatrixXd dense() const;

    /// True for Circulant and Toeplitz; the generator spectrum is precomputed.
    bool has_fast_path() const noexcept { return static_cast<bool>(plan_); }

private:
    friend Eigen::VectorXd apply_structured(const SensingMatrix&, const Eigen::Ref<const Eigen::VectorXd>&);

    SensingMatrix(const MatrixSpec& spec, Eigen::VectorXd generator);

    MatrixSpec spec_;
    Eigen::VectorXd generator_;
    double scale_ = 1.0;
    std::shared_ptr<const detail::SpectralPlan> plan_;
};

/// Length of the generator vector for a spec: M*N, N or M+N-1.
std::size_t generator_length(const MatrixSpec& spec) noexcept;

/// y = Phi x by direct summation over the entries, O(M N).
Eigen::VectorXd apply(const SensingMatrix& matrix, const Eigen::Ref<const Eigen::VectorXd>& x);

/// y = Phi x through a real FFT: circular correlation of length N for
/// Circulant, circulant embedding of length >= M+N-1 for Toeplitz.
/// Throws ConfigError for Gaussian matrices.
Eigen::VectorXd apply_structured(const SensingMatrix& matrix, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Separable 2D compression Y = Phi_row * X * Phi_col^T.
Eigen::MatrixXd compress_image(const SensingMatrix& row_matrix, const SensingMatrix& col_matrix,
                               const Eigen::Ref<const Eigen::MatrixXd>& image);

/// (M_row * M_col) / (H * W).
double compression_ratio(const MatrixSpec& row_spec, const MatrixSpec& col_spec, std::size_t height,
                         std::size_t width);

/// Largest absolute normalized inner product between two distinct columns.
/// Throws ConfigError for N < 2 or a zero column.
double mutual_coherence(const SensingMatrix& matrix);

/// "CSLMAT01" | kind u8 | M u64 | N u64 | seed u64 | generator f64[...], little-endian.
void save_matrix(const SensingMatrix& matrix, const std::filesystem::path& path);
SensingMatrix load_matrix(const std::filesystem::path& path);

}  // namespace cslnet::sensing
