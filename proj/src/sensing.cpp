#include "cslnet/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <new>
#include <string>
#include <vector>

#include <fftw3.h>

#include "binary_io.hpp"
#include "cslnet/errors.hpp"
#include "cslnet/rng.hpp"

namespace cslnet::sensing {

namespace {

constexpr std::string_view kMatrixMagic = "CSLMAT01";

// FFTW's planner is not re-entrant; execution on fresh arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
class FftwBuffer {
public:
    explicit FftwBuffer(std::size_t n) : data_(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)))) {
        if (!data_) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(data_); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    T* get() noexcept { return data_; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }

private:
    T* data_;
};

bool is_smooth(std::size_t n) {
    for (std::size_t p : {2u, 3u, 5u, 7u})
        while (n % p == 0) n /= p;
    return n == 1;
}

std::size_t next_smooth(std::size_t n) {
    while (!is_smooth(n)) ++n;
    return n;
}

}  // namespace

namespace detail {

struct SpectralPlan {
    std::size_t length = 0;
    // Offset of y[0] inside the inverse transform.
    std::size_t offset = 0;
    std::vector<std::complex<double>> spectrum;
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;

    SpectralPlan() = default;
    SpectralPlan(const SpectralPlan&) = delete;
    SpectralPlan& operator=(const SpectralPlan&) = delete;
    ~SpectralPlan() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

}  // namespace detail

namespace {

std::shared_ptr<const detail::SpectralPlan> make_plan(const MatrixSpec& spec, const Eigen::VectorXd& generator) {
    auto plan = std::make_shared<detail::SpectralPlan>();
    const std::size_t n = spec.cols;
    if (spec.kind == Kind::Circulant) {
        plan->length = n;
        plan->offset = 0;
    } else {
        plan->length = next_smooth(spec.rows + spec.cols - 1);
        plan->offset = n - 1;
    }
    const std::size_t len = plan->length;
    const std::size_t bins = len / 2 + 1;

    FftwBuffer<double> real(len);
    FftwBuffer<fftw_complex> freq(bins);
    {
        std::lock_guard lock(planner_mutex());
        plan->forward = fftw_plan_dft_r2c_1d(static_cast<int>(len), real.get(), freq.get(), FFTW_ESTIMATE);
        plan->inverse = fftw_plan_dft_c2r_1d(static_cast<int>(len), freq.get(), real.get(), FFTW_ESTIMATE);
    }
    if (!plan->forward || !plan->inverse) throw std::runtime_error("FFTW planning failed");

    std::fill(real.get(), real.get() + len, 0.0);
    for (Eigen::Index k = 0; k < generator.size(); ++k) real[static_cast<std::size_t>(k)] = generator[k];
    fftw_execute_dft_r2c(plan->forward, real.get(), freq.get());

    plan->spectrum.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        std::complex<double> v(freq[k][0], freq[k][1]);
        // Circulant rows are correlations with c, so the spectrum is conjugated.
        plan->spectrum[k] = spec.kind == Kind::Circulant ? std::conj(v) : v;
    }
    return plan;
}

void check_spec(const MatrixSpec& spec) {
    if (spec.rows == 0 || spec.cols == 0)
        throw ConfigError("sensing matrix dimensions must be positive, got " + std::to_string(spec.rows) + "x" +
                          std::to_string(spec.cols));
    if (spec.kind != Kind::Gaussian && spec.kind != Kind::Circulant && spec.kind != Kind::Toeplitz)
        throw ConfigError("unknown sensing matrix kind");
}

}  // namespace

char kind_letter(Kind kind) noexcept {
    switch (kind) {
        case Kind::Gaussian: return 'G';
        case Kind::Circulant: return 'C';
        case Kind::Toeplitz: return 'T';
    }
    return '?';
}

Kind kind_from_letter(char letter) {
    switch (letter) {
        case 'G': case 'g': return Kind::Gaussian;
        case 'C': case 'c': return Kind::Circulant;
        case 'T': case 't': return Kind::Toeplitz;
        default: throw ConfigError(std::string("unknown sensing matrix kind '") + letter + "'");
    }
}

std::string_view kind_name(Kind kind) noexcept {
    switch (kind) {
        case Kind::Gaussian: return "gaussian";
        case Kind::Circulant: return "circulant";
        case Kind::Toeplitz: return "toeplitz";
    }
    return "unknown";
}

std::size_t generator_length(const MatrixSpec& spec) noexcept {
    switch (spec.kind) {
        case Kind::Gaussian: return spec.rows * spec.cols;
        case Kind::Circulant: return spec.cols;
        case Kind::Toeplitz: return spec.rows + spec.cols - 1;
    }
    return 0;
}

SensingMatrix::SensingMatrix(const MatrixSpec& spec, Eigen::VectorXd generator)
    : spec_(spec), generator_(std::move(generator)), scale_(1.0 / std::sqrt(static_cast<double>(spec.rows))) {
    if (spec_.kind != Kind::Gaussian) plan_ = make_plan(spec_, generator_);
}

SensingMatrix SensingMatrix::build(const MatrixSpec& spec) {
    check_spec(spec);
    const double sd = 1.0 / std::sqrt(static_cast<double>(spec.rows));
    Xoshiro256ss rng(spec.seed);
    Eigen::VectorXd g(static_cast<Eigen::Index>(generator_length(spec)));
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = sd * rng.normal();
    return SensingMatrix(spec, std::move(g));
}

SensingMatrix SensingMatrix::from_generator(const MatrixSpec& spec, Eigen::VectorXd generator) {
    check_spec(spec);
    if (static_cast<std::size_t>(generator.size()) != generator_length(spec))
        throw ConfigError("generator length " + std::to_string(generator.size()) + " does not match " +
                          std::string(kind_name(spec.kind)) + " " + std::to_string(spec.rows) + "x" +
                          std::to_string(spec.cols) + " (expected " + std::to_string(generator_length(spec)) + ")");
    return SensingMatrix(spec, std::move(generator));
}

double SensingMatrix::entry(std::size_t i, std::size_t j) const noexcept {
    const std::size_t n = spec_.cols;
    switch (spec_.kind) {
        case Kind::Gaussian: return generator_[static_cast<Eigen::Index>(i * n + j)];
        case Kind::Circulant: return generator_[static_cast<Eigen::Index>((j + n - (i % n)) % n)];
        case Kind::Toeplitz: return generator_[static_cast<Eigen::Index>(i + n - 1 - j)];
    }
    return 0.0;
}

Eigen::MatrixXd SensingMatrix::dense() const {
    const auto m = static_cast<Eigen::Index>(spec_.rows);
    const auto n = static_cast<Eigen::Index>(spec_.cols);
    Eigen::MatrixXd out(m, n);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return out;
}

Eigen::VectorXd apply(const SensingMatrix& matrix, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const std::size_t m = matrix.rows();
    const std::size_t n = matrix.cols();
    if (static_cast<std::size_t>(x.size()) != n)
        throw ConfigError("apply: input length " + std::to_string(x.size()) + " != cols " + std::to_string(n));

    Eigen::VectorXd y(static_cast<Eigen::Index>(m));
    const double* g = matrix.generator().data();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        switch (matrix.kind()) {
            case Kind::Gaussian: {
                const double* row = g + i * n;
                for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[static_cast<Eigen::Index>(j)];
                break;
            }
            case Kind::Circulant: {
                // Row i is c rotated right by i: c[(j - i) mod N].
                const std::size_t shift = i % n;
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t k = j >= shift ? j - shift : j + n - shift;
                    acc += g[k] * x[static_cast<Eigen::Index>(j)];
                }
                break;
            }
            case Kind::Toeplitz: {
                const double* base = g + i + n - 1;
                for (std::size_t j = 0; j < n; ++j) acc += *(base - j) * x[static_cast<Eigen::Index>(j)];
                break;
            }
        }
        y[static_cast<Eigen::Index>(i)] = acc;
    }
    return y;
}

Eigen::VectorXd apply_structured(const SensingMatrix& matrix, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (!matrix.plan_) throw ConfigError("apply_structured: Gaussian matrices have no structured fast path");
    if (static_cast<std::size_t>(x.size()) != matrix.cols())
        throw ConfigError("apply_structured: input length " + std::to_string(x.size()) + " != cols " +
                          std::to_string(matrix.cols()));

    const auto& plan = *matrix.plan_;
    const std::size_t len = plan.length;
    const std::size_t bins = len / 2 + 1;
    FftwBuffer<double> real(len);
    FftwBuffer<fftw_complex> freq(bins);

    const auto n = static_cast<std::size_t>(x.size());
    for (std::size_t k = 0; k < n; ++k) real[k] = x[static_cast<Eigen::Index>(k)];
    std::fill(real.get() + n, real.get() + len, 0.0);
    fftw_execute_dft_r2c(plan.forward, real.get(), freq.get());
    for (std::size_t k = 0; k < bins; ++k) {
        const std::complex<double> v = std::complex<double>(freq[k][0], freq[k][1]) * plan.spectrum[k];
        freq[k][0] = v.real();
        freq[k][1] = v.imag();
    }
    fftw_execute_dft_c2r(plan.inverse, freq.get(), real.get());

    const double inv_len = 1.0 / static_cast<double>(len);
    Eigen::VectorXd y(static_cast<Eigen::Index>(matrix.rows()));
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        // Circulant with M > N repeats rows with period N.
        const std::size_t idx = matrix.kind() == Kind::Circulant ? i % len : plan.offset + i;
        y[static_cast<Eigen::Index>(i)] = real[idx] * inv_len;
    }
    return y;
}

Eigen::MatrixXd compress_image(const SensingMatrix& row_matrix, const SensingMatrix& col_matrix,
                               const Eigen::Ref<const Eigen::MatrixXd>& image) {
    if (static_cast<std::size_t>(image.rows()) != row_matrix.cols() ||
        static_cast<std::size_t>(image.cols()) != col_matrix.cols())
        throw ConfigError("compress_image: image is " + std::to_string(image.rows()) + "x" +
                          std::to_string(image.cols()) + " but matrices expect " + std::to_string(row_matrix.cols()) +
                          "x" + std::to_string(col_matrix.cols()));
    if (row_matrix.rows() != col_matrix.rows())
        throw ConfigError("compress_image: row and column matrices must have the same number of rows");

    const Eigen::MatrixXd row_dense = row_matrix.dense();
    const Eigen::MatrixXd col_dense = col_matrix.dense();
    Eigen::MatrixXd left(row_dense.rows(), image.cols());
    left.noalias() = row_dense * image;
    Eigen::MatrixXd out(row_dense.rows(), col_dense.rows());
    out.noalias() = left * col_dense.transpose();
    return out;
}

double compression_ratio(const MatrixSpec& row_spec, const MatrixSpec& col_spec, std::size_t height,
                         std::size_t width) {
    return static_cast<double>(row_spec.rows * col_spec.rows) / static_cast<double>(height * width);
}

double mutual_coherence(const SensingMatrix& matrix) {
    if (matrix.cols() < 2) throw ConfigError("mutual_coherence needs at least two columns");
    const Eigen::MatrixXd d = matrix.dense();
    const Eigen::VectorXd norms = d.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < norms.size(); ++j)
        if (norms[j] == 0.0) throw ConfigError("mutual_coherence: column " + std::to_string(j) + " is zero");

    const Eigen::MatrixXd gram = d.transpose() * d;
    double mu = 0.0;
    for (Eigen::Index j = 1; j < gram.cols(); ++j)
        for (Eigen::Index i = 0; i < j; ++i) mu = std::max(mu, std::abs(gram(i, j)) / (norms[i] * norms[j]));
    return std::min(mu, 1.0);
}

void save_matrix(const SensingMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    binio::write_magic(out, kMatrixMagic);
    binio::write_u8(out, static_cast<std::uint8_t>(matrix.kind()));
    binio::write_u64(out, matrix.rows());
    binio::write_u64(out, matrix.cols());
    binio::write_u64(out, matrix.spec().seed);
    for (Eigen::Index k = 0; k < matrix.generator().size(); ++k) binio::write_f64(out, matrix.generator()[k]);
    if (!out) throw IoError("write failed: " + path.string());
}

SensingMatrix load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    binio::expect_magic(in, kMatrixMagic);
    const auto tag = binio::read_u8(in);
    if (tag > 2) throw IoError("unknown matrix kind tag " + std::to_string(tag));
    MatrixSpec spec;
    spec.kind = static_cast<Kind>(tag);
    spec.rows = binio::read_u64(in);
    spec.cols = binio::read_u64(in);
    spec.seed = binio::read_u64(in);
    check_spec(spec);
    Eigen::VectorXd g(static_cast<Eigen::Index>(generator_length(spec)));
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = binio::read_f64(in);
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in " + path.string());
    return SensingMatrix::from_generator(spec, std::move(g));
}

}  // namespace cslnet::sensing
