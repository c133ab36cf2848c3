#include "cslnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cslnet/errors.hpp"
#include "cslnet/rng.hpp"

namespace cslnet::data {

namespace fs = std::filesystem;

namespace {

// a + t (b - a), clamped so rounding never leaves [min(a,b), max(a,b)].
double lerp_clamped(double a, double b, double t) {
    if (t == 0.0) return a;
    const double v = a + t * (b - a);
    return std::clamp(v, std::min(a, b), std::max(a, b));
}

struct AxisSample {
    std::size_t lo;
    std::size_t hi;
    double t;
};

std::vector<AxisSample> axis_samples(std::size_t in, std::size_t out) {
    std::vector<AxisSample> samples(out);
    const double step = out > 1 ? static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
    for (std::size_t i = 0; i < out; ++i) {
        const double pos = static_cast<double>(i) * step;
        auto lo = static_cast<std::size_t>(std::floor(pos));
        if (lo >= in - 1) {
            samples[i] = {in - 1, in - 1, 0.0};
        } else {
            samples[i] = {lo, lo + 1, pos - static_cast<double>(lo)};
        }
    }
    return samples;
}

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// BT.601 luma scaled to [0, 1]. Returns an empty matrix for unsupported layouts.
Image to_gray(const cv::Mat& mat) {
    double full_scale = 0.0;
    switch (mat.depth()) {
        case CV_8U: full_scale = 255.0; break;
        case CV_16U: full_scale = 65535.0; break;
        default: return {};
    }
    const int channels = mat.channels();
    if (channels != 1 && channels != 3 && channels != 4) return {};

    Image out(mat.rows, mat.cols);
    for (int r = 0; r < mat.rows; ++r) {
        for (int c = 0; c < mat.cols; ++c) {
            auto px = [&](int ch) -> double {
                if (mat.depth() == CV_8U) return mat.ptr<std::uint8_t>(r)[c * channels + ch];
                return mat.ptr<std::uint16_t>(r)[c * channels + ch];
            };
            double v;
            if (channels == 1) {
                v = px(0);
            } else {
                // OpenCV stores BGR(A).
                v = 0.299 * px(2) + 0.587 * px(1) + 0.114 * px(0);
            }
            out(r, c) = std::clamp(v / full_scale, 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

Image resize_bilinear(const Image& image, std::size_t rows, std::size_t cols) {
    if (image.rows() < 2 || image.cols() < 2)
        throw ConfigError("resize_bilinear: input must be at least 2x2, got " + std::to_string(image.rows()) + "x" +
                          std::to_string(image.cols()));
    if (rows == 0 || cols == 0) throw ConfigError("resize_bilinear: target dimensions must be positive");

    const auto ys = axis_samples(static_cast<std::size_t>(image.rows()), rows);
    const auto xs = axis_samples(static_cast<std::size_t>(image.cols()), cols);
    Image out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& sy = ys[i];
        for (std::size_t j = 0; j < cols; ++j) {
            const auto& sx = xs[j];
            const auto y0 = static_cast<Eigen::Index>(sy.lo), y1 = static_cast<Eigen::Index>(sy.hi);
            const auto x0 = static_cast<Eigen::Index>(sx.lo), x1 = static_cast<Eigen::Index>(sx.hi);
            const double top = lerp_clamped(image(y0, x0), image(y0, x1), sx.t);
            const double bottom = lerp_clamped(image(y1, x0), image(y1, x1), sx.t);
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = lerp_clamped(top, bottom, sy.t);
        }
    }
    return out;
}

Dataset load_dataset(const fs::path& root, std::size_t side) {
    if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " is not a directory");

    std::vector<std::pair<fs::path, int>> files;
    for (const auto& [name, label] : {std::pair{"negative", kNegative}, std::pair{"positive", kPositive}}) {
        const fs::path dir = root / name;
        if (!fs::is_directory(dir)) throw DataError("missing subfolder " + dir.string());
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && has_image_extension(entry.path())) files.emplace_back(entry.path(), label);
    }
    std::sort(files.begin(), files.end());

    Dataset ds;
    ds.provenance.kind = Provenance::Kind::Directory;
    ds.provenance.root = root.string();
    for (const auto& [path, label] : files) {
        const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
        Image gray = mat.empty() ? Image{} : to_gray(mat);
        if (gray.size() == 0 || gray.rows() < 2 || gray.cols() < 2) {
            std::cerr << "warning: skipping undecodable image " << path.string() << "\n";
            ++ds.provenance.skipped_files;
            continue;
        }
        Sample s;
        s.image = (static_cast<std::size_t>(gray.rows()) == side && static_cast<std::size_t>(gray.cols()) == side)
                      ? std::move(gray)
                      : resize_bilinear(gray, side, side);
        s.label = label;
        s.source = path.string();
        ++ds.class_counts[static_cast<std::size_t>(label)];
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

double parse_difficulty(const std::string& text) {
    if (text == "easy") return kEasy;
    if (text == "moderate") return kModerate;
    if (text == "hard") return kHard;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !(v >= 0.0 && v <= 1.0))
        throw ConfigError("difficulty must be easy, moderate, hard or a number in [0, 1], got '" + text + "'");
    return v;
}

Dataset synthesize_dataset(std::size_t n_per_class, std::uint64_t seed, double difficulty, std::size_t side) {
    if (n_per_class < 2) throw ConfigError("synthesize_dataset: n_per_class must be at least 2");
    if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw ConfigError("synthesize_dataset: difficulty outside [0, 1]");
    if (side < 16) throw ConfigError("synthesize_dataset: side must be at least 16");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double unit = static_cast<double>(side) / 120.0;
    const int patch_count = static_cast<int>(std::lround(5.0 - 4.0 * difficulty));
    const double contrast = 0.30 - 0.25 * difficulty;

    Xoshiro256ss rng(seed);
    Dataset ds;
    ds.provenance = {Provenance::Kind::Synthetic, {}, seed, difficulty, 0};
    ds.samples.reserve(2 * n_per_class);

    const auto n = static_cast<Eigen::Index>(side);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const int label = static_cast<int>(i % 2);
        Image img = Image::Constant(n, n, rng.uniform(0.35, 0.55));

        const int blobs = 3 + static_cast<int>(rng.below(4));
        for (int b = 0; b < blobs; ++b) {
            const double cy = rng.uniform(0.0, static_cast<double>(side));
            const double cx = rng.uniform(0.0, static_cast<double>(side));
            const double sigma = rng.uniform(8.0, 24.0) * unit;
            const double amp = rng.uniform(-0.25, 0.25);
            const double inv = 1.0 / (2.0 * sigma * sigma);
            for (Eigen::Index y = 0; y < n; ++y)
                for (Eigen::Index x = 0; x < n; ++x) {
                    const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                    img(y, x) += amp * std::exp(-(dy * dy + dx * dx) * inv);
                }
        }

        if (label == kPositive) {
            for (int p = 0; p < patch_count; ++p) {
                const double cy = rng.uniform(0.15, 0.85) * static_cast<double>(side);
                const double cx = rng.uniform(0.15, 0.85) * static_cast<double>(side);
                const double sigma = rng.uniform(5.0, 9.0) * unit;
                std::array<double, 2> freq{}, cos_t{}, sin_t{}, phase{};
                for (int w = 0; w < 2; ++w) {
                    freq[w] = two_pi / (rng.uniform(3.0, 6.0) * unit);
                    const double theta = rng.uniform(0.0, std::numbers::pi);
                    cos_t[w] = std::cos(theta);
                    sin_t[w] = std::sin(theta);
                    phase[w] = rng.uniform(0.0, two_pi);
                }
                const double inv = 1.0 / (2.0 * sigma * sigma);
                const auto reach = static_cast<Eigen::Index>(std::ceil(4.0 * sigma));
                const auto y_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(cy) - reach);
                const auto y_hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(cy) + reach);
                const auto x_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(cx) - reach);
                const auto x_hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(cx) + reach);
                for (Eigen::Index y = y_lo; y <= y_hi; ++y)
                    for (Eigen::Index x = x_lo; x <= x_hi; ++x) {
                        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                        double tex = 0.0;
                        for (int w = 0; w < 2; ++w)
                            tex += std::cos(freq[w] * (dx * cos_t[w] + dy * sin_t[w]) + phase[w]);
                        img(y, x) += contrast * 0.5 * tex * std::exp(-(dy * dy + dx * dx) * inv);
                    }
            }
        }

        img = img.cwiseMax(0.0).cwiseMin(1.0);
        ds.samples.push_back({std::move(img), label, "synthetic:" + std::to_string(i)});
        ++ds.class_counts[static_cast<std::size_t>(label)];
    }
    return ds;
}

void export_png(const Dataset& dataset, const fs::path& dir) {
    std::error_code ec;
    for (const char* sub : {"negative", "positive"}) {
        fs::create_directories(dir / sub, ec);
        if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
    }
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        cv::Mat mat(static_cast<int>(s.image.rows()), static_cast<int>(s.image.cols()), CV_8UC1);
        for (int r = 0; r < mat.rows; ++r)
            for (int c = 0; c < mat.cols; ++c)
                mat.at<std::uint8_t>(r, c) =
                    static_cast<std::uint8_t>(std::lround(std::clamp(s.image(r, c), 0.0, 1.0) * 255.0));
        char name[32];
        std::snprintf(name, sizeof name, "%05zu.png", i);
        const fs::path path = dir / (s.label == kPositive ? "positive" : "negative") / name;
        if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write " + path.string());
    }
}

}  // namespace cslnet::data
