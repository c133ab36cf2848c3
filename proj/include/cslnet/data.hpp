#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cslnet::data {

/// Side length every ingested image is resized to.
inline constexpr std::size_t kImageSide = 120;

inline constexpr int kNegative = 0;
inline constexpr int kPositive = 1;

/// Grayscale image in [0, 1], rows = height.
using Image = Eigen::MatrixXd;

struct Sample {
    Image image;
    int label = kNegative;
    std::string source;  // file path, or "synthetic:<index>"
};

struct Provenance {
    enum class Kind { Directory, Synthetic };
    Kind kind = Kind::Synthetic;
    std::string root;  // directory datasets only
    std::uint64_t seed = 0;
    double difficulty = 0.0;
    std::size_t skipped_files = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::array<std::size_t, 2> class_counts{};  // indexed by label
    Provenance provenance;

    std::size_t size() const noexcept { return samples.size(); }
    std::vector<int> labels() const;
};

/// Corner-aligned bilinear resize: output pixel (i, j) samples the input at
/// (i * (H-1)/(rows-1), j * (W-1)/(cols-1)). Requires H, W >= 2.
Image resize_bilinear(const Image& image, std::size_t rows, std::size_t cols);

/// Reads `root/negative` and `root/positive` (png, jpg, jpeg). Files are
/// taken in lexicographic path order, converted to BT.601 luma, scaled to
/// [0, 1] and resized to `side` x `side`. Undecodable files are skipped with
/// a warning on stderr and counted in `provenance.skipped_files`.
Dataset load_dataset(const std::filesystem::path& root, std::size_t side = kImageSide);

/// Named difficulty levels for `synthesize_dataset`.
inline constexpr double kEasy = 0.0;
inline constexpr double kModerate = 0.5;
inline constexpr double kHard = 1.0;

/// Parses "easy", "moderate", "hard" or a number in [0, 1].
double parse_difficulty(const std::string& text);

/// Two-class synthetic stand-in for CT slices. Both classes are smooth
/// random Gaussian blobs on a random background level; positives also carry
/// windowed high-frequency texture patches. `difficulty` in [0, 1] lowers
/// the patch count and contrast (0 = most visible). Labels alternate
/// 0, 1, 0, 1, ...; output is deterministic in `seed`.
Dataset synthesize_dataset(std::size_t n_per_class, std::uint64_t seed, double difficulty,
                           std::size_t side = kImageSide);

/// Writes every sample as an 8-bit PNG under `dir/negative` and `dir/positive`.
void export_png(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace cslnet::data
