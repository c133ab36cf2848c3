#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cslnet/sensing.hpp"

namespace cslnet::features {

inline constexpr std::size_t kChannels = 3;

/// Sensing-matrix kind for each of the three channels, written as e.g. "GCT".
struct ChannelCombo {
    std::array<sensing::Kind, kChannels> kinds{};

    std::string str() const;
    /// Accepts exactly three letters from {G, C, T} (case-insensitive).
    static ChannelCombo parse(std::string_view text);

    bool operator==(const ChannelCombo&) const = default;
};

/// dedupe = false: all 27 ordered triples, lexicographic in G < C < T.
/// dedupe = true: the 10 multisets, each written in G <= C <= T order.
std::vector<ChannelCombo> enumerate_combos(bool dedupe);

/// Row and column operator for separable compression.
struct MatrixPair {
    sensing::SensingMatrix row;
    sensing::SensingMatrix col;
};

/// One matrix pair per kind. With `build`, kind k (G=0, C=1, T=2) uses
/// seed + 2k for the row matrix and seed + 2k + 1 for the column matrix.
class MatrixBank {
public:
    MatrixBank() = default;

    static MatrixBank build(std::size_t measurements, std::size_t height, std::size_t width, std::uint64_t seed);

    void set(sensing::Kind kind, MatrixPair pair);
    bool contains(sensing::Kind kind) const noexcept;
    /// Throws ConfigError if the kind is missing.
    const MatrixPair& pair(sensing::Kind kind) const;

private:
    std::array<std::optional<MatrixPair>, 3> pairs_;
};

struct FeatureTensor {
    std::array<Eigen::MatrixXd, kChannels> channels;
    ChannelCombo combo;
    std::string source_id;
};

/// Channel k = compress_image(bank.pair(kinds[k]).row, ...col, image).
FeatureTensor extract_channels(const Eigen::MatrixXd& image, const ChannelCombo& combo, const MatrixBank& bank,
                               std::string source_id = {});

/// Uncompressed baseline: the image resized bilinearly to side x side,
/// repeated on all three channels. Its combo field is meaningless.
FeatureTensor resized_baseline(const Eigen::MatrixXd& image, std::size_t side, std::string source_id = {});

struct ChannelStats {
    std::array<double, kChannels> mean{};
    std::array<double, kChannels> stddev{};
};

inline constexpr double kStdFloor = 1e-8;

/// Population mean and standard deviation of every channel over `indices`.
ChannelStats compute_stats(std::span<const FeatureTensor> tensors, std::span<const std::size_t> indices);

/// (v - mean) / max(stddev, 1e-8) channel by channel.
FeatureTensor normalize(const FeatureTensor& tensor, const ChannelStats& stats);

/// "CSLFEA01" | count u64 | combo 3 ASCII bytes | count * 3 * M * M f32, little-endian.
/// M is recovered from the payload size on load.
void save_feature_cache(std::span<const FeatureTensor> tensors, const std::filesystem::path& path);
std::vector<FeatureTensor> load_feature_cache(const std::filesystem::path& path);

}  // namespace cslnet::features
