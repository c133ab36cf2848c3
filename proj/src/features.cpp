#include "cslnet/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "cslnet/data.hpp"
#include "cslnet/errors.hpp"

namespace cslnet::features {

namespace {

constexpr std::string_view kFeatureMagic = "CSLFEA01";
constexpr std::array<sensing::Kind, 3> kAllKinds{sensing::Kind::Gaussian, sensing::Kind::Circulant,
                                                 sensing::Kind::Toeplitz};

std::size_t kind_index(sensing::Kind kind) { return static_cast<std::size_t>(kind); }

}  // namespace

std::string ChannelCombo::str() const {
    std::string out;
    for (auto k : kinds) out.push_back(sensing::kind_letter(k));
    return out;
}

ChannelCombo ChannelCombo::parse(std::string_view text) {
    if (text.size() != kChannels)
        throw ConfigError("channel combo must have exactly three letters, got '" + std::string(text) + "'");
    ChannelCombo combo;
    for (std::size_t i = 0; i < kChannels; ++i) combo.kinds[i] = sensing::kind_from_letter(text[i]);
    return combo;
}

std::vector<ChannelCombo> enumerate_combos(bool dedupe) {
    std::vector<ChannelCombo> out;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = dedupe ? a : 0; b < 3; ++b)
            for (std::size_t c = dedupe ? b : 0; c < 3; ++c)
                out.push_back({{kAllKinds[a], kAllKinds[b], kAllKinds[c]}});
    return out;
}

MatrixBank MatrixBank::build(std::size_t measurements, std::size_t height, std::size_t width, std::uint64_t seed) {
    MatrixBank bank;
    for (auto kind : kAllKinds) {
        const std::uint64_t base = seed + 2 * kind_index(kind);
        bank.set(kind, {sensing::SensingMatrix::build({kind, measurements, height, base}),
                        sensing::SensingMatrix::build({kind, measurements, width, base + 1})});
    }
    return bank;
}

void MatrixBank::set(sensing::Kind kind, MatrixPair pair) {
    if (pair.row.rows() != pair.col.rows())
        throw ConfigError("matrix pair rows differ: " + std::to_string(pair.row.rows()) + " vs " +
                          std::to_string(pair.col.rows()));
    pairs_[kind_index(kind)] = std::move(pair);
}

bool MatrixBank::contains(sensing::Kind kind) const noexcept { return pairs_[kind_index(kind)].has_value(); }

const MatrixPair& MatrixBank::pair(sensing::Kind kind) const {
    const auto& slot = pairs_[kind_index(kind)];
    if (!slot) throw ConfigError("matrix bank has no " + std::string(sensing::kind_name(kind)) + " pair");
    return *slot;
}

FeatureTensor extract_channels(const Eigen::MatrixXd& image, const ChannelCombo& combo, const MatrixBank& bank,
                               std::string source_id) {
    FeatureTensor out;
    out.combo = combo;
    out.source_id = std::move(source_id);
    for (std::size_t k = 0; k < kChannels; ++k) {
        const auto& p = bank.pair(combo.kinds[k]);
        out.channels[k] = sensing::compress_image(p.row, p.col, image);
    }
    return out;
}

FeatureTensor resized_baseline(const Eigen::MatrixXd& image, std::size_t side, std::string source_id) {
    FeatureTensor out;
    out.source_id = std::move(source_id);
    Eigen::MatrixXd resized = data::resize_bilinear(image, side, side);
    out.channels = {resized, resized, resized};
    return out;
}

ChannelStats compute_stats(std::span<const FeatureTensor> tensors, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ConfigError("compute_stats: no training samples");
    ChannelStats stats;
    for (std::size_t c = 0; c < kChannels; ++c) {
        // Shifted by the first value so constant channels give an exact mean.
        const double shift = tensors[indices.front()].channels[c](0, 0);
        double sum = 0.0;
        double count = 0.0;
        for (auto i : indices) {
            sum += (tensors[i].channels[c].array() - shift).sum();
            count += static_cast<double>(tensors[i].channels[c].size());
        }
        const double mean = shift + sum / count;
        double sq = 0.0;
        for (auto i : indices) sq += (tensors[i].channels[c].array() - mean).square().sum();
        stats.mean[c] = mean;
        stats.stddev[c] = std::sqrt(sq / count);
    }
    return stats;
}

FeatureTensor normalize(const FeatureTensor& tensor, const ChannelStats& stats) {
    FeatureTensor out;
    out.combo = tensor.combo;
    out.source_id = tensor.source_id;
    for (std::size_t c = 0; c < kChannels; ++c) {
        const double sd = std::max(stats.stddev[c], kStdFloor);
        out.channels[c] = (tensor.channels[c].array() - stats.mean[c]) / sd;
    }
    return out;
}

void save_feature_cache(std::span<const FeatureTensor> tensors, const std::filesystem::path& path) {
    const std::string combo = tensors.empty() ? std::string("GCT") : tensors.front().combo.str();
    const Eigen::Index side = tensors.empty() ? 0 : tensors.front().channels[0].rows();
    for (const auto& t : tensors) {
        if (t.combo.str() != combo) throw ConfigError("feature cache: mixed channel combos");
        for (const auto& ch : t.channels)
            if (ch.rows() != side || ch.cols() != side) throw ConfigError("feature cache: inconsistent channel size");
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    binio::write_magic(out, kFeatureMagic);
    binio::write_u64(out, tensors.size());
    out.write(combo.data(), 3);
    for (const auto& t : tensors)
        for (const auto& ch : t.channels)
            for (Eigen::Index r = 0; r < side; ++r)
                for (Eigen::Index c = 0; c < side; ++c) binio::write_f32(out, static_cast<float>(ch(r, c)));
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<FeatureTensor> load_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    binio::expect_magic(in, kFeatureMagic);
    const std::uint64_t count = binio::read_u64(in);
    std::string tag(3, '\0');
    if (!in.read(tag.data(), 3)) throw IoError("truncated feature cache header");
    const ChannelCombo combo = ChannelCombo::parse(tag);

    const auto header = static_cast<std::uintmax_t>(kFeatureMagic.size() + 8 + 3);
    const std::uintmax_t payload = std::filesystem::file_size(path) - header;
    std::vector<FeatureTensor> out;
    if (count == 0) {
        if (payload != 0) throw IoError("feature cache: payload present with zero samples");
        return out;
    }
    const std::uintmax_t per_sample_values = payload / (count * 4 * kChannels);
    const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(per_sample_values))));
    if (per_sample_values * count * 4 * kChannels != payload ||
        static_cast<std::uintmax_t>(side * side) != per_sample_values)
        throw IoError("feature cache: payload size does not match " + std::to_string(count) + " square samples");

    out.resize(count);
    for (auto& t : out) {
        t.combo = combo;
        for (auto& ch : t.channels) {
            ch.resize(side, side);
            for (Eigen::Index r = 0; r < side; ++r)
                for (Eigen::Index c = 0; c < side; ++c) ch(r, c) = binio::read_f32(in);
        }
    }
    return out;
}

}  // namespace cslnet::features
