#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace cslnet {

/// SplitMix64 (Steele, Lea, Flood 2014). Used only to expand a 64-bit seed
/// into xoshiro state.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    std::uint64_t next() noexcept;

private:
    std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman & Vigna). State is the first four SplitMix64
/// outputs of the seed.
///
/// Derived streams, all documented in README.md so other implementations can
/// reproduce them:
///   uniform()  = (next() >> 11) * 2^-53                      in [0, 1)
///   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)          one normal per two uniforms
///   below(n)   = high 64 bits of next() * n                   in [0, n)
class Xoshiro256ss {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256ss(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;
    std::uint64_t operator()() noexcept { return next(); }
    static constexpr std::uint64_t min() noexcept { return 0; }
    static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Fisher-Yates, walking from the back.
    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace cslnet
