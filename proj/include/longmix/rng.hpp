#pragma once

#include <cstdint>

namespace longmix::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Child key for stream `index` under `seed`; children of distinct indices
/// are independent streams regardless of the order they are drawn in.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed ^ 0x6A09E667F3BCC909ULL) + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

/// Counter-based SplitMix64: draw k of stream `key` is mix64(key + (k + 1) * gamma),
/// so any draw can be reproduced from (key, k) alone.
class CounterStream {
public:
    explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on the open interval (0, 1).
    double next_uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion.
    double next_normal();

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace longmix::rng
