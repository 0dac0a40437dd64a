#pragma once

#include <cstdint>
#include <string_view>

namespace streamvae {

/// Splittable counter-based generator.
///
/// Every draw is a pure function of (key, counter): the n-th output is
/// splitmix64(key ^ mix(n)). `split` derives an independent child key, so a
/// single command seed can fan out into per-purpose streams (init, shuffle,
/// noise, ...) without any shared mutable state. Distributions are
/// implemented here rather than with <random> so that outputs are identical
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    /// Child stream identified by an integer tag. Does not advance this stream.
    [[nodiscard]] Rng split(std::uint64_t stream) const noexcept;
    /// Child stream identified by a name (hashed with FNV-1a).
    [[nodiscard]] Rng split(std::string_view name) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Uniform integer on [0, n). `n` must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;
    /// Uniform integer on [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;
    /// Standard normal via Box-Muller (cached second variate).
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept;
    double exponential(double scale) noexcept;

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace streamvae
