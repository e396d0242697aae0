#pragma once

#include <cstdint>

namespace lignn {

// SplitMix64 finalizer. Used as a stateless counter-based generator so that a
// draw depends only on (seed, stream, index) and never on iteration order.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t index) noexcept {
    return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

/// Uniform double in [0, 1) keyed by (seed, stream, index).
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) noexcept {
    return static_cast<double>(counter_hash(seed, stream, index) >> 11) * 0x1.0p-53;
}

/// Bernoulli(p) draw keyed by (seed, stream, index).
constexpr bool counter_bernoulli(double p, std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) noexcept {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return counter_uniform(seed, stream, index) < p;
}

}  // namespace lignn
