#pragma once

// Counter-based random numbers (Philox4x32-10).
//
// Every draw is a pure function of (key, path, index), so a path's stream
// does not depend on which worker simulates it or in which order paths run.
// Keys for independent subsystems (chain clock, Brownian motion, ...) are
// derived from one master seed by labelled hashing.

#include <array>
#include <cstdint>
#include <string_view>

namespace rsstab {

using Philox4x32 = std::array<std::uint32_t, 4>;

// Philox4x32 with 10 rounds (Salmon et al. 2011).
Philox4x32 philox4x32(Philox4x32 counter, std::array<std::uint32_t, 2> key) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Stream key for a labelled subsystem of a master seed.
std::uint64_t derive_key(std::uint64_t master_seed, std::string_view label) noexcept;

// Well-known labels; keeping them in one place keeps streams disjoint.
namespace stream {
inline constexpr std::string_view kChainClock = "chain-clock";
inline constexpr std::string_view kBrownian = "brownian";
inline constexpr std::string_view kBridge = "brownian-bridge";
inline constexpr std::string_view kDirect = "direct-simulation";
inline constexpr std::string_view kSpotCheck = "spot-check";
}  // namespace stream

// Random access into the stream (key, path). Each index yields 128 bits,
// i.e. two 53-bit uniforms or two standard normals.
class CounterRng {
public:
    CounterRng(std::uint64_t key, std::uint64_t path) noexcept : key_(key), path_(path) {}

    std::array<std::uint64_t, 2> bits(std::uint64_t index) const noexcept;

    // Two uniforms on [0, 1).
    std::array<double, 2> uniform_pair(std::uint64_t index) const noexcept;

    // Two uniforms on the open interval (0, 1).
    std::array<double, 2> open_uniform_pair(std::uint64_t index) const noexcept;

    // Two independent N(0, 1) draws (Box-Muller).
    std::array<double, 2> normal_pair(std::uint64_t index) const noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t path() const noexcept { return path_; }

private:
    std::uint64_t key_;
    std::uint64_t path_;
};

// Sequential view of a counter stream, for code that just wants "the next"
// number (test oracles, spot checks).
class RandomStream {
public:
    RandomStream(std::uint64_t key, std::uint64_t path) noexcept : rng_(key, path) {}

    double uniform() noexcept;
    double normal() noexcept;

private:
    CounterRng rng_;
    std::uint64_t index_ = 0;
    double cached_uniform_ = 0.0;
    double cached_normal_ = 0.0;
    bool has_uniform_ = false;
    bool has_normal_ = false;
};

inline double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace rsstab
