#include "rsstab/rng.hpp"

#include <cmath>
#include <numbers>

namespace rsstab {

namespace {

constexpr std::uint32_t kWeylA = 0x9E3779B9;
constexpr std::uint32_t kWeylB = 0xBB67AE85;
constexpr std::uint32_t kMulA = 0xD2511F53;
constexpr std::uint32_t kMulB = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(product);
    hi = static_cast<std::uint32_t>(product >> 32);
}

}  // namespace

Philox4x32 philox4x32(Philox4x32 c, std::array<std::uint32_t, 2> k) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kMulA, c[0], lo0, hi0);
        mulhilo(kMulB, c[2], lo1, hi1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeylA;
        k[1] += kWeylB;
    }
    return c;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t master_seed, std::string_view label) noexcept {
    // FNV-1a over the label, then mixed with the seed.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(splitmix64(master_seed) ^ h);
}

std::array<std::uint64_t, 2> CounterRng::bits(std::uint64_t index) const noexcept {
    const Philox4x32 counter = {static_cast<std::uint32_t>(index),
                                static_cast<std::uint32_t>(index >> 32),
                                static_cast<std::uint32_t>(path_),
                                static_cast<std::uint32_t>(path_ >> 32)};
    const auto out = philox4x32(counter, {static_cast<std::uint32_t>(key_),
                                          static_cast<std::uint32_t>(key_ >> 32)});
    return {(static_cast<std::uint64_t>(out[1]) << 32) | out[0],
            (static_cast<std::uint64_t>(out[3]) << 32) | out[2]};
}

std::array<double, 2> CounterRng::uniform_pair(std::uint64_t index) const noexcept {
    const auto b = bits(index);
    return {to_unit(b[0]), to_unit(b[1])};
}

std::array<double, 2> CounterRng::open_uniform_pair(std::uint64_t index) const noexcept {
    const auto b = bits(index);
    return {to_open_unit(b[0]), to_open_unit(b[1])};
}

std::array<double, 2> CounterRng::normal_pair(std::uint64_t index) const noexcept {
    const auto u = open_uniform_pair(index);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double theta = 2.0 * std::numbers::pi * u[1];
    return {r * std::cos(theta), r * std::sin(theta)};
}

double RandomStream::uniform() noexcept {
    if (has_uniform_) {
        has_uniform_ = false;
        return cached_uniform_;
    }
    const auto u = rng_.uniform_pair(index_++);
    cached_uniform_ = u[1];
    has_uniform_ = true;
    return u[0];
}

double RandomStream::normal() noexcept {
    if (has_normal_) {
        has_normal_ = false;
        return cached_normal_;
    }
    const auto z = rng_.normal_pair(index_++);
    cached_normal_ = z[1];
    has_normal_ = true;
    return z[0];
}

}  // namespace rsstab
