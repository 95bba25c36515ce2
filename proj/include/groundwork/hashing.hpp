#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace groundwork {

/// FNV-1a, 64-bit, over raw bytes. Used wherever a value must be stable
/// across processes and platforms (feature hashing, node ids, digests).
constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) noexcept {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

std::string to_hex(std::uint64_t value);

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    return splitmix64(seed ^ splitmix64(salt));
}

/// Small deterministic generator (xoshiro256**). Unlike the standard
/// distributions, every derived value here is bit-identical on all platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;
    /// Uniform in [0, 1).
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::uint64_t s_[4];
};

}  // namespace groundwork
