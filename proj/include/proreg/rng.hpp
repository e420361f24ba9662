#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace proreg {

// FNV-1a 64-bit hash. Stream tags and config hashes go through this so every
// derivation is pinned by this file rather than by a library implementation.
constexpr std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

// One splitmix64 step. Only used to derive sub-stream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Seed of the named sub-stream of `seed`:
//   stream_seed = splitmix64(seed XOR fnv1a64(tag))
// Distinct tags give statistically independent streams, so splits, inits and
// shuffles never share draws.
std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag);

// Deterministic random source. mt19937_64 supplies raw 64-bit words; uniform
// (53-bit mantissa scaling), gaussian (Box-Muller) and bounded-index
// (rejection) draws are defined here so the sequences do not depend on the
// standard library's distribution objects.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}

    std::uint64_t next_u64() { return m_engine(); }

    // [0, 1)
    double uniform();
    double uniform(double lo, double hi);

    // standard normal; pairs come from one Box-Muller transform
    double gaussian();

    // [0, n), unbiased
    std::size_t index(std::size_t n);

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 m_engine;
    bool m_has_spare = false;
    double m_spare = 0.0;
};

}  // namespace proreg
