#include "proreg/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace proreg {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag) {
    std::uint64_t state = seed ^ fnv1a64(tag);
    return splitmix64(state);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::gaussian() {
    if (m_has_spare) {
        m_has_spare = false;
        return m_spare;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    m_spare = radius * std::sin(angle);
    m_has_spare = true;
    return radius * std::cos(angle);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    std::uint64_t bound = n;
    std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod n
    for (;;) {
        std::uint64_t r = next_u64();
        if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
}

}  // namespace proreg
