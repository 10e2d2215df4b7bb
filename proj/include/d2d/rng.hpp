#pragma once

#include <array>
#include <cstdint>

#include "d2d/bytes.hpp"

namespace d2d {

/// splitmix64. Small, fast, and fully reproducible across platforms; every
/// random value in a run flows from one of these seeded from the config.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound). bound must be nonzero.
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

    std::array<std::uint8_t, 32> block32() {
        std::array<std::uint8_t, 32> out{};
        for (int i = 0; i < 4; ++i) {
            std::uint64_t v = next();
            for (int j = 0; j < 8; ++j) out[static_cast<size_t>(i * 8 + j)] = static_cast<std::uint8_t>(v >> (56 - 8 * j));
        }
        return out;
    }

    Bytes bytes(size_t n) {
        Bytes out(n);
        for (auto& b : out) b = static_cast<std::uint8_t>(next() >> 56);
        return out;
    }

private:
    std::uint64_t state_;
};

}  // namespace d2d
