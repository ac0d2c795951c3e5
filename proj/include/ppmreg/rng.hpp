#pragma once

#include <cstdint>
#include <cmath>

namespace ppmreg {

// Deterministic random stream (xoshiro256++ seeded via splitmix64).
//
// All distributions are generated from raw 64-bit draws with fixed
// arithmetic, so a given seed yields the same sequence on every platform
// and compiler. Parallel consumers never touch the stream directly:
// callers pre-draw values sequentially and hand them to workers.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform index in [0, n). Multiply-shift mapping; bias is O(n / 2^64).
    std::size_t next_index(std::size_t n) {
        const auto x = static_cast<unsigned __int128>(next_u64());
        return static_cast<std::size_t>((x * n) >> 64);
    }

    // Standard normal via Box-Muller; the spare value is cached so draws
    // come in a fixed order.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ppmreg
