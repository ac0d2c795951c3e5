#pragma once

#include <cstdint>
#include <cstring>
#include <cmath>

namespace ppmreg {

// exp(x) for x <= 0, accurate to ~2 ulp, built from plain arithmetic so the
// kernel double-sums auto-vectorize without -ffast-math. Pure function of
// the bits of x: results are identical across runs and worker counts.
inline double exp_neg(double x) {
    constexpr double log2e = 1.4426950408889634074;
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    if (x < -708.0) return 0.0;

    const double fn = std::nearbyint(x * log2e);
    const int n = static_cast<int>(fn);
    const double r = (x - fn * ln2_hi) - fn * ln2_lo;  // |r| <= ln2/2

    // Degree-11 Taylor expansion of e^r; remainder < 1e-14 relative.
    double p = 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;

    // Scale by 2^n through the exponent bits (n is in [-1022, 1] here).
    const std::uint64_t bits = static_cast<std::uint64_t>(1023 + n) << 52;
    double two_n;
    std::memcpy(&two_n, &bits, sizeof two_n);
    return p * two_n;
}

} // namespace ppmreg
