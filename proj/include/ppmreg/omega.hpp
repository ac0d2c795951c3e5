#pragma once

#include <algorithm>
#include <cmath>

#include "ppmreg/errors.hpp"

namespace ppmreg {

// A point of the quotient half-plane: birth-lifetime pairs with the
// lifetime-0 boundary collapsed to a single trivial point. The trivial
// point is stored as (0, 0); features always have lifetime > 0.
struct OmegaPoint {
    double birth = 0.0;
    double lifetime = 0.0;

    static OmegaPoint trivial() { return {}; }

    static OmegaPoint feature(double birth, double lifetime) {
        if (!(lifetime > 0.0)) throw ContractViolation("feature lifetime must be > 0");
        if (!(birth >= 0.0)) throw ContractViolation("feature birth must be >= 0");
        return {birth, lifetime};
    }

    bool is_trivial() const { return lifetime <= 0.0; }

    bool operator==(const OmegaPoint&) const = default;
};

// Quotient of the Euclidean plane metric: two features may connect either
// directly or through the collapsed boundary point.
inline double omega_distance(const OmegaPoint& a, const OmegaPoint& b) {
    if (a.is_trivial() && b.is_trivial()) return 0.0;
    if (a.is_trivial()) return b.lifetime;
    if (b.is_trivial()) return a.lifetime;
    const double db = a.birth - b.birth;
    const double dl = a.lifetime - b.lifetime;
    return std::min(std::sqrt(db * db + dl * dl), a.lifetime + b.lifetime);
}

} // namespace ppmreg
