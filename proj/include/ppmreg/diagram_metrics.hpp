#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ppmreg/assignment.hpp"
#include "ppmreg/errors.hpp"
#include "ppmreg/omega.hpp"
#include "ppmreg/ppm.hpp"
#include "ppmreg/vr.hpp"

namespace ppmreg {

// A feature matched to a feature of the other side (its index) or to the
// collapsed point.
inline constexpr std::ptrdiff_t kMatchedToStar = -1;

namespace detail {

// Balanced 1-D transport: when every point of both sides sits on the
// lifetime axis (birth == 0), the quotient distance degenerates to
// |l1 - l2| and matching to the collapsed point to a match with 0. Sorting
// both lifetime lists (padded with zeros) gives the exact optimum.
// matching_out[i], when requested, maps side-1 entries to side-2 entries.
inline double line_w2_squared(const std::vector<std::pair<double, std::ptrdiff_t>>& a_in,
                              const std::vector<std::pair<double, std::ptrdiff_t>>& b_in,
                              std::vector<std::ptrdiff_t>* matching_out, std::size_t n1) {
    auto a = a_in;
    auto b = b_in;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (matching_out) matching_out->assign(n1, kMatchedToStar);
    double total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k].first - b[k].first;
        total += diff * diff;
        if (matching_out && a[k].second >= 0)
            (*matching_out)[static_cast<std::size_t>(a[k].second)] = b[k].second;
    }
    return total;
}

} // namespace detail

// Exact 2-Wasserstein distance between persistence diagrams under the
// quotient metric, with partial matching: every point may match a point of
// the other diagram (cost omega_distance^2) or the collapsed point (cost
// lifetime^2). Solved as a square assignment problem of size |d1| + |d2|;
// diagrams whose points all have birth 0 take an exact sorted fast path.
inline double wasserstein2_diagrams(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                                    std::vector<std::ptrdiff_t>* matching_out = nullptr) {
    if (d1.q != d2.q) throw ContractViolation("wasserstein2_diagrams: dimensions differ");
    const std::size_t n1 = d1.points.size();
    const std::size_t n2 = d2.points.size();
    if (matching_out) matching_out->assign(n1, kMatchedToStar);
    if (n1 == 0 && n2 == 0) return 0.0;

    const bool births_zero =
        std::all_of(d1.points.begin(), d1.points.end(), [](const DiagramPoint& p) { return p.birth == 0.0; }) &&
        std::all_of(d2.points.begin(), d2.points.end(), [](const DiagramPoint& p) { return p.birth == 0.0; });
    if (births_zero) {
        std::vector<std::pair<double, std::ptrdiff_t>> a, b;
        for (std::size_t i = 0; i < n1; ++i) a.emplace_back(d1.points[i].lifetime, static_cast<std::ptrdiff_t>(i));
        for (std::size_t j = 0; j < n2; ++j) b.emplace_back(d2.points[j].lifetime, static_cast<std::ptrdiff_t>(j));
        a.resize(n1 + n2, {0.0, kMatchedToStar});
        b.resize(n1 + n2, {0.0, kMatchedToStar});
        return std::sqrt(detail::line_w2_squared(a, b, matching_out, n1));
    }

    const std::size_t k = n1 + n2;
    std::vector<double> cost(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double c = 0.0;
            if (i < n1 && j < n2) {
                const OmegaPoint a{d1.points[i].birth, d1.points[i].lifetime};
                const OmegaPoint b{d2.points[j].birth, d2.points[j].lifetime};
                const double d = omega_distance(a, b);
                c = d * d;
            } else if (i < n1) {
                c = d1.points[i].lifetime * d1.points[i].lifetime;
            } else if (j < n2) {
                c = d2.points[j].lifetime * d2.points[j].lifetime;
            }
            cost[i * k + j] = c;
        }
    std::vector<std::size_t> row_to_col;
    const double total = solve_assignment(cost, k, row_to_col);
    if (matching_out)
        for (std::size_t i = 0; i < n1; ++i)
            (*matching_out)[i] = row_to_col[i] < n2 ? static_cast<std::ptrdiff_t>(row_to_col[i])
                                                    : kMatchedToStar;
    return std::sqrt(total < 0.0 ? 0.0 : total);
}

// Exact balanced 2-Wasserstein distance between two empirical measures of
// equal size s on the quotient half-plane: sqrt((1/s) min over pairings of
// the summed squared quotient distances). Trivial entries participate as
// the collapsed point.
inline double wasserstein2_ppm(const PersistenceMeasure& m1, const PersistenceMeasure& m2,
                               std::vector<std::ptrdiff_t>* matching_out = nullptr) {
    if (m1.q != m2.q) throw ContractViolation("wasserstein2_ppm: dimensions differ");
    if (m1.size() != m2.size())
        throw ContractViolation("wasserstein2_ppm: entry counts differ (re-sample to equal s)");
    const std::size_t s = m1.size();
    if (matching_out) matching_out->assign(s, kMatchedToStar);
    if (s == 0) return 0.0;

    const bool births_zero =
        std::all_of(m1.entries.begin(), m1.entries.end(),
                    [](const OmegaPoint& p) { return p.is_trivial() || p.birth == 0.0; }) &&
        std::all_of(m2.entries.begin(), m2.entries.end(),
                    [](const OmegaPoint& p) { return p.is_trivial() || p.birth == 0.0; });
    if (births_zero) {
        // Trivial entries are genuine points at lifetime 0 here; the
        // matching is balanced, so no padding is needed.
        std::vector<std::pair<double, std::ptrdiff_t>> a, b;
        for (std::size_t i = 0; i < s; ++i) a.emplace_back(m1.entries[i].lifetime, static_cast<std::ptrdiff_t>(i));
        for (std::size_t j = 0; j < s; ++j) b.emplace_back(m2.entries[j].lifetime, static_cast<std::ptrdiff_t>(j));
        const double total = detail::line_w2_squared(a, b, matching_out, s);
        return std::sqrt(total / static_cast<double>(s));
    }

    std::vector<double> cost(s * s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            const double d = omega_distance(m1.entries[i], m2.entries[j]);
            cost[i * s + j] = d * d;
        }
    std::vector<std::size_t> row_to_col;
    const double total = solve_assignment(cost, s, row_to_col);
    if (matching_out)
        for (std::size_t i = 0; i < s; ++i) (*matching_out)[i] = static_cast<std::ptrdiff_t>(row_to_col[i]);
    return std::sqrt((total < 0.0 ? 0.0 : total) / static_cast<double>(s));
}

namespace detail {

// d(cost)/d(birth, lifetime) of the first argument for one matched pair of
// the squared quotient distance; at the branch tie the direct branch is
// the chosen subgradient.
inline void omega_sq_grad(const OmegaPoint& a, const OmegaPoint& b, double& db, double& dl) {
    db = 0.0;
    dl = 0.0;
    if (a.is_trivial()) return;
    if (b.is_trivial()) {
        dl = 2.0 * a.lifetime;
        return;
    }
    const double bd = a.birth - b.birth;
    const double ld = a.lifetime - b.lifetime;
    const double direct_sq = bd * bd + ld * ld;
    const double via_star = a.lifetime + b.lifetime;
    if (direct_sq <= via_star * via_star) {
        db = 2.0 * bd;
        dl = 2.0 * ld;
    } else {
        dl = 2.0 * via_star;
    }
}

} // namespace detail

} // namespace ppmreg
