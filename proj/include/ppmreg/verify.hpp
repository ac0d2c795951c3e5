#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "ppmreg/descent.hpp"
#include "ppmreg/diagram_metrics.hpp"
#include "ppmreg/vr.hpp"

namespace ppmreg {

// Self-check suites behind the `verify` command: the closed form against
// the full reduction, metric axioms on the quotient plane, the assignment
// solver against factorial brute force, and the gradient checker.

struct SuiteResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string detail;

    bool pass() const { return failures == 0; }
};

namespace detail {

inline PointCloud random_unit_square_cloud(RngStream& rng, std::size_t n) {
    std::vector<double> flat(n * 2);
    for (double& v : flat) v = rng.next_unit();
    return PointCloud(std::move(flat), 2);
}

inline OmegaPoint random_omega(RngStream& rng, double trivial_prob = 0.2) {
    if (rng.next_unit() < trivial_prob) return OmegaPoint::trivial();
    return OmegaPoint::feature(rng.next_unit(), 0.05 + rng.next_unit());
}

inline double brute_force_w2_ppm(const PersistenceMeasure& m1, const PersistenceMeasure& m2) {
    const std::size_t s = m1.size();
    std::vector<std::size_t> perm(s);
    for (std::size_t i = 0; i < s; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            const double d = omega_distance(m1.entries[i], m2.entries[perm[i]]);
            total += d * d;
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(s));
}

} // namespace detail

// ph_small against vr_persistence on random 2q+2-point clouds.
inline SuiteResult suite_oracle_equivalence(std::size_t cases_per_q, std::uint64_t seed) {
    SuiteResult r;
    r.name = "closed-form vs full persistence";
    RngStream rng(seed);
    for (int q = 0; q <= 1; ++q) {
        const std::size_t k = static_cast<std::size_t>(2 * q + 2);
        std::vector<std::uint32_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = static_cast<std::uint32_t>(i);
        for (std::size_t c = 0; c < cases_per_q; ++c) {
            const PointCloud cloud = detail::random_unit_square_cloud(rng, k);
            const auto cmp = compare_ph_small_to_oracle(cloud, idx, q, 1e-9);
            ++r.cases;
            if (!cmp.match) {
                ++r.failures;
                if (r.detail.empty())
                    r.detail = "first failure: q=" + std::to_string(q) + " case " + std::to_string(c);
            }
        }
    }
    return r;
}

// Metric axioms for the quotient distance and the empirical MMD on random
// small measures.
inline SuiteResult suite_metric_axioms(std::size_t cases, std::uint64_t seed) {
    SuiteResult r;
    r.name = "metric axioms (omega distance, mmd)";
    RngStream rng(seed);
    const RbfParams params{0.5};
    for (std::size_t c = 0; c < cases; ++c) {
        const OmegaPoint a = detail::random_omega(rng);
        const OmegaPoint b = detail::random_omega(rng);
        const OmegaPoint z = detail::random_omega(rng);
        ++r.cases;
        bool ok = std::abs(omega_distance(a, b) - omega_distance(b, a)) <= 1e-12;
        ok = ok && omega_distance(a, a) <= 1e-12;
        ok = ok && omega_distance(a, b) <= omega_distance(a, z) + omega_distance(z, b) + 1e-12;

        auto measure = [&](std::size_t n) {
            PersistenceMeasure m;
            m.q = 0;
            for (std::size_t i = 0; i < n; ++i) m.entries.push_back(detail::random_omega(rng));
            m.witnesses.resize(n);
            return m;
        };
        const auto m1 = measure(4), m2 = measure(5), m3 = measure(3);
        const double d12 = std::sqrt(mmd_squared(m1, m2, params));
        const double d21 = std::sqrt(mmd_squared(m2, m1, params));
        const double d13 = std::sqrt(mmd_squared(m1, m3, params));
        const double d32 = std::sqrt(mmd_squared(m3, m2, params));
        ok = ok && std::abs(d12 - d21) <= 1e-9;
        ok = ok && d12 <= d13 + d32 + 1e-9;
        if (!ok) {
            ++r.failures;
            if (r.detail.empty()) r.detail = "first failure at case " + std::to_string(c);
        }
    }
    return r;
}

// Assignment-based transport against factorial brute force (s <= 7).
inline SuiteResult suite_transport_brute_force(std::size_t cases, std::uint64_t seed) {
    SuiteResult r;
    r.name = "transport vs factorial brute force";
    RngStream rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t s = 2 + rng.next_index(6);  // 2..7
        PersistenceMeasure m1, m2;
        m1.q = m2.q = 1;
        for (std::size_t i = 0; i < s; ++i) {
            m1.entries.push_back(detail::random_omega(rng, 0.25));
            m2.entries.push_back(detail::random_omega(rng, 0.25));
        }
        m1.witnesses.resize(s);
        m2.witnesses.resize(s);
        const double exact = wasserstein2_ppm(m1, m2);
        const double brute = detail::brute_force_w2_ppm(m1, m2);
        ++r.cases;
        if (std::abs(exact - brute) > 1e-10) {
            ++r.failures;
            if (r.detail.empty())
                r.detail = "case " + std::to_string(c) + ": exact " + std::to_string(exact) +
                           " vs brute " + std::to_string(brute);
        }
    }
    return r;
}

inline SuiteResult suite_gradients(std::size_t clouds, std::uint64_t seed, int workers,
                                   bool corrupt) {
    SuiteResult r;
    r.name = "analytic gradients vs finite differences";
    const GradCheckReport report = check_gradients(seed, clouds, 8, workers, corrupt);
    for (const auto& c : report.cases) {
        ++r.cases;
        if (!c.pass) {
            ++r.failures;
            if (r.detail.empty())
                r.detail = c.name + " max rel err " + std::to_string(c.max_rel_err) + " (tol " +
                           std::to_string(c.tol) + ")";
        }
    }
    return r;
}

inline std::vector<SuiteResult> run_verify(std::size_t oracle_cases, std::size_t metric_cases,
                                           std::size_t transport_cases, std::size_t grad_clouds,
                                           std::uint64_t seed, int workers, bool corrupt,
                                           std::ostream& out) {
    std::vector<SuiteResult> results;
    results.push_back(suite_oracle_equivalence(oracle_cases, seed));
    results.push_back(suite_metric_axioms(metric_cases, seed + 1));
    results.push_back(suite_transport_brute_force(transport_cases, seed + 2));
    results.push_back(suite_gradients(grad_clouds, seed + 3, workers, corrupt));
    for (const auto& r : results) {
        out << (r.pass() ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.cases << " cases";
        if (!r.pass()) out << ", " << r.failures << " failures; " << r.detail;
        out << ")\n";
    }
    return results;
}

} // namespace ppmreg
