#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "ppmreg/errors.hpp"
#include "ppmreg/geometry.hpp"
#include "ppmreg/omega.hpp"
#include "ppmreg/parallel.hpp"
#include "ppmreg/rng.hpp"

namespace ppmreg {

// The argmax/argmin selections behind one small-sample persistence value:
// which index pair realized the birth distance and which realized the
// death distance. Gradients flow through exactly these two pairs.
struct WitnessRecord {
    std::array<std::uint32_t, 4> subsample{};  // 2q+2 entries used
    std::uint8_t subsample_size = 0;
    std::uint32_t birth_i = 0, birth_j = 0;  // d(x_bi, x_bj) = birth time
    std::uint32_t death_i = 0, death_j = 0;  // d(x_di, x_dj) = death time
    bool trivial = true;
};

struct PhSmallResult {
    OmegaPoint point;
    WitnessRecord witness;
};

// Persistence of a (2q+2)-point sample in one closed form. For each
// member x, rank the distances from x to the whole sample *including x
// itself*; x1 is the farthest point, x2 the second farthest (ties keep
// the lowest index). The feature is
//     birth = max_x d(x, x2),   death = min_x d(x, x1),
// collapsing to the trivial point unless death > birth. Including x itself
// is what makes q=0 work: the self-distance 0 forces birth = 0 there.
inline PhSmallResult ph_small(const PointCloud& cloud, std::span<const std::uint32_t> idx, int q) {
    const std::size_t k = static_cast<std::size_t>(2 * q + 2);
    if (q < 0) throw ContractViolation("ph_small: q must be >= 0");
    if (idx.size() != k) throw ContractViolation("ph_small: subsample must have exactly 2q+2 points");

    double birth_time = -1.0;
    std::size_t birth_a = 0, birth_b = 0;
    double death_time = 0.0;
    std::size_t death_a = 0, death_b = 0;
    bool death_set = false;

    for (std::size_t a = 0; a < k; ++a) {
        double best = -1.0, second = -1.0;
        std::size_t best_idx = a, second_idx = a;
        for (std::size_t b = 0; b < k; ++b) {
            const double d = cloud.distance(idx[a], idx[b]);
            if (d > best) {
                second = best;
                second_idx = best_idx;
                best = d;
                best_idx = b;
            } else if (d > second) {
                second = d;
                second_idx = b;
            }
        }
        if (second > birth_time) {
            birth_time = second;
            birth_a = a;
            birth_b = second_idx;
        }
        if (!death_set || best < death_time) {
            death_time = best;
            death_a = a;
            death_b = best_idx;
            death_set = true;
        }
    }

    PhSmallResult r;
    for (std::size_t i = 0; i < k; ++i) r.witness.subsample[i] = idx[i];
    r.witness.subsample_size = static_cast<std::uint8_t>(k);
    r.witness.birth_i = idx[birth_a];
    r.witness.birth_j = idx[birth_b];
    r.witness.death_i = idx[death_a];
    r.witness.death_j = idx[death_b];
    if (death_time > birth_time) {
        r.point = OmegaPoint::feature(birth_time, death_time - birth_time);
        r.witness.trivial = false;
    } else {
        r.point = OmegaPoint::trivial();
        r.witness.trivial = true;
    }
    return r;
}

// Pre-drawn subsample index lists: s rows of 2q+2 indices each. Drawing is
// strictly sequential on the stream; evaluation order over rows is free.
struct SubsamplePlan {
    int q = 0;
    std::size_t s = 0;
    std::vector<std::uint32_t> indices;  // s * (2q+2), row-major

    std::span<const std::uint32_t> row(std::size_t i) const {
        const std::size_t k = static_cast<std::size_t>(2 * q + 2);
        return {indices.data() + i * k, k};
    }
};

inline SubsamplePlan make_subsample_plan(std::size_t cloud_size, int q, std::size_t s,
                                         bool replacement, RngStream& rng) {
    if (q != 0 && q != 1) throw ConfigError("supported homology dimensions are 0 and 1");
    if (s < 1) throw ConfigError("subsample count must be >= 1");
    if (cloud_size == 0) throw ConfigError("cannot subsample an empty cloud");
    const std::size_t k = static_cast<std::size_t>(2 * q + 2);
    if (!replacement && cloud_size < k)
        throw ConfigError("cloud has fewer than 2q+2 points; enable replacement or add points");

    SubsamplePlan plan;
    plan.q = q;
    plan.s = s;
    plan.indices.resize(s * k);
    std::uint32_t* row = plan.indices.data();
    for (std::size_t i = 0; i < s; ++i, row += k) {
        for (std::size_t j = 0; j < k; ++j) {
            std::uint32_t v;
            for (;;) {
                v = static_cast<std::uint32_t>(rng.next_index(cloud_size));
                if (replacement) break;
                bool dup = false;
                for (std::size_t m = 0; m < j; ++m)
                    if (row[m] == v) { dup = true; break; }
                if (!dup) break;
            }
            row[j] = v;
        }
    }
    return plan;
}

// Empirical principal persistence measure: the s per-subsample outcomes,
// trivial entries included, each carrying mass 1/s.
struct PersistenceMeasure {
    int q = 0;
    std::size_t source_size = 0;  // size of the cloud the witnesses index
    std::vector<OmegaPoint> entries;
    std::vector<WitnessRecord> witnesses;

    std::size_t size() const { return entries.size(); }
};

inline PersistenceMeasure compute_ppm(const PointCloud& cloud, const SubsamplePlan& plan,
                                      int workers = 1) {
    PersistenceMeasure m;
    m.q = plan.q;
    m.source_size = cloud.size();
    m.entries.resize(plan.s);
    m.witnesses.resize(plan.s);
    parallel_blocks(plan.s, 512, workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            PhSmallResult r = ph_small(cloud, plan.row(i), plan.q);
            m.entries[i] = r.point;
            m.witnesses[i] = r.witness;
        }
    });
    return m;
}

inline PersistenceMeasure compute_ppm(const PointCloud& cloud, int q, std::size_t s, RngStream& rng,
                                      bool replacement = false, int workers = 1) {
    const SubsamplePlan plan = make_subsample_plan(cloud.size(), q, s, replacement, rng);
    return compute_ppm(cloud, plan, workers);
}

// Per-point gradient buffer, same shape as the cloud it was built for.
class GradAccumulator {
public:
    GradAccumulator() = default;
    GradAccumulator(std::size_t n_points, std::size_t dim) : grad_(n_points * dim, 0.0), dim_(dim) {}
    explicit GradAccumulator(const PointCloud& cloud) : GradAccumulator(cloud.size(), cloud.dim()) {}

    std::size_t points() const { return dim_ == 0 ? 0 : grad_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> flat() const { return grad_; }
    std::vector<double>& mutable_flat() { return grad_; }
    double* point(std::size_t i) { return grad_.data() + i * dim_; }
    std::span<const double> point(std::size_t i) const { return {grad_.data() + i * dim_, dim_}; }

    void reset() { std::fill(grad_.begin(), grad_.end(), 0.0); }

    void add(std::size_t i, std::span<const double> v, double scale) {
        double* g = point(i);
        for (std::size_t d = 0; d < dim_; ++d) g[d] += scale * v[d];
    }

    // scale * gradient of d(x_i, x_j) with respect to both endpoints.
    // The subgradient 0 is used at coincident points.
    void add_pair_distance_gradient(const PointCloud& cloud, std::size_t i, std::size_t j,
                                    double scale) {
        const double d = cloud.distance(i, j);
        if (d <= 0.0) return;
        const double f = scale / d;
        auto a = cloud.point(i);
        auto b = cloud.point(j);
        double* gi = point(i);
        double* gj = point(j);
        for (std::size_t k = 0; k < dim_; ++k) {
            const double diff = (a[k] - b[k]) * f;
            gi[k] += diff;
            gj[k] -= diff;
        }
    }

    void add_scaled(const GradAccumulator& other, double scale) {
        for (std::size_t k = 0; k < grad_.size(); ++k) grad_[k] += scale * other.grad_[k];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : grad_) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const {
        for (double v : grad_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::vector<double> grad_;
    std::size_t dim_ = 0;
};

// Chain rule from per-entry (birth, lifetime) gradients back to point
// coordinates through the witness pairs. lifetime = death - birth, so the
// birth pair receives d_birth - d_lifetime and the death pair d_lifetime.
// Trivial entries contribute nothing.
inline void ppm_backward(const PersistenceMeasure& measure, const PointCloud& cloud,
                         std::span<const double> d_birth, std::span<const double> d_lifetime,
                         GradAccumulator& accum) {
    if (measure.source_size != cloud.size() || accum.points() != cloud.size() ||
        accum.dim() != cloud.dim())
        throw ContractViolation("ppm_backward: measure/cloud/accumulator shapes disagree");
    if (d_birth.size() != measure.size() || d_lifetime.size() != measure.size())
        throw ContractViolation("ppm_backward: upstream gradient length mismatch");

    for (std::size_t i = 0; i < measure.size(); ++i) {
        const WitnessRecord& w = measure.witnesses[i];
        if (w.trivial) continue;
        const double g_birth_time = d_birth[i] - d_lifetime[i];
        const double g_death_time = d_lifetime[i];
        if (g_birth_time != 0.0)
            accum.add_pair_distance_gradient(cloud, w.birth_i, w.birth_j, g_birth_time);
        if (g_death_time != 0.0)
            accum.add_pair_distance_gradient(cloud, w.death_i, w.death_j, g_death_time);
    }
}

inline void write_measure_ndjson(const PersistenceMeasure& m, std::ostream& out) {
    std::string line;
    for (const auto& e : m.entries) {
        line.clear();
        line += "{\"q\":";
        line += std::to_string(m.q);
        if (e.is_trivial()) {
            line += ",\"trivial\":true}";
        } else {
            line += ",\"birth\":";
            format_double(line, e.birth);
            line += ",\"lifetime\":";
            format_double(line, e.lifetime);
            line += "}";
        }
        line += '\n';
        out << line;
    }
}

} // namespace ppmreg
