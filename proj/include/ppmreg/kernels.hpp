#pragma once

#include <cmath>
#include <vector>

#include "ppmreg/errors.hpp"
#include "ppmreg/fastmath.hpp"
#include "ppmreg/omega.hpp"
#include "ppmreg/parallel.hpp"
#include "ppmreg/ppm.hpp"

namespace ppmreg {

// RBF width. Note the convention: the exponent is -||z1-z2||^2 / (2*sigma),
// so sigma acts as a squared width. This matches the experiments this
// library reproduces and deliberately differs from the more common
// exp(-r^2 / (2*sigma^2)).
struct RbfParams {
    double sigma = 0.1;

    void validate() const {
        if (!(sigma > 0.0)) throw ConfigError("rbf sigma must be positive");
    }
};

// Lifetime-weighted RBF kernel on the quotient half-plane. The lifetime
// factors make the kernel vanish at the trivial point, so trivial entries
// carry mass in the normalization but never contribute kernel values.
inline double k_omega(const OmegaPoint& a, const OmegaPoint& b, const RbfParams& params) {
    if (a.is_trivial() || b.is_trivial()) return 0.0;
    const double db = a.birth - b.birth;
    const double dl = a.lifetime - b.lifetime;
    return a.lifetime * b.lifetime * exp_neg(-(db * db + dl * dl) / (2.0 * params.sigma));
}

namespace detail {

// Non-trivial entries of a measure, packed for the O(s^2) kernel loops.
struct FeatureView {
    std::vector<double> b, l;
    std::vector<std::uint32_t> src;  // position in the original entry list

    static FeatureView from(const PersistenceMeasure& m) {
        FeatureView v;
        v.b.reserve(m.size());
        v.l.reserve(m.size());
        v.src.reserve(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m.entries[i].is_trivial()) continue;
            v.b.push_back(m.entries[i].birth);
            v.l.push_back(m.entries[i].lifetime);
            v.src.push_back(static_cast<std::uint32_t>(i));
        }
        return v;
    }

    std::size_t count() const { return b.size(); }
};

// sum_{i in A, j in B} k_omega(a_i, b_j), optionally with the row gradients
// sum_j d k / d(b_i, l_i). Row-block parallel; the block partial sums are
// reduced in block order so results do not depend on the worker count.
inline double kernel_sum(const FeatureView& fa, const FeatureView& fb, double sigma, int workers,
                         std::vector<double>* row_db, std::vector<double>* row_dl) {
    const std::size_t na = fa.count();
    const std::size_t nb = fb.count();
    if (na == 0 || nb == 0) return 0.0;
    const double inv_2s = 1.0 / (2.0 * sigma);
    const double inv_s = 1.0 / sigma;

    constexpr std::size_t kBlock = 64;
    const std::size_t nblocks = (na + kBlock - 1) / kBlock;
    std::vector<double> block_sums(nblocks, 0.0);

    const double* bb = fb.b.data();
    const double* ll = fb.l.data();

    parallel_blocks(na, kBlock, workers, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
        double total = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double bi = fa.b[i];
            const double li = fa.l[i];
            double s_k = 0.0, s_kdx = 0.0, s_lj = 0.0, s_kdy = 0.0;
            for (std::size_t j = 0; j < nb; ++j) {
                const double dx = bi - bb[j];
                const double dy = li - ll[j];
                const double e = exp_neg(-(dx * dx + dy * dy) * inv_2s);
                const double e_lj = ll[j] * e;
                const double kk = li * e_lj;
                s_k += kk;
                s_kdx += kk * dx;
                s_lj += e_lj;
                s_kdy += kk * dy;
            }
            total += s_k;
            if (row_db) (*row_db)[i] = -s_kdx * inv_s;
            if (row_dl) (*row_dl)[i] = s_lj - s_kdy * inv_s;
        }
        block_sums[blk] = total;
    });

    double sum = 0.0;
    for (double v : block_sums) sum += v;
    return sum;
}

} // namespace detail

// Biased (V-statistic) empirical MMD^2 between two measures with the same
// homology dimension. N and M count all entries including trivial ones;
// kernel values only arise between features. Rounding can push the result
// a hair below zero, which is clamped.
inline double mmd_squared(const PersistenceMeasure& m1, const PersistenceMeasure& m2,
                          const RbfParams& params, int workers = 1) {
    if (m1.q != m2.q) throw ContractViolation("mmd_squared: homology dimensions differ");
    params.validate();
    const double n = static_cast<double>(m1.size());
    const double m = static_cast<double>(m2.size());
    const auto fa = detail::FeatureView::from(m1);
    const auto fb = detail::FeatureView::from(m2);
    const double saa = detail::kernel_sum(fa, fa, params.sigma, workers, nullptr, nullptr);
    const double sab = detail::kernel_sum(fa, fb, params.sigma, workers, nullptr, nullptr);
    const double sbb = detail::kernel_sum(fb, fb, params.sigma, workers, nullptr, nullptr);
    const double v = saa / (n * n) - 2.0 * sab / (n * m) + sbb / (m * m);
    return v < 0.0 ? 0.0 : v;
}

// MMD^2 plus its gradient with respect to the first measure's entries
// (and optionally the second's). Gradient vectors are indexed by entry
// position; trivial entries receive zero.
inline double mmd_squared_grad(const PersistenceMeasure& m1, const PersistenceMeasure& m2,
                               const RbfParams& params, int workers, std::vector<double>& d_birth1,
                               std::vector<double>& d_lifetime1,
                               std::vector<double>* d_birth2 = nullptr,
                               std::vector<double>* d_lifetime2 = nullptr,
                               const double* precomputed_sbb = nullptr) {
    if (m1.q != m2.q) throw ContractViolation("mmd_squared_grad: homology dimensions differ");
    params.validate();
    const double n = static_cast<double>(m1.size());
    const double m = static_cast<double>(m2.size());
    const auto fa = detail::FeatureView::from(m1);
    const auto fb = detail::FeatureView::from(m2);

    std::vector<double> raa_db(fa.count()), raa_dl(fa.count());
    std::vector<double> rab_db(fa.count()), rab_dl(fa.count());
    const double saa = detail::kernel_sum(fa, fa, params.sigma, workers, &raa_db, &raa_dl);
    const double sab = detail::kernel_sum(fa, fb, params.sigma, workers, &rab_db, &rab_dl);

    d_birth1.assign(m1.size(), 0.0);
    d_lifetime1.assign(m1.size(), 0.0);
    for (std::size_t i = 0; i < fa.count(); ++i) {
        const std::uint32_t s = fa.src[i];
        d_birth1[s] = 2.0 * raa_db[i] / (n * n) - 2.0 * rab_db[i] / (n * m);
        d_lifetime1[s] = 2.0 * raa_dl[i] / (n * n) - 2.0 * rab_dl[i] / (n * m);
    }

    double sbb;
    if (d_birth2 && d_lifetime2) {
        std::vector<double> rbb_db(fb.count()), rbb_dl(fb.count());
        std::vector<double> rba_db(fb.count()), rba_dl(fb.count());
        sbb = detail::kernel_sum(fb, fb, params.sigma, workers, &rbb_db, &rbb_dl);
        detail::kernel_sum(fb, fa, params.sigma, workers, &rba_db, &rba_dl);
        d_birth2->assign(m2.size(), 0.0);
        d_lifetime2->assign(m2.size(), 0.0);
        for (std::size_t i = 0; i < fb.count(); ++i) {
            const std::uint32_t s = fb.src[i];
            (*d_birth2)[s] = 2.0 * rbb_db[i] / (m * m) - 2.0 * rba_db[i] / (n * m);
            (*d_lifetime2)[s] = 2.0 * rbb_dl[i] / (m * m) - 2.0 * rba_dl[i] / (n * m);
        }
    } else if (precomputed_sbb) {
        sbb = *precomputed_sbb;
    } else {
        sbb = detail::kernel_sum(fb, fb, params.sigma, workers, nullptr, nullptr);
    }

    const double v = saa / (n * n) - 2.0 * sab / (n * m) + sbb / (m * m);
    return v < 0.0 ? 0.0 : v;
}

// Self-sum of a measure, cacheable when one side of the MMD stays fixed.
inline double mmd_self_sum(const PersistenceMeasure& m, const RbfParams& params, int workers = 1) {
    const auto f = detail::FeatureView::from(m);
    return detail::kernel_sum(f, f, params.sigma, workers, nullptr, nullptr);
}

// Weights of the combined regularizer: lambda scales the whole term in the
// composite loss, lambda0/lambda1 weight the dimension-0 and dimension-1
// contributions.
struct RegWeights {
    double lambda = 1.0;
    double lambda0 = 1.0;
    double lambda1 = 1.0;

    void validate() const {
        if (lambda < 0.0 || lambda0 < 0.0 || lambda1 < 0.0)
            throw ConfigError("regularizer weights must be non-negative");
    }
};

// Near zero the square root is not differentiable; below this threshold the
// gradient of sqrt(MMD^2) is defined as zero.
inline constexpr double kMmdSqrtGuard = 1e-12;

// Subsample index plans for both clouds and both homology dimensions,
// drawn once per optimization step. Freezing a plan makes the regularizer
// a deterministic function of the coordinates, which is what the
// finite-difference checks differentiate.
struct PpmRegPlan {
    SubsamplePlan a0, a1, b0, b1;
};

inline PpmRegPlan make_ppm_reg_plan(std::size_t n_a, std::size_t n_b, std::size_t s,
                                    bool replacement, RngStream& rng) {
    PpmRegPlan p;
    p.a0 = make_subsample_plan(n_a, 0, s, replacement, rng);
    p.a1 = make_subsample_plan(n_a, 1, s, replacement, rng);
    p.b0 = make_subsample_plan(n_b, 0, s, replacement, rng);
    p.b1 = make_subsample_plan(n_b, 1, s, replacement, rng);
    return p;
}

struct PpmRegResult {
    double value = 0.0;  // lambda0 * T0 + lambda1 * T1 (overall lambda not applied)
    double t0 = 0.0;
    double t1 = 0.0;
};

// Measures may be precomputed (cached reference mode); pass nullptr to
// compute from the plan. The self sums accompany the cached measures.
struct PpmRegSides {
    const PersistenceMeasure* b0 = nullptr;
    const PersistenceMeasure* b1 = nullptr;
    const double* self_sum_b0 = nullptr;
    const double* self_sum_b1 = nullptr;
};

// Value of the topological regularizer and, when accumulators are given,
// its gradient with respect to the cloud coordinates. By default each
// per-dimension term is the MMD norm; squared mode optimizes MMD^2, which
// is smoother near zero. grad_scale multiplies the accumulated gradient
// (the composite loss passes its overall lambda through here).
inline PpmRegResult ppm_reg_eval(const PointCloud& cloud_a, const PointCloud& cloud_b,
                                 const PpmRegPlan& plan, const RegWeights& weights,
                                 const RbfParams& params, bool squared = false, int workers = 1,
                                 GradAccumulator* grad_a = nullptr,
                                 GradAccumulator* grad_b = nullptr,
                                 const PpmRegSides& cached = {}, double grad_scale = 1.0) {
    weights.validate();
    params.validate();
    PpmRegResult out;

    auto one_dim = [&](const SubsamplePlan& pa, const SubsamplePlan& pb,
                       const PersistenceMeasure* mb_cached, const double* sbb_cached,
                       double weight) -> double {
        if (weight == 0.0) return 0.0;
        const PersistenceMeasure ma = compute_ppm(cloud_a, pa, workers);
        PersistenceMeasure mb_local;
        const PersistenceMeasure* mb = mb_cached;
        if (!mb) {
            mb_local = compute_ppm(cloud_b, pb, workers);
            mb = &mb_local;
            sbb_cached = nullptr;
        }
        if (!grad_a && !grad_b) {
            const double m2 = mmd_squared(ma, *mb, params, workers);
            return squared ? m2 : std::sqrt(m2);
        }
        std::vector<double> db1, dl1, db2, dl2;
        const double m2 =
            mmd_squared_grad(ma, *mb, params, workers, db1, dl1, grad_b ? &db2 : nullptr,
                             grad_b ? &dl2 : nullptr, grad_b ? nullptr : sbb_cached);
        // d(term)/d(mmd2): 1 in squared mode, 1/(2 sqrt) otherwise (guarded).
        double chain;
        if (squared)
            chain = 1.0;
        else
            chain = m2 < kMmdSqrtGuard ? 0.0 : 0.5 / std::sqrt(m2);
        const double f = grad_scale * weight * chain;
        if (f != 0.0) {
            if (grad_a) {
                for (double& v : db1) v *= f;
                for (double& v : dl1) v *= f;
                ppm_backward(ma, cloud_a, db1, dl1, *grad_a);
            }
            if (grad_b) {
                for (double& v : db2) v *= f;
                for (double& v : dl2) v *= f;
                ppm_backward(*mb, cloud_b, db2, dl2, *grad_b);
            }
        }
        return squared ? m2 : std::sqrt(m2);
    };

    out.t0 = one_dim(plan.a0, plan.b0, cached.b0, cached.self_sum_b0, weights.lambda0);
    out.t1 = one_dim(plan.a1, plan.b1, cached.b1, cached.self_sum_b1, weights.lambda1);
    out.value = weights.lambda0 * out.t0 + weights.lambda1 * out.t1;
    return out;
}

// Convenience form matching the step-free call signature: draws fresh
// subsamples from the stream and returns the regularizer value.
inline double ppm_reg_value(const PointCloud& cloud_a, const PointCloud& cloud_b,
                            const RegWeights& weights, const RbfParams& params, std::size_t s,
                            RngStream& rng, bool replacement = false, int workers = 1) {
    const PpmRegPlan plan = make_ppm_reg_plan(cloud_a.size(), cloud_b.size(), s, replacement, rng);
    return ppm_reg_eval(cloud_a, cloud_b, plan, weights, params, false, workers).value;
}

} // namespace ppmreg
