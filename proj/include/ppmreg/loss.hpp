#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ppmreg/ambient.hpp"
#include "ppmreg/diagram_metrics.hpp"
#include "ppmreg/errors.hpp"
#include "ppmreg/kernels.hpp"
#include "ppmreg/vr.hpp"

namespace ppmreg {

enum class MainLoss { none, cramer, mmd };

// Topological regularizers: the MMD-between-PPMs term this library is
// about, plus the two transport baselines it is benchmarked against.
// The Wasserstein variants train through the fixed optimal matching of the
// current step, which is experimental; they exist primarily for the
// timing and quality comparisons.
enum class RegKind { none, ppm_mmd, ppm_w2, pd_w2 };

struct LossSpec {
    MainLoss main = MainLoss::cramer;
    double main_weight = 1.0;
    double mmd_sigma = 0.1;  // ambient MMD width

    RegKind reg = RegKind::none;
    RegWeights weights;
    RbfParams rbf;
    std::size_t subsamples = 2000;
    bool replacement = false;
    bool squared = false;             // optimize MMD^2 instead of MMD
    bool resample_reference = true;   // fresh reference subsamples each step
    std::size_t vr_cap = 1024;        // pd_w2 and the PD trajectory metric

    bool penalty_enabled = false;
    PenaltyParams penalty;

    void validate() const {
        if (main_weight < 0.0) throw ConfigError("main loss weight must be >= 0");
        if (main == MainLoss::mmd && !(mmd_sigma > 0.0))
            throw ConfigError("ambient mmd sigma must be positive");
        if (reg != RegKind::none) weights.validate();
        if (reg == RegKind::ppm_mmd || reg == RegKind::ppm_w2) {
            if (reg == RegKind::ppm_mmd) rbf.validate();
            if (subsamples < 1) throw ConfigError("subsample count must be >= 1");
        }
        if (penalty_enabled) penalty.validate();
    }

    bool uses_ppm() const { return reg == RegKind::ppm_mmd || reg == RegKind::ppm_w2; }
};

// Everything about the fixed reference cloud that can be computed once per
// run: ambient self sums, the reference persistence diagrams, and (in
// cached mode) the reference PPMs with their kernel self sums.
struct ReferenceCache {
    AmbientSelfSums ambient;
    bool has_ppm = false;
    PersistenceMeasure ppm0, ppm1;
    double ppm_self_sum0 = 0.0, ppm_self_sum1 = 0.0;
    bool has_diagrams = false;
    std::vector<PersistenceDiagram> diagrams;
};

// Draw order is fixed: dimension-0 plan for the reference, then
// dimension-1, consuming the stream exactly once per run in cached mode.
inline ReferenceCache make_reference_cache(const PointCloud& reference, const LossSpec& spec,
                                           RngStream& rng, bool need_diagrams, int workers = 1) {
    ReferenceCache cache;
    if (spec.main == MainLoss::cramer && spec.main_weight > 0.0)
        cache.ambient.cramer_self = detail::pair_distance_sum(reference, reference, workers, nullptr);
    if (spec.main == MainLoss::mmd && spec.main_weight > 0.0)
        cache.ambient.rbf_self = detail::rbf_sum(reference, reference, spec.mmd_sigma, workers, nullptr);
    if (spec.uses_ppm() && !spec.resample_reference) {
        const auto p0 = make_subsample_plan(reference.size(), 0, spec.subsamples, spec.replacement, rng);
        const auto p1 = make_subsample_plan(reference.size(), 1, spec.subsamples, spec.replacement, rng);
        cache.ppm0 = compute_ppm(reference, p0, workers);
        cache.ppm1 = compute_ppm(reference, p1, workers);
        if (spec.reg == RegKind::ppm_mmd) {
            cache.ppm_self_sum0 = mmd_self_sum(cache.ppm0, spec.rbf, workers);
            cache.ppm_self_sum1 = mmd_self_sum(cache.ppm1, spec.rbf, workers);
        }
        cache.has_ppm = true;
    }
    if (need_diagrams || spec.reg == RegKind::pd_w2) {
        cache.diagrams = vr_persistence(reference, 1, spec.vr_cap);
        cache.has_diagrams = true;
    }
    return cache;
}

// Per-step randomness, drawn sequentially up front so that evaluation is a
// pure function of the coordinates (which is exactly what the
// finite-difference checks need).
struct StepPlan {
    PpmRegPlan ppm;
    bool has_ppm = false;
};

inline StepPlan make_step_plan(const LossSpec& spec, std::size_t n_trained, std::size_t n_reference,
                               RngStream& rng) {
    StepPlan plan;
    if (!spec.uses_ppm()) return plan;
    plan.has_ppm = true;
    plan.ppm.a0 = make_subsample_plan(n_trained, 0, spec.subsamples, spec.replacement, rng);
    plan.ppm.a1 = make_subsample_plan(n_trained, 1, spec.subsamples, spec.replacement, rng);
    if (spec.resample_reference) {
        plan.ppm.b0 = make_subsample_plan(n_reference, 0, spec.subsamples, spec.replacement, rng);
        plan.ppm.b1 = make_subsample_plan(n_reference, 1, spec.subsamples, spec.replacement, rng);
    }
    return plan;
}

// Sub-loss values are recorded unweighted; the total applies the weights:
// total = main_weight * main + lambda * reg + penalty.
struct LossBreakdown {
    double total = 0.0;
    double main = 0.0;
    double reg = 0.0;   // lambda0 * term0 + lambda1 * term1
    double reg0 = 0.0;  // unweighted dimension-0 term
    double reg1 = 0.0;  // unweighted dimension-1 term
    double penalty = 0.0;
};

namespace detail {

// Shared gradient path of the two transport regularizers: per-entry
// upstream gradients from the fixed optimal matching of W = sqrt(C / s).
inline void transport_upstream(const std::vector<OmegaPoint>& mine,
                               const std::vector<OmegaPoint>& other,
                               const std::vector<std::ptrdiff_t>& matching, double chain,
                               std::vector<double>& d_birth, std::vector<double>& d_lifetime) {
    d_birth.assign(mine.size(), 0.0);
    d_lifetime.assign(mine.size(), 0.0);
    if (chain == 0.0) return;
    for (std::size_t i = 0; i < mine.size(); ++i) {
        const OmegaPoint to = matching[i] == kMatchedToStar
                                  ? OmegaPoint::trivial()
                                  : other[static_cast<std::size_t>(matching[i])];
        double db, dl;
        omega_sq_grad(mine[i], to, db, dl);
        d_birth[i] = chain * db;
        d_lifetime[i] = chain * dl;
    }
}

} // namespace detail

// One evaluation of V = main_weight * L + lambda * T + penalty at the
// given coordinates under a frozen plan; accumulates the gradient with
// respect to the trained cloud when an accumulator is supplied.
inline LossBreakdown composite_eval(const PointCloud& trained, const PointCloud& reference,
                                    const LossSpec& spec, const StepPlan& plan,
                                    const ReferenceCache& cache, int workers,
                                    GradAccumulator* grad) {
    spec.validate();
    LossBreakdown out;

    if (spec.main != MainLoss::none && spec.main_weight > 0.0) {
        if (spec.main == MainLoss::cramer) {
            out.main = grad ? cramer_grad(trained, reference, workers, *grad, spec.main_weight,
                                          &cache.ambient.cramer_self)
                            : cramer_distance(trained, reference, workers, &cache.ambient.cramer_self);
        } else {
            out.main = grad ? ambient_mmd_grad(trained, reference, spec.mmd_sigma, workers, *grad,
                                               spec.main_weight, &cache.ambient.rbf_self)
                            : ambient_mmd(trained, reference, spec.mmd_sigma, workers,
                                          &cache.ambient.rbf_self);
        }
    }

    if (spec.reg == RegKind::ppm_mmd && plan.has_ppm) {
        PpmRegSides sides;
        if (cache.has_ppm) {
            sides.b0 = &cache.ppm0;
            sides.b1 = &cache.ppm1;
            sides.self_sum_b0 = &cache.ppm_self_sum0;
            sides.self_sum_b1 = &cache.ppm_self_sum1;
        }
        const PpmRegResult r =
            ppm_reg_eval(trained, reference, plan.ppm, spec.weights, spec.rbf, spec.squared,
                         workers, grad, nullptr, sides, spec.weights.lambda);
        out.reg = r.value;
        out.reg0 = r.t0;
        out.reg1 = r.t1;
    } else if (spec.reg == RegKind::ppm_w2 && plan.has_ppm) {
        auto one_dim = [&](const SubsamplePlan& pa, const SubsamplePlan& pb,
                           const PersistenceMeasure* mb_cached, double weight) -> double {
            if (weight == 0.0) return 0.0;
            const PersistenceMeasure ma = compute_ppm(trained, pa, workers);
            PersistenceMeasure mb_local;
            const PersistenceMeasure* mb = mb_cached;
            if (!mb) {
                mb_local = compute_ppm(reference, pb, workers);
                mb = &mb_local;
            }
            std::vector<std::ptrdiff_t> matching;
            const double w = wasserstein2_ppm(ma, *mb, grad ? &matching : nullptr);
            if (grad && w > 0.0) {
                // W = sqrt(C / s): dW/dC = 1 / (2 W s).
                const double chain = spec.weights.lambda * weight /
                                     (2.0 * w * static_cast<double>(ma.size()));
                std::vector<double> db, dl;
                detail::transport_upstream(ma.entries, mb->entries, matching, chain, db, dl);
                ppm_backward(ma, trained, db, dl, *grad);
            }
            return w;
        };
        out.reg0 = one_dim(plan.ppm.a0, plan.ppm.b0, cache.has_ppm ? &cache.ppm0 : nullptr,
                           spec.weights.lambda0);
        out.reg1 = one_dim(plan.ppm.a1, plan.ppm.b1, cache.has_ppm ? &cache.ppm1 : nullptr,
                           spec.weights.lambda1);
        out.reg = spec.weights.lambda0 * out.reg0 + spec.weights.lambda1 * out.reg1;
    } else if (spec.reg == RegKind::pd_w2) {
        if (!cache.has_diagrams)
            throw ContractViolation("pd_w2 regularizer needs reference diagrams in the cache");
        const auto diagrams = vr_persistence(trained, 1, spec.vr_cap);
        auto one_dim = [&](const PersistenceDiagram& da, const PersistenceDiagram& db_ref,
                           double weight) -> double {
            if (weight == 0.0) return 0.0;
            std::vector<std::ptrdiff_t> matching;
            const double w = wasserstein2_diagrams(da, db_ref, grad ? &matching : nullptr);
            if (grad && w > 0.0) {
                // W = sqrt(C): dW/dC = 1 / (2 W).
                const double chain = spec.weights.lambda * weight / (2.0 * w);
                std::vector<OmegaPoint> mine(da.points.size()), other(db_ref.points.size());
                for (std::size_t i = 0; i < da.points.size(); ++i)
                    mine[i] = {da.points[i].birth, da.points[i].lifetime};
                for (std::size_t j = 0; j < db_ref.points.size(); ++j)
                    other[j] = {db_ref.points[j].birth, db_ref.points[j].lifetime};
                std::vector<double> dbv, dlv;
                detail::transport_upstream(mine, other, matching, chain, dbv, dlv);
                diagram_backward(da, trained, dbv, dlv, *grad);
            }
            return w;
        };
        out.reg0 = one_dim(diagrams[0], cache.diagrams[0], spec.weights.lambda0);
        out.reg1 = one_dim(diagrams[1], cache.diagrams[1], spec.weights.lambda1);
        out.reg = spec.weights.lambda0 * out.reg0 + spec.weights.lambda1 * out.reg1;
    }

    if (spec.penalty_enabled) {
        out.penalty = grad ? centroid_penalty_grad(trained, reference, spec.penalty, *grad, 1.0)
                           : centroid_penalty(trained, reference, spec.penalty);
    }

    out.total = spec.main_weight * out.main + spec.weights.lambda * out.reg + out.penalty;
    return out;
}

} // namespace ppmreg
