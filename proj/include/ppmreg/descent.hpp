#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppmreg/config.hpp"
#include "ppmreg/diagram_metrics.hpp"
#include "ppmreg/loss.hpp"
#include "ppmreg/vr.hpp"

namespace ppmreg {

// Heavy-ball momentum over point coordinates:
//   v <- momentum * v - step_size * grad V,   x <- x + v.
// The Nesterov variant evaluates the gradient at the lookahead point
// x + momentum * v instead.
struct OptimizerState {
    std::vector<double> velocity;
    double step_size = 0.05;
    double momentum = 0.9;
    bool nesterov = false;

    static OptimizerState init(const PointCloud& cloud, double step_size, double momentum,
                               bool nesterov = false) {
        OptimizerState st;
        st.velocity.assign(cloud.flat().size(), 0.0);
        st.step_size = step_size;
        st.momentum = momentum;
        st.nesterov = nesterov;
        return st;
    }
};

// loss(x, grad) evaluates V at x, accumulating dV/dx when grad != nullptr.
using LossFn = std::function<LossBreakdown(const PointCloud&, GradAccumulator*)>;

inline LossBreakdown descend_step(PointCloud& cloud, OptimizerState& state, const LossFn& loss) {
    if (state.velocity.size() != cloud.flat().size())
        throw ContractViolation("descend_step: velocity shape mismatch");
    GradAccumulator grad(cloud);
    LossBreakdown breakdown;
    if (state.nesterov && state.momentum != 0.0) {
        PointCloud ahead = cloud;
        auto& a = ahead.mutable_flat();
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += state.momentum * state.velocity[k];
        breakdown = loss(ahead, &grad);
    } else {
        breakdown = loss(cloud, &grad);
    }
    if (!grad.all_finite())
        throw std::runtime_error("descend_step: non-finite gradient (value " +
                                 std::to_string(breakdown.total) + ")");
    auto g = grad.flat();
    auto& x = cloud.mutable_flat();
    for (std::size_t k = 0; k < x.size(); ++k) {
        state.velocity[k] = state.momentum * state.velocity[k] - state.step_size * g[k];
        x[k] += state.velocity[k];
    }
    return breakdown;
}

struct TrajectoryRecord {
    std::size_t step = 0;
    double total = 0.0;
    double main = 0.0;
    double reg = 0.0;
    double penalty = 0.0;
    std::optional<double> pd_dist;  // dimension-1 diagram distance to the reference
    double wall_s = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;

    const TrajectoryRecord& final_record() const { return records.back(); }
};

// CSV rows for every record. Wall-clock seconds vary run to run, so the
// column is off by default to keep equal-seed outputs byte-identical.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out,
                                 bool emit_walltime = false) {
    std::string line = "step,total,main,reg,penalty,pd_dist";
    if (emit_walltime) line += ",wall_s";
    line += '\n';
    out << line;
    for (const auto& r : traj.records) {
        line.clear();
        line += std::to_string(r.step);
        line += ',';
        format_double(line, r.total);
        line += ',';
        format_double(line, r.main);
        line += ',';
        format_double(line, r.reg);
        line += ',';
        format_double(line, r.penalty);
        line += ',';
        if (r.pd_dist) format_double(line, *r.pd_dist);
        if (emit_walltime) {
            line += ',';
            format_double(line, r.wall_s);
        }
        line += '\n';
        out << line;
    }
}

// Per-record callback; cloud is the trained cloud at that record.
using RecordHook = std::function<void(const TrajectoryRecord&, const PointCloud&)>;

// Cosine annealing from max down to min over the first t_end steps.
inline double cosine_annealed(double lo, double hi, std::size_t t, std::size_t t_end) {
    if (t > t_end) return lo;
    return lo + 0.5 * (hi - lo) *
                    (1.0 + std::cos(static_cast<double>(t) * 3.14159265358979323846 /
                                    static_cast<double>(t_end)));
}

// Runs the configured experiment. Deterministic for a fixed config and
// seed: the reference shape is drawn first, then the trained initial
// cloud, then (in cached-reference mode) the reference subsample plans,
// then one step plan per optimization step.
inline Trajectory run_experiment(const ExperimentConfig& cfg, const RecordHook& hook = {}) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    RngStream rng(cfg.seed);
    const PointCloud reference = generate_shape(cfg.reference, rng);
    PointCloud trained = generate_shape(cfg.trained, rng);
    const int workers = resolve_workers(cfg.workers);

    LossSpec spec = cfg.loss;
    const ReferenceCache cache =
        make_reference_cache(reference, spec, rng, cfg.pd_metric, workers);
    OptimizerState state = OptimizerState::init(trained, cfg.step_size, cfg.momentum, cfg.nesterov);

    Trajectory traj;
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };
    auto pd_distance = [&](const PointCloud& cloud) -> double {
        const auto diagrams = vr_persistence(cloud, 1, spec.vr_cap);
        return wasserstein2_diagrams(diagrams[1], cache.diagrams[1]);
    };
    auto record = [&](std::size_t step, const LossBreakdown& b, bool with_pd) {
        TrajectoryRecord r;
        r.step = step;
        r.total = b.total;
        r.main = b.main;
        r.reg = b.reg;
        r.penalty = b.penalty;
        if (with_pd && cfg.pd_metric) r.pd_dist = pd_distance(trained);
        r.wall_s = elapsed();
        traj.records.push_back(r);
        if (hook) hook(traj.records.back(), trained);
    };

    auto annealed_lambda1 = [&](std::size_t t) {
        return cosine_annealed(cfg.lambda1_min, cfg.lambda1_max, t, cfg.anneal_steps);
    };
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        if (cfg.cosine_lambda1) spec.weights.lambda1 = annealed_lambda1(t);
        const StepPlan plan = make_step_plan(spec, trained.size(), reference.size(), rng);
        if (t % cfg.record_every == 0) {
            const LossBreakdown b = composite_eval(trained, reference, spec, plan, cache, workers, nullptr);
            const bool with_pd = cfg.pd_every != 0 && t % cfg.pd_every == 0;
            record(t, b, with_pd);
        }
        const LossFn loss = [&](const PointCloud& x, GradAccumulator* g) {
            return composite_eval(x, reference, spec, plan, cache, workers, g);
        };
        descend_step(trained, state, loss);
    }
    if (cfg.cosine_lambda1) spec.weights.lambda1 = annealed_lambda1(cfg.steps);
    const StepPlan plan = make_step_plan(spec, trained.size(), reference.size(), rng);
    const LossBreakdown b = composite_eval(trained, reference, spec, plan, cache, workers, nullptr);
    record(cfg.steps, b, true);
    return traj;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker.

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    bool all_pass = true;
};

namespace detail {

inline double fd_max_rel_err(const PointCloud& cloud, const std::function<double(const PointCloud&)>& value,
                             const GradAccumulator& analytic, double h, bool corrupt) {
    double worst = 0.0;
    PointCloud probe = cloud;
    auto& x = probe.mutable_flat();
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = x[k];
        x[k] = saved + h;
        const double up = value(probe);
        x[k] = saved - h;
        const double down = value(probe);
        x[k] = saved;
        const double fd = (up - down) / (2.0 * h);
        double a = analytic.flat()[k];
        if (corrupt && k == 0) a += 1e-2;  // deliberate fault for detector tests
        const double denom = std::max({std::abs(fd), std::abs(a), 1e-6});
        worst = std::max(worst, std::abs(a - fd) / denom);
    }
    return worst;
}

} // namespace detail

// Checks every enabled loss term against central finite differences on
// random small clouds with frozen subsample plans. `corrupt` injects a
// known gradient error so tests can confirm the checker actually detects
// failures.
inline GradCheckReport check_gradients(std::uint64_t seed, std::size_t n_clouds,
                                       std::size_t cloud_size, int workers, bool corrupt = false,
                                       double h = 1e-5) {
    GradCheckReport report;
    RngStream rng(seed);

    auto random_cloud = [&](std::size_t n) {
        std::vector<double> flat(n * 2);
        for (double& v : flat) v = rng.next_unit();
        return PointCloud(std::move(flat), 2);
    };

    struct Term {
        std::string name;
        LossSpec spec;
        double tol;
    };
    std::vector<Term> terms;
    {
        LossSpec cramer;
        cramer.main = MainLoss::cramer;
        terms.push_back({"cramer", cramer, 1e-6});

        LossSpec mmd;
        mmd.main = MainLoss::mmd;
        mmd.mmd_sigma = 0.1;
        terms.push_back({"ambient_mmd", mmd, 1e-5});

        LossSpec penalty;
        penalty.main = MainLoss::none;
        penalty.penalty_enabled = true;
        penalty.penalty = PenaltyParams{2.0, 20.0, 0.3};
        terms.push_back({"centroid_penalty", penalty, 1e-5});

        LossSpec ppm;
        ppm.main = MainLoss::none;
        ppm.reg = RegKind::ppm_mmd;
        ppm.weights = RegWeights{1.0, 1.0, 1.0};
        ppm.rbf.sigma = 0.1;
        ppm.subsamples = 16;
        terms.push_back({"ppm_reg", ppm, 1e-4});

        LossSpec composite;
        composite.main = MainLoss::cramer;
        composite.main_weight = 1.6;
        composite.reg = RegKind::ppm_mmd;
        composite.weights = RegWeights{1.0, 1.0, 2.0};
        composite.rbf.sigma = 0.1;
        composite.subsamples = 16;
        composite.penalty_enabled = true;
        composite.penalty = PenaltyParams{2.0, 20.0, 0.3};
        terms.push_back({"composite", composite, 1e-4});
    }

    for (const auto& term : terms) {
        GradCheckCase c;
        c.name = term.name;
        c.tol = term.tol;
        for (std::size_t rep = 0; rep < n_clouds; ++rep) {
            const PointCloud trained = random_cloud(cloud_size);
            const PointCloud reference = random_cloud(cloud_size);
            RngStream plan_rng(seed ^ (0x9e3779b9ULL + rep * 1010101ULL));
            const StepPlan plan = make_step_plan(term.spec, trained.size(), reference.size(), plan_rng);
            ReferenceCache cache = make_reference_cache(reference, term.spec, plan_rng, false, workers);

            GradAccumulator grad(trained);
            composite_eval(trained, reference, term.spec, plan, cache, workers, &grad);
            const auto value = [&](const PointCloud& x) {
                return composite_eval(x, reference, term.spec, plan, cache, workers, nullptr).total;
            };
            c.max_rel_err =
                std::max(c.max_rel_err, detail::fd_max_rel_err(trained, value, grad, h, corrupt));
        }
        c.pass = c.max_rel_err < c.tol;
        report.all_pass = report.all_pass && c.pass;
        report.cases.push_back(c);
    }
    return report;
}

} // namespace ppmreg
