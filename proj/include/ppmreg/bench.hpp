#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "ppmreg/descent.hpp"

namespace ppmreg {

// Timing grid: circle reference, gaussian-blob initialization, Cramer main
// loss, one of the three regularizers. Each cell warms up, then times the
// stated number of gradient steps, repeated r times from fresh
// initializations.
struct BenchSpec {
    std::vector<std::size_t> sizes{128, 256, 512, 1024};
    std::vector<std::size_t> subsamples{512, 1024, 2048};
    std::vector<RegKind> variants{RegKind::ppm_mmd};
    std::size_t reps = 3;
    std::size_t warmup_steps = 10;
    std::size_t timed_steps = 100;
    std::uint64_t seed = 1;
    int workers = 0;
    std::size_t vr_cap = 1024;

    void validate() const {
        if (reps < 3) throw ConfigError("bench repetitions must be >= 3");
        if (sizes.empty() || subsamples.empty() || variants.empty())
            throw ConfigError("bench grid must not be empty");
        for (RegKind v : variants)
            if (v == RegKind::none) throw ConfigError("bench variants must name a regularizer");
    }
};

struct BenchCell {
    RegKind variant = RegKind::ppm_mmd;
    std::size_t n = 0;
    std::size_t s = 0;
    std::vector<double> rep_seconds;
    double mean_s = 0.0;
    double std_s = 0.0;
};

inline const char* bench_variant_name(RegKind v) {
    switch (v) {
        case RegKind::ppm_mmd: return "ppm_reg";
        case RegKind::ppm_w2: return "w_ppm_reg";
        case RegKind::pd_w2: return "pd_reg";
        case RegKind::none: break;
    }
    return "none";
}

inline std::vector<BenchCell> run_bench(const BenchSpec& spec, std::ostream& csv,
                                        std::ostream& log) {
    spec.validate();
    std::vector<BenchCell> cells;
    csv << "variant,n_points,subsamples,reps,mean_seconds,std_seconds\n";

    for (RegKind variant : spec.variants) {
        for (std::size_t n : spec.sizes) {
            if (variant == RegKind::pd_w2 && n > spec.vr_cap) {
                log << "note: skipping pd_reg at n=" << n << " (exceeds vr cap " << spec.vr_cap
                    << ")\n";
                continue;
            }
            // Full persistence does not subsample; one cell per size.
            const std::vector<std::size_t> s_values =
                variant == RegKind::pd_w2 ? std::vector<std::size_t>{0} : spec.subsamples;
            for (std::size_t s : s_values) {
                BenchCell cell;
                cell.variant = variant;
                cell.n = n;
                cell.s = s;

                ExperimentConfig cfg;
                cfg.trained = ShapeSpec{ShapeKind::gaussian_blob, n};
                cfg.trained.stddev = 0.3;
                cfg.reference = ShapeSpec{ShapeKind::circle, n};
                cfg.loss.main = MainLoss::cramer;
                cfg.loss.main_weight = 1.6;
                cfg.loss.reg = variant;
                cfg.loss.weights = RegWeights{1.0, 1.0, 6000.0};
                cfg.loss.rbf.sigma = 0.1;
                cfg.loss.subsamples = s == 0 ? 1 : s;
                cfg.loss.vr_cap = spec.vr_cap;
                cfg.pd_metric = false;
                cfg.workers = spec.workers;
                cfg.step_size = 0.05;
                cfg.momentum = 0.9;

                for (std::size_t rep = 0; rep < spec.reps; ++rep) {
                    cfg.seed = spec.seed + rep;
                    RngStream rng(cfg.seed);
                    const PointCloud reference = generate_shape(cfg.reference, rng);
                    PointCloud trained = generate_shape(cfg.trained, rng);
                    const int workers = resolve_workers(cfg.workers);
                    const ReferenceCache cache =
                        make_reference_cache(reference, cfg.loss, rng, false, workers);
                    OptimizerState state =
                        OptimizerState::init(trained, cfg.step_size, cfg.momentum, false);
                    auto steps = [&](std::size_t count) {
                        for (std::size_t t = 0; t < count; ++t) {
                            const StepPlan plan =
                                make_step_plan(cfg.loss, trained.size(), reference.size(), rng);
                            const LossFn loss = [&](const PointCloud& x, GradAccumulator* g) {
                                return composite_eval(x, reference, cfg.loss, plan, cache, workers, g);
                            };
                            descend_step(trained, state, loss);
                        }
                    };
                    steps(spec.warmup_steps);
                    const auto t0 = std::chrono::steady_clock::now();
                    steps(spec.timed_steps);
                    const auto t1 = std::chrono::steady_clock::now();
                    cell.rep_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
                }

                double mean = 0.0;
                for (double v : cell.rep_seconds) mean += v;
                mean /= static_cast<double>(cell.rep_seconds.size());
                double var = 0.0;
                for (double v : cell.rep_seconds) var += (v - mean) * (v - mean);
                var /= static_cast<double>(cell.rep_seconds.size());
                cell.mean_s = mean;
                cell.std_s = std::sqrt(var);

                std::string line = bench_variant_name(variant);
                line += ',';
                line += std::to_string(n);
                line += ',';
                line += std::to_string(s);
                line += ',';
                line += std::to_string(spec.reps);
                line += ',';
                format_double(line, cell.mean_s);
                line += ',';
                format_double(line, cell.std_s);
                line += '\n';
                csv << line;
                log << "bench " << bench_variant_name(variant) << " n=" << n << " s=" << s
                    << ": " << cell.mean_s << " s (std " << cell.std_s << ")\n";
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

} // namespace ppmreg
