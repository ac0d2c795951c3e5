#include "doctest.h"

#include <cmath>

#include "ppmreg/descent.hpp"

using namespace ppmreg;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.trained = ShapeSpec{ShapeKind::gaussian_blob, 24};
    cfg.trained.stddev = 0.3;
    cfg.reference = ShapeSpec{ShapeKind::circle, 24};
    cfg.loss.main = MainLoss::cramer;
    cfg.loss.reg = RegKind::ppm_mmd;
    cfg.loss.weights = RegWeights{1.0, 1.0, 10.0};
    cfg.loss.subsamples = 32;
    cfg.steps = 10;
    cfg.record_every = 5;
    cfg.pd_every = 5;
    cfg.seed = 3;
    cfg.workers = 1;
    return cfg;
}

} // namespace

TEST_CASE("zero gradient leaves a zero-velocity cloud unchanged") {
    PointCloud cloud = PointCloud::from_points({{1, 2}, {3, 4}});
    const auto before = std::vector<double>(cloud.flat().begin(), cloud.flat().end());
    OptimizerState st = OptimizerState::init(cloud, 0.1, 0.9);
    const LossFn loss = [](const PointCloud&, GradAccumulator*) { return LossBreakdown{}; };
    descend_step(cloud, st, loss);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(cloud.flat()[k] == before[k]);
}

TEST_CASE("zero momentum reduces to plain gradient descent") {
    PointCloud cloud = PointCloud::from_points({{2, -1}});
    OptimizerState st = OptimizerState::init(cloud, 0.25, 0.0);
    const LossFn loss = [](const PointCloud& x, GradAccumulator* g) {
        LossBreakdown b;
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto p = x.point(i);
            for (std::size_t d = 0; d < x.dim(); ++d) b.total += p[d] * p[d];
        }
        if (g)
            for (std::size_t i = 0; i < x.size(); ++i) g->add(i, x.point(i), 2.0);
        return b;
    };
    descend_step(cloud, st, loss);
    CHECK(cloud.point(0)[0] == doctest::Approx(2.0 - 0.25 * 4.0).epsilon(1e-15));
    CHECK(cloud.point(0)[1] == doctest::Approx(-1.0 + 0.25 * (-2.0) * -1.0).epsilon(1e-15));
}

TEST_CASE("momentum iterates match the closed-form recurrence") {
    // Single free point, squared distance to the origin.
    PointCloud cloud = PointCloud::from_points({{1.7, -0.4}});
    const double eta = 0.05, mu = 0.9;
    OptimizerState st = OptimizerState::init(cloud, eta, mu);
    const LossFn loss = [](const PointCloud& x, GradAccumulator* g) {
        LossBreakdown b;
        auto p = x.point(0);
        b.total = p[0] * p[0] + p[1] * p[1];
        if (g) g->add(0, p, 2.0);
        return b;
    };
    double x0 = 1.7, x1 = -0.4, v0 = 0.0, v1 = 0.0;
    for (int t = 0; t < 40; ++t) {
        descend_step(cloud, st, loss);
        v0 = mu * v0 - eta * 2.0 * x0;
        v1 = mu * v1 - eta * 2.0 * x1;
        x0 += v0;
        x1 += v1;
        CHECK(cloud.point(0)[0] == doctest::Approx(x0).epsilon(1e-12));
        CHECK(cloud.point(0)[1] == doctest::Approx(x1).epsilon(1e-12));
    }
}

TEST_CASE("nesterov evaluates the gradient at the lookahead point") {
    PointCloud cloud = PointCloud::from_points({{1.0, 0.0}});
    const double eta = 0.1, mu = 0.5;
    OptimizerState st = OptimizerState::init(cloud, eta, mu, true);
    st.velocity = {0.2, 0.0};
    const LossFn loss = [](const PointCloud& x, GradAccumulator* g) {
        LossBreakdown b;
        auto p = x.point(0);
        b.total = p[0] * p[0] + p[1] * p[1];
        if (g) g->add(0, p, 2.0);
        return b;
    };
    descend_step(cloud, st, loss);
    // gradient at x + mu*v = (1.1, 0): v' = mu*v - eta*2*1.1; x' = x + v'
    const double v_new = 0.5 * 0.2 - 0.1 * 2.0 * 1.1;
    CHECK(cloud.point(0)[0] == doctest::Approx(1.0 + v_new).epsilon(1e-15));
}

TEST_CASE("non-finite gradients abort with a diagnostic") {
    PointCloud cloud = PointCloud::from_points({{1, 1}});
    OptimizerState st = OptimizerState::init(cloud, 0.1, 0.0);
    const LossFn loss = [](const PointCloud& x, GradAccumulator* g) {
        if (g) {
            const double bad[2] = {std::nan(""), 0.0};
            g->add(0, bad, 1.0);
        }
        return LossBreakdown{};
    };
    CHECK_THROWS_AS(descend_step(cloud, st, loss), std::runtime_error);
}

TEST_CASE("zero steps produce exactly one record") {
    ExperimentConfig cfg = tiny_config();
    cfg.steps = 0;
    const Trajectory traj = run_experiment(cfg);
    REQUIRE(traj.records.size() == 1);
    CHECK(traj.records[0].step == 0);
    CHECK(traj.records[0].pd_dist.has_value());
}

TEST_CASE("full-run determinism across runs and worker counts") {
    ExperimentConfig cfg = tiny_config();
    const Trajectory a = run_experiment(cfg);
    const Trajectory b = run_experiment(cfg);
    cfg.workers = 8;
    const Trajectory c = run_experiment(cfg);
    REQUIRE(a.records.size() == b.records.size());
    REQUIRE(a.records.size() == c.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].total == b.records[i].total);
        CHECK(a.records[i].total == c.records[i].total);
        CHECK(a.records[i].main == c.records[i].main);
        CHECK(a.records[i].reg == c.records[i].reg);
        CHECK(a.records[i].pd_dist.has_value() == c.records[i].pd_dist.has_value());
        if (a.records[i].pd_dist) CHECK(*a.records[i].pd_dist == *c.records[i].pd_dist);
    }
}

TEST_CASE("record cadence and final record") {
    ExperimentConfig cfg = tiny_config();
    cfg.steps = 12;
    cfg.record_every = 5;
    const Trajectory traj = run_experiment(cfg);
    REQUIRE(traj.records.size() == 4);  // steps 0, 5, 10 and the final 12
    CHECK(traj.records[0].step == 0);
    CHECK(traj.records[1].step == 5);
    CHECK(traj.records[2].step == 10);
    CHECK(traj.records[3].step == 12);
    CHECK(traj.records.back().pd_dist.has_value());
}

TEST_CASE("cramer-only descent does not increase over 500-step windows") {
    std::size_t good_seeds = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ExperimentConfig cfg;
        cfg.trained = ShapeSpec{ShapeKind::gaussian_blob, 64};
        cfg.trained.stddev = 0.3;
        cfg.reference = ShapeSpec{ShapeKind::circle, 64};
        cfg.loss.main = MainLoss::cramer;
        cfg.loss.reg = RegKind::none;
        cfg.steps = 1100;
        cfg.record_every = 10;
        cfg.pd_metric = false;
        cfg.step_size = 0.05;
        cfg.momentum = 0.9;
        cfg.seed = seed;
        cfg.workers = 1;
        const Trajectory traj = run_experiment(cfg);
        bool monotone = true;
        for (std::size_t i = 0; i + 50 < traj.records.size(); ++i)
            if (traj.records[i + 50].total > traj.records[i].total + 1e-12) monotone = false;
        if (monotone) ++good_seeds;
    }
    CHECK(good_seeds >= 9);
}

TEST_CASE("the centroid penalty holds the gap open at convergence") {
    // Penalty semantics at a reduced scale: with c_delta = 0.12 the main
    // loss cannot close the centroid gap below ~0.9 * c_delta.
    ExperimentConfig cfg = make_preset("circle-mmd-ppm-gap");
    cfg.trained.count = 128;
    cfg.reference.count = 128;
    cfg.loss.subsamples = 300;
    cfg.loss.resample_reference = false;
    cfg.loss.penalty.c_delta = 0.12;
    cfg.steps = 2500;
    cfg.record_every = 2500;
    cfg.pd_metric = false;
    cfg.seed = 11;
    cfg.workers = 1;

    RngStream rng(cfg.seed);
    const PointCloud reference = generate_shape(cfg.reference, rng);
    PointCloud final_cloud = PointCloud::from_points({{0, 0}});
    run_experiment(cfg, [&](const TrajectoryRecord&, const PointCloud& c) { final_cloud = c; });
    const auto ca = centroid(final_cloud);
    const auto cb = centroid(reference);
    const double gap = std::hypot(ca[0] - cb[0], ca[1] - cb[1]);
    CHECK(gap >= 0.9 * 0.12);
}

TEST_CASE("cosine annealing endpoints and tail") {
    CHECK(cosine_annealed(0.1, 1.0, 0, 100) == doctest::Approx(1.0));
    CHECK(cosine_annealed(0.1, 1.0, 100, 100) == doctest::Approx(0.1));
    CHECK(cosine_annealed(0.1, 1.0, 101, 100) == 0.1);
    CHECK(cosine_annealed(0.1, 1.0, 50, 100) == doctest::Approx(0.55));
}

TEST_CASE("gradient checker: clean run passes, corrupted run is caught") {
    const GradCheckReport clean = check_gradients(12345, 3, 8, 1, false);
    for (const auto& c : clean.cases) {
        INFO(c.name, " max rel err ", c.max_rel_err);
        CHECK(c.pass);
    }
    CHECK(clean.all_pass);

    const GradCheckReport corrupted = check_gradients(12345, 3, 8, 1, true);
    CHECK(!corrupted.all_pass);
}

TEST_CASE("trajectory csv omits wall time by default") {
    Trajectory traj;
    TrajectoryRecord r;
    r.step = 0;
    r.total = 1.5;
    r.pd_dist = 0.25;
    r.wall_s = 123.0;
    traj.records.push_back(r);
    std::ostringstream out;
    write_trajectory_csv(traj, out);
    CHECK(out.str() == "step,total,main,reg,penalty,pd_dist\n0,1.5,0,0,0,0.25\n");
    std::ostringstream with_time;
    write_trajectory_csv(traj, with_time, true);
    CHECK(with_time.str().find("wall_s") != std::string::npos);
}
