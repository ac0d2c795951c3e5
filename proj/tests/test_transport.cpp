#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "ppmreg/diagram_metrics.hpp"
#include "ppmreg/verify.hpp"

using namespace ppmreg;

namespace {

PersistenceDiagram diagram_of(std::vector<std::pair<double, double>> pts, int q = 1) {
    PersistenceDiagram d;
    d.q = q;
    for (auto [b, l] : pts) {
        DiagramPoint p;
        p.birth = b;
        p.lifetime = l;
        d.points.push_back(p);
    }
    return d;
}

PersistenceMeasure measure_of(std::vector<OmegaPoint> pts, int q = 1) {
    PersistenceMeasure m;
    m.q = q;
    m.entries = std::move(pts);
    m.witnesses.resize(m.entries.size());
    return m;
}

double brute_force_assignment(const std::vector<double>& cost, std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

TEST_CASE("omega distance: worked examples") {
    const OmegaPoint f01 = OmegaPoint::feature(0, 1);
    CHECK(omega_distance(f01, OmegaPoint::trivial()) == doctest::Approx(1.0));
    CHECK(omega_distance(f01, OmegaPoint::feature(10, 1)) == doctest::Approx(2.0));
    CHECK(omega_distance(f01, OmegaPoint::feature(0.1, 1)) == doctest::Approx(0.1));
    CHECK(omega_distance(OmegaPoint::trivial(), OmegaPoint::trivial()) == 0.0);
}

TEST_CASE("omega distance satisfies the metric axioms") {
    RngStream rng(1);
    auto sample = [&] {
        if (rng.next_unit() < 0.2) return OmegaPoint::trivial();
        return OmegaPoint::feature(rng.next_unit() * 3.0, 0.01 + rng.next_unit() * 2.0);
    };
    for (int rep = 0; rep < 2000; ++rep) {
        const auto a = sample(), b = sample(), c = sample();
        CHECK(omega_distance(a, b) == doctest::Approx(omega_distance(b, a)).epsilon(1e-12));
        CHECK(omega_distance(a, a) <= 1e-12);
        CHECK(omega_distance(a, b) <= omega_distance(a, c) + omega_distance(c, b) + 1e-12);
    }
}

TEST_CASE("solve_assignment agrees with permutation brute force") {
    RngStream rng(2);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 1 + rng.next_index(6);
        std::vector<double> cost(n * n);
        for (double& v : cost) v = rng.next_unit();
        std::vector<std::size_t> match;
        const double got = solve_assignment(cost, n, match);
        CHECK(got == doctest::Approx(brute_force_assignment(cost, n)).epsilon(1e-12));
        // match is a permutation achieving the reported cost
        std::vector<char> seen(n, 0);
        double check = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(!seen[match[i]]);
            seen[match[i]] = 1;
            check += cost[i * n + match[i]];
        }
        CHECK(check == doctest::Approx(got).epsilon(1e-12));
    }
}

TEST_CASE("wasserstein2_diagrams: worked examples") {
    const auto empty = diagram_of({});
    CHECK(wasserstein2_diagrams(diagram_of({{0, 2}}), empty) == doctest::Approx(2.0));
    CHECK(wasserstein2_diagrams(diagram_of({{0, 1}}), diagram_of({{0.3, 1}})) ==
          doctest::Approx(0.3));
    const auto d = diagram_of({{0.2, 0.5}, {1.0, 0.25}});
    CHECK(wasserstein2_diagrams(d, d) <= 1e-12);
}

TEST_CASE("wasserstein2_diagrams: dimension mismatch is rejected") {
    CHECK_THROWS_AS(wasserstein2_diagrams(diagram_of({}, 0), diagram_of({}, 1)),
                    ContractViolation);
}

TEST_CASE("wasserstein2_diagrams obeys the split triangle inequality") {
    RngStream rng(3);
    for (int rep = 0; rep < 40; ++rep) {
        auto sample = [&](std::size_t n) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < n; ++i)
                pts.emplace_back(rng.next_unit(), 0.05 + rng.next_unit());
            return diagram_of(pts);
        };
        const auto d1 = sample(1 + rng.next_index(5));
        const auto d2 = sample(1 + rng.next_index(5));
        const auto empty = diagram_of({});
        CHECK(wasserstein2_diagrams(d1, d2) <=
              wasserstein2_diagrams(d1, empty) + wasserstein2_diagrams(empty, d2) + 1e-9);
    }
}

TEST_CASE("fast path for birth-zero diagrams equals the assignment solver") {
    RngStream rng(4);
    for (int rep = 0; rep < 50; ++rep) {
        auto lifetimes = [&](std::size_t n) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < n; ++i) pts.emplace_back(0.0, 0.05 + rng.next_unit());
            return pts;
        };
        const auto d1 = diagram_of(lifetimes(1 + rng.next_index(6)), 0);
        const auto d2 = diagram_of(lifetimes(rng.next_index(6)), 0);
        const double fast = wasserstein2_diagrams(d1, d2);

        // Same instance forced down the general path by an epsilon birth.
        auto nudge = [](PersistenceDiagram d) {
            for (auto& p : d.points) p.birth = 1e-14;
            return d;
        };
        const double general = wasserstein2_diagrams(nudge(d1), nudge(d2));
        CHECK(fast == doctest::Approx(general).epsilon(1e-6));
    }
}

TEST_CASE("wasserstein2_ppm: worked examples") {
    const auto m1 = measure_of({OmegaPoint::feature(0, 1), OmegaPoint::trivial()});
    const auto m2 = measure_of({OmegaPoint::trivial(), OmegaPoint::trivial()});
    CHECK(wasserstein2_ppm(m1, m2) == doctest::Approx(std::sqrt(0.5)));
    CHECK(wasserstein2_ppm(m1, m1) <= 1e-12);
}

TEST_CASE("wasserstein2_ppm enforces equal counts and dimensions") {
    const auto m1 = measure_of({OmegaPoint::feature(0, 1)});
    const auto m2 = measure_of({OmegaPoint::trivial(), OmegaPoint::trivial()});
    CHECK_THROWS_AS(wasserstein2_ppm(m1, m2), ContractViolation);
    const auto m3 = measure_of({OmegaPoint::feature(0, 1)}, 0);
    CHECK_THROWS_AS(wasserstein2_ppm(m1, m3), ContractViolation);
}

TEST_CASE("wasserstein2_ppm equals factorial brute force at s=6") {
    RngStream rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        auto sample = [&] {
            std::vector<OmegaPoint> pts;
            for (int i = 0; i < 6; ++i)
                pts.push_back(rng.next_unit() < 0.25
                                  ? OmegaPoint::trivial()
                                  : OmegaPoint::feature(rng.next_unit(), 0.05 + rng.next_unit()));
            return measure_of(pts);
        };
        const auto m1 = sample(), m2 = sample();
        CHECK(std::abs(wasserstein2_ppm(m1, m2) - detail::brute_force_w2_ppm(m1, m2)) <= 1e-10);
    }
}

TEST_CASE("transport regularizer gradients match finite differences at generic points") {
    // The Wasserstein baselines train through the fixed optimal matching;
    // away from matching switches that subgradient is the true derivative.
    RngStream rng(9);
    auto random_cloud = [&](std::size_t n) {
        std::vector<double> flat(n * 2);
        for (double& v : flat) v = rng.next_unit();
        return PointCloud(std::move(flat), 2);
    };
    const PointCloud trained = random_cloud(7);
    const PointCloud reference = random_cloud(7);

    for (RegKind kind : {RegKind::ppm_w2, RegKind::pd_w2}) {
        LossSpec spec;
        spec.main = MainLoss::none;
        spec.reg = kind;
        spec.weights = RegWeights{1.0, 0.7, 1.3};
        spec.subsamples = 12;
        RngStream plan_rng(31);
        const StepPlan plan = make_step_plan(spec, trained.size(), reference.size(), plan_rng);
        const ReferenceCache cache = make_reference_cache(reference, spec, plan_rng, false, 1);

        GradAccumulator grad(trained);
        composite_eval(trained, reference, spec, plan, cache, 1, &grad);
        const double h = 1e-7;
        PointCloud probe = trained;
        auto& x = probe.mutable_flat();
        double worst = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double saved = x[k];
            x[k] = saved + h;
            const double up = composite_eval(probe, reference, spec, plan, cache, 1, nullptr).total;
            x[k] = saved - h;
            const double down =
                composite_eval(probe, reference, spec, plan, cache, 1, nullptr).total;
            x[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad.flat()[k]), 1e-6});
            worst = std::max(worst, std::abs(grad.flat()[k] - fd) / denom);
        }
        INFO("kind ", kind == RegKind::ppm_w2 ? "ppm_w2" : "pd_w2", " worst rel err ", worst);
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("ppm transport grows at most linearly under perturbation") {
    RngStream gen(6);
    std::vector<double> flat(128);
    for (double& v : flat) v = gen.next_unit() * 2.0;
    const PointCloud cloud(flat, 2);

    double mean_small = 0.0, mean_large = 0.0;
    const int seeds = 5;
    for (int seed = 0; seed < seeds; ++seed) {
        RngStream rng(100 + seed);
        const auto plan = make_subsample_plan(cloud.size(), 1, 64, false, rng);
        const auto base = compute_ppm(cloud, plan);
        std::vector<double> dir(flat.size());
        for (double& v : dir) v = rng.next_unit() * 2.0 - 1.0;

        double prev = 0.0;
        for (double eps : {0.01, 0.02, 0.05}) {
            std::vector<double> moved = flat;
            for (std::size_t k = 0; k < moved.size(); ++k) moved[k] += eps * dir[k];
            const PointCloud perturbed(std::move(moved), 2);
            const auto m = compute_ppm(perturbed, plan);  // common subsample indices
            const double w = wasserstein2_ppm(base, m);
            CHECK(w >= prev - 1e-9);  // monotone within noise
            prev = w;
            if (eps == 0.01) mean_small += w;
            if (eps == 0.05) mean_large += w;
        }
    }
    mean_small /= seeds;
    mean_large /= seeds;
    // Linear growth would give a ratio of 5; allow sampling slack.
    CHECK(mean_large <= 6.0 * mean_small);
}
