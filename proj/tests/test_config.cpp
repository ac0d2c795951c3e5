#include "doctest.h"

#include <sstream>

#include "ppmreg/config.hpp"

using namespace ppmreg;

TEST_CASE("minimal config file parses with defaults") {
    std::istringstream in(
        "[trained]\n"
        "kind = gaussian_blob\n"
        "count = 64\n"
        "\n"
        "[reference]\n"
        "kind = circle\n"
        "count = 64\n"
        "\n"
        "[run]\n"
        "steps = 100  # short run\n"
        "seed = 7\n");
    const ExperimentConfig cfg = parse_config(in, "<test>");
    CHECK(cfg.trained.kind == ShapeKind::gaussian_blob);
    CHECK(cfg.trained.count == 64);
    CHECK(cfg.steps == 100);
    CHECK(cfg.seed == 7);
    CHECK(cfg.loss.main == MainLoss::cramer);  // default
}

TEST_CASE("unknown keys are rejected with a line reference") {
    std::istringstream in("[run]\nstps = 100\n");
    CHECK_THROWS_WITH_AS(parse_config(in, "<test>"), doctest::Contains("<test>:2"), ConfigError);
}

TEST_CASE("bad values carry their location") {
    std::istringstream in("[run]\nsteps = soon\n");
    CHECK_THROWS_WITH_AS(parse_config(in, "<test>"), doctest::Contains(":2"), ConfigError);
    std::istringstream in2("[optimizer]\nmomentum = 1.5\n");
    CHECK_THROWS_AS(parse_config(in2, "<test>"), ConfigError);
    std::istringstream in3("[run]\nsteps = 1\nsteps = 2\n");
    CHECK_THROWS_WITH_AS(parse_config(in3, "<test>"), doctest::Contains("duplicate"), ConfigError);
}

TEST_CASE("serialize/parse round trip is canonical") {
    ExperimentConfig cfg = make_preset("circle-cramer-ppm");
    cfg.seed = 42;
    cfg.loss.weights.lambda1 = 1234.5;
    const std::string once = serialize_config(cfg);
    std::istringstream in(once);
    const ExperimentConfig back = parse_config(in, "<round>");
    const std::string twice = serialize_config(back);
    CHECK(once == twice);
}

TEST_CASE("all presets validate") {
    for (const auto& name : preset_names()) {
        const ExperimentConfig cfg = make_preset(name);
        CHECK_NOTHROW(cfg.validate());
        // Round-trip every preset through the file format.
        std::istringstream in(serialize_config(cfg));
        const ExperimentConfig back = parse_config(in, name);
        CHECK(serialize_config(back) == serialize_config(cfg));
    }
    CHECK_THROWS_AS(make_preset("not-a-preset"), ConfigError);
}

TEST_CASE("preset hyperparameters match the shape-matching setup") {
    const ExperimentConfig cfg = make_preset("circle-cramer-ppm");
    CHECK(cfg.trained.kind == ShapeKind::gaussian_blob);
    CHECK(cfg.trained.count == 512);
    CHECK(cfg.trained.stddev == 0.3);
    CHECK(cfg.reference.kind == ShapeKind::circle);
    CHECK(cfg.loss.main == MainLoss::cramer);
    CHECK(cfg.loss.main_weight == 1.6);
    CHECK(cfg.loss.reg == RegKind::ppm_mmd);
    CHECK(cfg.loss.weights.lambda == 1.0);
    CHECK(cfg.loss.weights.lambda0 == 1.0);
    CHECK(cfg.loss.weights.lambda1 == 6000.0);
    CHECK(cfg.loss.rbf.sigma == 0.1);
    CHECK(cfg.loss.subsamples == 2000);
    CHECK(cfg.step_size == 0.05);
    CHECK(cfg.momentum == 0.9);
    CHECK(cfg.steps == 16000);

    const ExperimentConfig mmd = make_preset("circle-mmd-ppm");
    CHECK(mmd.loss.main == MainLoss::mmd);
    CHECK(mmd.loss.main_weight == 5.0);
    CHECK(mmd.loss.mmd_sigma == 0.1);

    const ExperimentConfig gap = make_preset("circle-mmd-ppm-gap");
    CHECK(gap.loss.penalty_enabled);
    CHECK(gap.loss.penalty.beta == 80.0);
    CHECK(gap.loss.penalty.c_delta == 0.04);
    CHECK(gap.step_size == 0.01);
    CHECK(gap.loss.weights.lambda0 == 0.3);

    const ExperimentConfig two = make_preset("two-circles-cramer");
    CHECK(two.reference.kind == ShapeKind::two_circles);
    CHECK(two.loss.reg == RegKind::none);
    CHECK(two.loss.main_weight == 1.0);
}

TEST_CASE("cosine annealing keys parse") {
    std::istringstream in(
        "[regularizer]\n"
        "kind = ppm_mmd\n"
        "cosine_lambda1 = true\n"
        "lambda1_min = 0.1\n"
        "lambda1_max = 1.0\n"
        "anneal_steps = 1920\n");
    const ExperimentConfig cfg = parse_config(in, "<test>");
    CHECK(cfg.cosine_lambda1);
    CHECK(cfg.lambda1_min == 0.1);
    CHECK(cfg.lambda1_max == 1.0);
    CHECK(cfg.anneal_steps == 1920);

    std::istringstream bad(
        "[regularizer]\n"
        "cosine_lambda1 = true\n");
    CHECK_THROWS_AS(parse_config(bad, "<test>"), ConfigError);
}
