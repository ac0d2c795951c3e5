// Command-line front end: shape-matching runs, timing benchmarks, the
// self-verification suites, and dumps of persistence measures / diagrams.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "ppmreg/bench.hpp"
#include "ppmreg/config.hpp"
#include "ppmreg/descent.hpp"
#include "ppmreg/svg.hpp"
#include "ppmreg/verify.hpp"

namespace fs = std::filesystem;
using namespace ppmreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSuiteFailure = 2;
constexpr int kExitRuntime = 3;

ExperimentConfig resolve_config(const std::string& name_or_path) {
    for (const auto& p : preset_names())
        if (p == name_or_path) return make_preset(p);
    return load_config(name_or_path);
}

struct RunOptions {
    std::string config;
    std::string out_dir = "ppmreg_out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = -1;
    std::int64_t steps = -1;
    std::int64_t record_every = -1;
    bool svg = false;
    bool list_presets = false;
    std::string dump_config;
};

int cmd_run(const RunOptions& opt) {
    if (opt.list_presets) {
        for (const auto& p : preset_names()) std::cout << p << "\n";
        return kExitOk;
    }
    if (opt.config.empty()) throw ConfigError("run: --config is required");
    ExperimentConfig cfg = resolve_config(opt.config);
    if (opt.seed_set) cfg.seed = opt.seed;
    if (opt.workers >= 0) cfg.workers = opt.workers;
    if (opt.steps >= 0) cfg.steps = static_cast<std::size_t>(opt.steps);
    if (opt.record_every > 0) cfg.record_every = static_cast<std::size_t>(opt.record_every);
    if (opt.svg) cfg.svg = true;
    cfg.validate();

    if (!opt.dump_config.empty()) {
        std::ofstream out(opt.dump_config);
        if (!out) throw ConfigError("cannot write " + opt.dump_config);
        out << serialize_config(cfg);
        return kExitOk;
    }

    fs::create_directories(opt.out_dir);
    if (cfg.svg) fs::create_directories(fs::path(opt.out_dir) / "frames");

    std::size_t frame = 0;
    RecordHook hook;
    RngStream shape_rng(cfg.seed);
    const PointCloud reference_for_frames = generate_shape(cfg.reference, shape_rng);
    if (cfg.svg) {
        hook = [&](const TrajectoryRecord&, const PointCloud& trained) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%06zu.svg", frame++);
            write_svg_frame(reference_for_frames, trained,
                            (fs::path(opt.out_dir) / "frames" / name).string());
        };
    }

    const Trajectory traj = run_experiment(cfg, hook);

    {
        std::ofstream out(fs::path(opt.out_dir) / "trajectory.csv");
        write_trajectory_csv(traj, out, cfg.emit_walltime);
    }
    {
        std::ofstream out(fs::path(opt.out_dir) / "config.ini");
        out << serialize_config(cfg);
    }
    const auto& last = traj.final_record();
    std::cout << "finished " << cfg.steps << " steps; final total " << last.total;
    if (last.pd_dist) std::cout << ", final dim-1 diagram distance " << *last.pd_dist;
    std::cout << "\noutputs in " << opt.out_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"principal persistence measure regularization toolkit"};
    app.require_subcommand(1);

    RunOptions run_opt;
    auto* run = app.add_subcommand("run", "run a shape-matching experiment");
    run->add_option("--config", run_opt.config, "preset name or config file path");
    run->add_option("--out", run_opt.out_dir, "output directory");
    run->add_option("--seed", run_opt.seed, "override the config seed")
        ->each([&](const std::string&) { run_opt.seed_set = true; });
    run->add_option("--workers", run_opt.workers, "worker threads (0 = hardware)");
    run->add_option("--steps", run_opt.steps, "override the step count");
    run->add_option("--record-every", run_opt.record_every, "override the record cadence");
    run->add_flag("--svg", run_opt.svg, "write an SVG frame per record");
    run->add_flag("--list-presets", run_opt.list_presets, "list preset names and exit");
    run->add_option("--dump-config", run_opt.dump_config,
                    "write the resolved config in canonical form and exit");

    BenchSpec bench_spec;
    std::string bench_out = "bench.csv";
    std::vector<std::string> bench_variants{"ppm_reg"};
    auto* bench = app.add_subcommand("bench", "time gradient steps over a grid");
    bench->add_option("--sizes", bench_spec.sizes, "cloud sizes")->delimiter(',');
    bench->add_option("--subsamples", bench_spec.subsamples, "subsample counts")->delimiter(',');
    bench->add_option("--variants", bench_variants, "ppm_reg, w_ppm_reg, pd_reg")->delimiter(',');
    bench->add_option("--reps", bench_spec.reps, "repetitions per cell (>= 3)");
    bench->add_option("--warmup", bench_spec.warmup_steps, "warmup steps");
    bench->add_option("--timed", bench_spec.timed_steps, "timed steps");
    bench->add_option("--seed", bench_spec.seed, "base seed");
    bench->add_option("--workers", bench_spec.workers, "worker threads (0 = hardware)");
    bench->add_option("--vr-cap", bench_spec.vr_cap, "full-persistence size cap");
    bench->add_option("--out", bench_out, "output CSV path");

    std::size_t verify_cases = 1000;
    std::size_t verify_metric_cases = 200;
    std::size_t verify_transport_cases = 200;
    std::size_t verify_grad_clouds = 5;
    std::uint64_t verify_seed = 20240901;
    int verify_workers = 0;
    bool verify_corrupt = false;
    auto* verify = app.add_subcommand("verify", "run the oracle and gradient self-checks");
    verify->add_option("--cases", verify_cases, "oracle-equivalence cases per dimension");
    verify->add_option("--metric-cases", verify_metric_cases, "metric-axiom cases");
    verify->add_option("--transport-cases", verify_transport_cases, "brute-force transport cases");
    verify->add_option("--grad-clouds", verify_grad_clouds, "clouds per gradient check");
    verify->add_option("--seed", verify_seed, "suite seed");
    verify->add_option("--workers", verify_workers, "worker threads (0 = hardware)");
    verify->add_flag("--corrupt-gradient", verify_corrupt,
                     "inject a gradient fault (detector self-test)")
        ->group("");  // hidden

    std::string ppm_in, ppm_out = "-";
    int ppm_q = -1;  // -1: both dimensions
    std::size_t ppm_s = 2000;
    std::uint64_t ppm_seed = 1;
    bool ppm_replacement = false;
    bool ppm_header = false;
    int ppm_workers = 0;
    auto* ppm = app.add_subcommand("ppm", "dump the persistence measure of a point cloud");
    ppm->add_option("--in", ppm_in, "point-cloud CSV")->required();
    ppm->add_flag("--header", ppm_header, "input CSV has a header row");
    ppm->add_option("--q", ppm_q, "homology dimension (0 or 1; default both)");
    ppm->add_option("--s", ppm_s, "subsample count");
    ppm->add_option("--seed", ppm_seed, "seed");
    ppm->add_flag("--replacement", ppm_replacement, "sample subsample indices with replacement");
    ppm->add_option("--workers", ppm_workers, "worker threads (0 = hardware)");
    ppm->add_option("--out", ppm_out, "output NDJSON path (- for stdout)");

    std::string diagram_in, diagram_out = "-";
    int diagram_max_dim = 1;
    std::size_t diagram_cap = 1024;
    bool diagram_header = false;
    int diagram_workers = 0;
    auto* diagram = app.add_subcommand("diagram", "dump full persistence diagrams of a point cloud");
    diagram->add_option("--in", diagram_in, "point-cloud CSV")->required();
    diagram->add_flag("--header", diagram_header, "input CSV has a header row");
    diagram->add_option("--workers", diagram_workers, "accepted for symmetry; the reduction is single-threaded");
    diagram->add_option("--max-dim", diagram_max_dim, "maximum homology dimension (0 or 1)");
    diagram->add_option("--cap", diagram_cap, "cloud-size cap");
    diagram->add_option("--out", diagram_out, "output CSV path (- for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_opt);

        if (bench->parsed()) {
            bench_spec.variants.clear();
            for (const auto& v : bench_variants) {
                if (v == "ppm_reg") bench_spec.variants.push_back(RegKind::ppm_mmd);
                else if (v == "w_ppm_reg") bench_spec.variants.push_back(RegKind::ppm_w2);
                else if (v == "pd_reg") bench_spec.variants.push_back(RegKind::pd_w2);
                else throw ConfigError("unknown bench variant '" + v + "'");
            }
            std::ofstream csv(bench_out);
            if (!csv) throw ConfigError("cannot write " + bench_out);
            run_bench(bench_spec, csv, std::cout);
            std::cout << "wrote " << bench_out << "\n";
            return kExitOk;
        }

        if (verify->parsed()) {
            const auto results =
                run_verify(verify_cases, verify_metric_cases, verify_transport_cases,
                           verify_grad_clouds, verify_seed, resolve_workers(verify_workers),
                           verify_corrupt, std::cout);
            for (const auto& r : results)
                if (!r.pass()) return kExitSuiteFailure;
            return kExitOk;
        }

        if (ppm->parsed()) {
            const PointCloud cloud = read_cloud_csv(ppm_in, ppm_header);
            RngStream rng(ppm_seed);
            std::ostringstream buf;
            const int workers = resolve_workers(ppm_workers);
            for (int q = 0; q <= 1; ++q) {
                if (ppm_q >= 0 && q != ppm_q) continue;
                const auto measure = compute_ppm(cloud, q, ppm_s, rng, ppm_replacement, workers);
                write_measure_ndjson(measure, buf);
            }
            if (ppm_out == "-") {
                std::cout << buf.str();
            } else {
                std::ofstream out(ppm_out);
                if (!out) throw ConfigError("cannot write " + ppm_out);
                out << buf.str();
            }
            return kExitOk;
        }

        if (diagram->parsed()) {
            const PointCloud cloud = read_cloud_csv(diagram_in, diagram_header);
            const auto diagrams = vr_persistence(cloud, diagram_max_dim, diagram_cap);
            std::ostringstream buf;
            write_diagram_csv(diagrams, buf);
            if (diagram_out == "-") {
                std::cout << buf.str();
            } else {
                std::ofstream out(diagram_out);
                if (!out) throw ConfigError("cannot write " + diagram_out);
                out << buf.str();
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
