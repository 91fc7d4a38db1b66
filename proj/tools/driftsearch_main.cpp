// Command line front end: run scenarios, sweep the velocity ratio, render
// saved fields, and validate configs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftsearch/driftsearch.hpp"

namespace fs = std::filesystem;
using namespace driftsearch;

namespace {

/// Output directory priority: --out flag, config [run] out, then
/// $DRIFTSEARCH_OUT_ROOT/<config stem>, then ./out/<config stem>.
std::string resolve_out_dir(const std::string& flag_out, const ScenarioConfig& cfg,
                            const std::string& config_path) {
    if (!flag_out.empty()) return flag_out;
    if (!cfg.output.directory.empty()) return cfg.output.directory;
    const char* root = std::getenv("DRIFTSEARCH_OUT_ROOT");
    const fs::path base = root && *root ? fs::path(root) : fs::path("out");
    return (base / fs::path(config_path).stem()).string();
}

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            const std::string& out_flag) {
    ScenarioConfig cfg = parse_config_file(config_path);
    cfg.output.directory = resolve_out_dir(out_flag, cfg, config_path);
    ScenarioEngine engine(cfg, seed);
    const RunResult res = engine.run(true);
    std::printf("run complete: %d steps, eta=%.4f kappa=%.4f detected=%d/%d escaped=%d\n",
                res.steps, res.final_eta, res.final_kappa, res.n_detected, res.n_targets,
                res.n_escaped);
    std::printf("outputs in %s\n", cfg.output.directory.c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& lambdas,
              const std::vector<double>& horizons, int jobs, std::optional<uint64_t> seed,
              const std::string& out_flag) {
    ScenarioConfig cfg = parse_config_file(config_path);
    const std::string out_dir = resolve_out_dir(out_flag, cfg, config_path);
    const auto rows = sweep_lambda(cfg, lambdas, horizons, jobs, seed);
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "sweep.csv").string();
    write_sweep_csv(path, rows);
    std::printf("lambda      mode     horizon        eta      kappa\n");
    for (const SweepRow& r : rows) {
        std::printf("%-10.4g  %-7s  %-10.4g %8.4f  %8.4f\n", r.lambda,
                    r.mode == RunMode::DYNAMIC ? "dynamic" : "static", r.horizon, r.eta, r.kappa);
    }
    std::printf("%zu rows written to %s\n", rows.size(), path.c_str());
    return 0;
}

int cmd_render(const std::string& field_path, bool as_pgm, std::string out_path) {
    const LoadedField lf = read_field(field_path);
    if (out_path.empty()) {
        out_path = (fs::path(field_path).parent_path() /
                    (fs::path(field_path).stem().string() + (as_pgm ? ".pgm" : ".png")))
                       .string();
    }
    if (as_pgm) {
        const auto rgb = rasterize_field(lf.grid, lf.data, false);
        std::vector<unsigned char> gray(static_cast<size_t>(lf.grid.nx) * lf.grid.ny);
        for (size_t i = 0; i < gray.size(); ++i) gray[i] = rgb[3 * i];
        write_pgm(out_path, lf.grid.nx, lf.grid.ny, gray);
    } else {
        write_png(out_path, lf.grid.nx, lf.grid.ny, rasterize_field(lf.grid, lf.data, true));
    }
    std::printf("wrote %s (%dx%d)\n", out_path.c_str(), lf.grid.nx, lf.grid.ny);
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const ScenarioConfig cfg = parse_config_file(config_path);
    validate_config(cfg);
    // Exercise the grid-dependent checks too (bases on fluid, m0 mass).
    ScenarioEngine engine(cfg);
    std::printf("%s: ok (%dx%d grid, %d fluid cells, %d agents, %d targets)\n",
                config_path.c_str(), engine.grid.nx, engine.grid.ny, engine.grid.fluid_count(),
                static_cast<int>(engine.roster.size()), engine.cfg.targets.count);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drift-aware multi-agent search simulator"};
    app.require_subcommand(1);

    std::string config_path, field_path, out_flag;
    std::optional<uint64_t> seed;
    std::vector<double> lambdas, horizons;
    int jobs = 1;
    bool as_pgm = false, as_png = false;

    auto* run = app.add_subcommand("run", "run one scenario and write its logs");
    run->add_option("config", config_path, "scenario config file")->required();
    run->add_option("--seed", seed, "override the target seed");
    run->add_option("--out", out_flag, "output directory");

    auto* sweep = app.add_subcommand("sweep", "run a velocity-ratio sweep in both modes");
    sweep->add_option("config", config_path, "scenario config file")->required();
    sweep->add_option("--lambdas", lambdas, "velocity ratios")->required()->delimiter(',');
    sweep->add_option("--horizons", horizons, "sample times, s")->required()->delimiter(',');
    sweep->add_option("--jobs", jobs, "parallel runs");
    sweep->add_option("--seed", seed, "override the target seed");
    sweep->add_option("--out", out_flag, "output directory");

    auto* render = app.add_subcommand("render", "rasterize a saved field file");
    render->add_option("field", field_path, "field .bin file")->required();
    auto* png_flag = render->add_flag("--png", as_png, "false-color PNG (default)");
    render->add_flag("--pgm", as_pgm, "grayscale PGM")->excludes(png_flag);
    render->add_option("--out", out_flag, "output image path");

    auto* validate = app.add_subcommand("validate", "parse and check a config, run nothing");
    validate->add_option("config", config_path, "scenario config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(run)) return cmd_run(config_path, seed, out_flag);
        if (app.got_subcommand(sweep))
            return cmd_sweep(config_path, lambdas, horizons, jobs, seed, out_flag);
        if (app.got_subcommand(render)) return cmd_render(field_path, as_pgm, out_flag);
        if (app.got_subcommand(validate)) return cmd_validate(config_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s (residual %.3g after %d iterations)\n", e.what(),
                     e.residual, e.iterations);
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
