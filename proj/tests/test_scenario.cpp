#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "driftsearch/driftsearch.hpp"

using namespace driftsearch;
using Catch::Approx;

namespace {

ScenarioConfig parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

const char* kSmallCavity = R"(
[domain]
size = 1.0 1.0
h = 0.02
edges = wall wall wall wall
obstacle = 0.7 0.2  0.8 0.2  0.8 0.6  0.7 0.6

[flow]
type = cavity
mean_speed = 3e-4

[m0]
gaussian = 0.6  0.3 0.7  0.08
uniform = 0.4  0.1 0.1  0.4 0.1  0.4 0.3  0.1 0.3

[agents]
count = 2
v = 0.015
r_min = 0.01
delta = 0.01
dt = 0.2
alpha = 5e-2
footprint = gaussian 0.8 0.015 0.015
base = 0.1 0.5 0.0
base = 0.1 0.6 0.0

[transport]
D = 0

[mission]
t_delay = 0
phase_count = 1
phase_duration = 30

[targets]
count = 200
seed = 9
sigma_noise = 0
log_every = 10

[run]
mode = dynamic
)";

std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::filesystem::path fresh_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() / (std::string("driftsearch_sc_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int run_cmd(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config files parse into a full scenario") {
    const ScenarioConfig cfg = parse_text(kSmallCavity);
    REQUIRE(cfg.domain.size == Vec2{1.0, 1.0});
    REQUIRE(cfg.domain.h == 0.02);
    REQUIRE(cfg.domain.edges.top == EdgePolicy::WALL);
    REQUIRE(cfg.domain.obstacles.size() == 1);
    REQUIRE(cfg.domain.obstacles[0].pts.size() == 4);
    REQUIRE(cfg.flow.kind == FlowKind::CAVITY);
    REQUIRE(cfg.flow.mean_speed == 3e-4);
    REQUIRE(cfg.m0_gaussians.size() == 1);
    REQUIRE(cfg.m0_gaussians[0].center == Vec2{0.3, 0.7});
    REQUIRE(cfg.m0_uniforms.size() == 1);
    REQUIRE(cfg.agents.count == 2);
    REQUIRE(cfg.agents.r_min == 0.01);
    REQUIRE(cfg.agents.bases.size() == 2);
    REQUIRE(std::holds_alternative<GaussianDiskFootprint>(cfg.agents.footprint));
    REQUIRE(cfg.transport.diffusion == 0.0);
    REQUIRE(cfg.mission.phase_duration == 30.0);
    REQUIRE(cfg.targets.count == 200);
    REQUIRE(cfg.targets.seed == 9);
    REQUIRE(cfg.mode == RunMode::DYNAMIC);
    REQUIRE_NOTHROW(validate_config(cfg));
    REQUIRE(cfg.total_duration() == Approx(30.0));
}

TEST_CASE("parse errors carry line numbers") {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            parse_text(text);
            FAIL("expected a parse error for: " + text);
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_error("[domain]\nsize 1 1\n", "line 2");
    expect_error("[domain]\nwhat = 3\n", "unknown [domain] key");
    expect_error("[nope]\nx = 1\n", "unknown section");
    expect_error("[domain]\nh = abc\n", "bad number");
    expect_error("[domain]\nedges = wall wall wall sticky\n", "wall or open");
    expect_error("[domain]\nobstacle = 0 0  1 0\n", "3 x y vertex pairs");
    expect_error("[agents]\nfootprint = blob 1 2 3\n", "gaussian or rect");
    expect_error("[flow]\ntype = vortex\n", "unknown flow type");
    expect_error("[run]\nmode = sideways\n", "dynamic or static");
}

TEST_CASE("validation rejects inconsistent scenarios") {
    auto mutate = [&](auto&& f) {
        ScenarioConfig cfg = parse_text(kSmallCavity);
        f(cfg);
        REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
    };
    mutate([](ScenarioConfig& c) { c.m0_gaussians[0].weight = 0.7; });  // weights sum to 1.1
    mutate([](ScenarioConfig& c) { c.m0_gaussians.clear(); c.m0_uniforms.clear(); });
    mutate([](ScenarioConfig& c) { c.agents.bases.pop_back(); });
    mutate([](ScenarioConfig& c) { c.agents.bases[1] = c.agents.bases[0]; });  // under clearance
    mutate([](ScenarioConfig& c) { c.agents.tolerance = 1e-3; });
    mutate([](ScenarioConfig& c) { c.transport.drift_error = {330.0, 10800.0}; });  // D twice
    mutate([](ScenarioConfig& c) { c.targets.count = 0; });
    mutate([](ScenarioConfig& c) { c.targets.log_every = 0; });
    mutate([](ScenarioConfig& c) { std::get<GaussianDiskFootprint>(c.agents.footprint).mu = 1.0; });
    mutate([](ScenarioConfig& c) {
        c.mission.explicit_phases = {{0.0, 10.0}, {5.0, 10.0}};  // overlap
    });
    mutate([](ScenarioConfig& c) {
        c.mission.t_delay = 100.0;
        c.mission.explicit_phases = {{50.0, 10.0}};  // starts before the delay
    });
}

TEST_CASE("the regular phase schedule spaces search windows") {
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.t_delay = 10800.0;
    cfg.mission.phase_duration = 1500.0;
    cfg.mission.phase_count = 6;
    cfg.mission.phase_gap = 300.0;
    const auto ph = cfg.phases();
    REQUIRE(ph.size() == 6);
    REQUIRE(ph.front().start == Approx(10800.0));
    REQUIRE(ph[1].start == Approx(12600.0));
    REQUIRE(ph.back().start == Approx(19800.0));
    REQUIRE(cfg.total_duration() == Approx(21300.0));

    cfg.mission.explicit_phases = {{11000.0, 500.0}, {12000.0, 500.0}};
    REQUIRE(cfg.phases().size() == 2);
    REQUIRE(cfg.total_duration() == Approx(12500.0));

    cfg.mission.duration = 15000.0;
    REQUIRE(cfg.total_duration() == Approx(15000.0));
}

TEST_CASE("diffusion comes from D or the drift displacement") {
    ScenarioConfig cfg = parse_text(kSmallCavity);
    REQUIRE(cfg.diffusion() == 0.0);
    cfg.transport.diffusion.reset();
    REQUIRE(cfg.diffusion() == 0.0);
    cfg.transport.drift_error = {330.0, 10800.0};
    REQUIRE(cfg.diffusion() == Approx(5.0416666666666667));
    cfg.transport.drift_error.reset();
    cfg.transport.diffusion = 2.5;
    REQUIRE(cfg.diffusion() == 2.5);
}

TEST_CASE("the engine assembles grid, flow, field, and roster") {
    const ScenarioConfig cfg = parse_text(kSmallCavity);
    ScenarioEngine engine(cfg);
    REQUIRE(engine.grid.nx == 50);
    REQUIRE(engine.grid.ny == 50);
    REQUIRE(engine.grid.fluid_count() < 2500);
    REQUIRE(total_mass(engine.m0) == Approx(1.0).margin(1e-12));
    REQUIRE(engine.flow.mean_speed() == Approx(3e-4).margin(1e-7));
    REQUIRE(engine.lambda.has_value());
    REQUIRE(*engine.lambda == Approx(50.0).epsilon(1e-9));
    REQUIRE(engine.roster.size() == 2);
    REQUIRE(engine.roster[0].omega_max == Approx(1.5));
    REQUIRE_FALSE(engine.roster[0].active);

    ScenarioConfig bad = cfg;
    bad.agents.bases[0] = {0.75, 0.4};  // inside the obstacle
    REQUIRE_THROWS_AS(ScenarioEngine(bad), ConfigError);

    ScenarioConfig tiny = cfg;
    tiny.mission.duration = 0.05;  // shorter than one control step
    REQUIRE_THROWS_AS(ScenarioEngine(tiny).run(), ConfigError);
}

TEST_CASE("a short run produces monotone coverage records") {
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.phase_duration = 10.0;
    ScenarioEngine engine(cfg);
    const RunResult res = engine.run();
    REQUIRE(res.steps == 50);
    REQUIRE(res.records.size() == 50);
    REQUIRE(res.records.front().t == Approx(0.2));
    REQUIRE(res.records.back().t == Approx(10.0));

    double prev_eta = -1.0, prev_kappa = -1.0;
    for (const StepRecord& r : res.records) {
        REQUIRE(r.eta >= prev_eta - 1e-12);      // closed domain: sensing only removes
        REQUIRE(r.kappa >= prev_kappa - 1e-15);  // detections never undo
        REQUIRE(r.mass_in_domain == Approx(1.0 - r.eta_true).margin(1e-9));
        prev_eta = r.eta;
        prev_kappa = r.kappa;
    }
    REQUIRE(res.final_eta > 0.0);  // the agents sensed something
    REQUIRE(res.audit.max_turn_ratio <= 1.0 + 1e-12);
    REQUIRE(res.n_targets == 200);
}

TEST_CASE("with no agents the field only moves, never shrinks") {
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.agents.count = 0;
    cfg.agents.bases.clear();
    cfg.agents.base_headings.clear();
    cfg.mission.phase_duration = 10.0;
    REQUIRE_NOTHROW(validate_config(cfg));
    const RunResult res = run_scenario(cfg);
    REQUIRE(res.steps == 50);
    for (const StepRecord& r : res.records) {
        REQUIRE(std::abs(r.eta) < 1e-9);
        REQUIRE(r.kappa == 0.0);
    }
    REQUIRE(res.n_detected == 0);
}

TEST_CASE("run outputs land in the requested directory") {
    const auto dir = fresh_dir("out");
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.phase_duration = 4.0;
    cfg.output.directory = dir.string();
    cfg.output.snapshot_every = 10;
    const RunResult res = run_scenario(cfg, std::nullopt, true);
    REQUIRE(res.steps == 20);

    REQUIRE(std::filesystem::exists(dir / "metrics.csv"));
    REQUIRE(std::filesystem::exists(dir / "timings.csv"));
    REQUIRE(std::filesystem::exists(dir / "summary.json"));
    REQUIRE(std::filesystem::exists(dir / "agents.csv"));
    REQUIRE(std::filesystem::exists(dir / "targets.csv"));
    REQUIRE(std::filesystem::exists(dir / "mask.bin"));
    REQUIRE(std::filesystem::exists(dir / "fields" / "m_10.bin"));
    REQUIRE(std::filesystem::exists(dir / "fields" / "m_20.bin"));

    const auto metrics = read_csv(dir / "metrics.csv");
    REQUIRE(metrics.size() == 21);  // header + one row per step
    REQUIRE(metrics[0][0] == "t");
    REQUIRE(metrics[0][6] == "eta_true");
    const auto agents_rows = read_csv(dir / "agents.csv");
    REQUIRE(agents_rows.size() == 1 + 20 * 2);

    // The field snapshot is a loadable probability field.
    const LoadedField lf = read_field((dir / "fields" / "m_20.bin").string());
    REQUIRE(lf.grid.nx == 50);

    // The summary mentions the headline numbers.
    const std::string js = slurp(dir / "summary.json");
    REQUIRE(js.find("\"mode\": \"dynamic\"") != std::string::npos);
    REQUIRE(js.find("\"final_eta\"") != std::string::npos);
    REQUIRE(js.find("\"min_pair_separation\"") != std::string::npos);

    ScenarioConfig nodir = cfg;
    nodir.output.directory.clear();
    REQUIRE_THROWS_AS(run_scenario(nodir, std::nullopt, true), ConfigError);
}

TEST_CASE("identical runs write identical metrics") {
    const auto dir_a = fresh_dir("det_a");
    const auto dir_b = fresh_dir("det_b");
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.phase_duration = 4.0;
    cfg.targets.sigma_noise = 0.002;

    cfg.output.directory = dir_a.string();
    run_scenario(cfg, std::nullopt, true);
    cfg.output.directory = dir_b.string();
    run_scenario(cfg, std::nullopt, true);

    REQUIRE(slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv"));
    REQUIRE(slurp(dir_a / "targets.csv") == slurp(dir_b / "targets.csv"));
    REQUIRE(slurp(dir_a / "agents.csv") == slurp(dir_b / "agents.csv"));

    // A different seed gives a different detection history.
    const auto dir_c = fresh_dir("det_c");
    cfg.output.directory = dir_c.string();
    run_scenario(cfg, 12345, true);
    REQUIRE(slurp(dir_a / "metrics.csv") != slurp(dir_c / "metrics.csv"));
}

TEST_CASE("static mode never changes the target trajectories") {
    const auto dir_dyn = fresh_dir("mode_dyn");
    const auto dir_sta = fresh_dir("mode_sta");
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.phase_duration = 6.0;
    cfg.targets.sigma_noise = 0.002;
    cfg.targets.log_every = 5;
    cfg.flow.mean_speed = 0.002;  // faster drift so the modes visibly diverge

    cfg.output.directory = dir_dyn.string();
    cfg.mode = RunMode::DYNAMIC;
    const RunResult dyn = run_scenario(cfg, std::nullopt, true);
    cfg.output.directory = dir_sta.string();
    cfg.mode = RunMode::STATIC;
    const RunResult sta = run_scenario(cfg, std::nullopt, true);
    REQUIRE(dyn.steps == sta.steps);

    const auto rows_d = read_csv(dir_dyn / "targets.csv");
    const auto rows_s = read_csv(dir_sta / "targets.csv");
    REQUIRE(rows_d.size() == rows_s.size());
    for (size_t i = 1; i < rows_d.size(); ++i) {
        REQUIRE(rows_d[i][0] == rows_s[i][0]);  // t
        REQUIRE(rows_d[i][1] == rows_s[i][1]);  // id
        REQUIRE(rows_d[i][2] == rows_s[i][2]);  // x, bit for bit
        REQUIRE(rows_d[i][3] == rows_s[i][3]);  // y
    }
}

TEST_CASE("agents rest between phases and restart from base") {
    const auto dir = fresh_dir("phases");
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.agents.dt = 1.0;
    cfg.agents.v = 0.015;
    cfg.mission.phase_count = 1;
    cfg.mission.phase_duration = 0.0;
    cfg.mission.explicit_phases = {{0.0, 4.0}, {8.0, 4.0}};
    cfg.output.directory = dir.string();
    const RunResult res = run_scenario(cfg, std::nullopt, true);
    REQUIRE(res.steps == 12);

    const auto rows = read_csv(dir / "agents.csv");
    REQUIRE(rows.size() == 1 + 12 * 2);
    int active_rows = 0;
    Vec2 end_phase1{0.0, 0.0}, start_phase2{0.0, 0.0};
    for (size_t i = 1; i < rows.size(); ++i) {
        const double t = std::stod(rows[i][0]);
        const int id = std::stoi(rows[i][1]);
        const int act = std::stoi(rows[i][6]);
        active_rows += act;
        const bool should = (t <= 4.0) || (t > 8.0);
        REQUIRE(act == (should ? 1 : 0));
        if (id == 0 && t == 4.0) end_phase1 = {std::stod(rows[i][2]), std::stod(rows[i][3])};
        if (id == 0 && t == 9.0) start_phase2 = {std::stod(rows[i][2]), std::stod(rows[i][3])};
    }
    REQUIRE(active_rows == 8 * 2);
    // Four steps out from base by the end of window one; back within one step
    // of base at the start of window two.
    const Vec2 base = cfg.agents.bases[0];
    REQUIRE(distance(end_phase1, base) > 2.0 * cfg.agents.v);
    REQUIRE(distance(start_phase2, base) <= cfg.agents.v + 1e-9);
}

TEST_CASE("failures mid-run still flush the metrics log") {
    const auto dir = fresh_dir("abort");
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.phase_duration = 4.0;
    cfg.agents.tolerance = 1e-12;
    cfg.agents.max_iterations = 1;  // the first potential solve cannot converge
    cfg.output.directory = dir.string();
    try {
        run_scenario(cfg, std::nullopt, true);
        FAIL("expected the solve to give up");
    } catch (const SolverError& e) {
        REQUIRE(std::string(e.what()).find("aborted at step 0") != std::string::npos);
    }
    REQUIRE(std::filesystem::exists(dir / "metrics.csv"));
}

TEST_CASE("the lambda sweep scales flows and samples horizons") {
    ScenarioConfig cfg = parse_text(kSmallCavity);
    cfg.mission.phase_duration = 4.0;
    const std::vector<double> lambdas{25.0, 50.0};
    const std::vector<double> horizons{2.0, 4.0};
    const auto rows = sweep_lambda(cfg, lambdas, horizons, 2);
    REQUIRE(rows.size() == 8);
    for (size_t i = 0; i < rows.size(); ++i) {
        const size_t lam = i / 4, mode = (i / 2) % 2;
        REQUIRE(rows[i].lambda == lambdas[lam]);
        REQUIRE(rows[i].mode == (mode == 0 ? RunMode::DYNAMIC : RunMode::STATIC));
        REQUIRE(rows[i].horizon == horizons[i % 2]);
    }

    // The base-ratio dynamic rows reproduce a direct run bit for bit.
    ScenarioConfig direct = cfg;
    direct.mission.duration = 4.0;
    const RunResult res = run_scenario(direct);
    REQUIRE(rows[4].eta == res.records[9].eta);
    REQUIRE(rows[5].eta == res.records[19].eta);
    REQUIRE(rows[5].kappa == res.records[19].kappa);

    REQUIRE_THROWS_AS(sweep_lambda(cfg, {}, horizons), ConfigError);
    REQUIRE_THROWS_AS(sweep_lambda(cfg, {-1.0}, horizons), ConfigError);
    REQUIRE_THROWS_AS(sweep_lambda(cfg, lambdas, {0.0}), ConfigError);

    const auto dir = fresh_dir("sweep");
    write_sweep_csv((dir / "sweep.csv").string(), rows);
    const auto csv = read_csv(dir / "sweep.csv");
    REQUIRE(csv.size() == 9);
    REQUIRE(csv[0][0] == "lambda");
    REQUIRE(csv[1][1] == "dynamic");
}

TEST_CASE("the command line drives runs end to end") {
    const char* cli = std::getenv("DRIFTSEARCH_CLI");
    if (!cli) {
        WARN("DRIFTSEARCH_CLI not set; skipping CLI checks");
        return;
    }
    const std::string exe(cli);
    const auto dir = fresh_dir("cli");
    const auto cfg_path = dir / "tiny.cfg";
    {
        std::ofstream f(cfg_path);
        f << kSmallCavity;
        f << "\n[mission]\nphase_duration = 2\n[run]\nsnapshot_every = 5\n";
    }

    REQUIRE(run_cmd(exe + " validate " + cfg_path.string()) == 0);
    REQUIRE(run_cmd(exe + " run " + cfg_path.string() + " --out " + (dir / "r1").string()) == 0);
    REQUIRE(std::filesystem::exists(dir / "r1" / "metrics.csv"));
    REQUIRE(std::filesystem::exists(dir / "r1" / "summary.json"));

    const auto field = dir / "r1" / "fields" / "m_10.bin";
    REQUIRE(std::filesystem::exists(field));
    REQUIRE(run_cmd(exe + " render " + field.string()) == 0);
    REQUIRE(run_cmd(exe + " render " + field.string() + " --pgm") == 0);
    REQUIRE(std::filesystem::exists(dir / "r1" / "fields" / "m_10.png"));
    REQUIRE(std::filesystem::exists(dir / "r1" / "fields" / "m_10.pgm"));

    REQUIRE(run_cmd(exe + " run /nonexistent.cfg") == 1);
    REQUIRE(run_cmd(exe + " --bogus-flag") == 1);
    REQUIRE(run_cmd(exe + " validate " + cfg_path.string() + " --seed") == 1);

    const char* cfg_dir = std::getenv("DRIFTSEARCH_CONFIG_DIR");
    if (cfg_dir) {
        REQUIRE(run_cmd(exe + " validate " + std::string(cfg_dir) + "/cavity.cfg") == 0);
        REQUIRE(run_cmd(exe + " validate " + std::string(cfg_dir) + "/channel.cfg") == 0);
    }
}
