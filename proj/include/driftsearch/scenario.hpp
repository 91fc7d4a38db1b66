#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "driftsearch/agents.hpp"
#include "driftsearch/config.hpp"
#include "driftsearch/errors.hpp"
#include "driftsearch/field_io.hpp"
#include "driftsearch/flowgen.hpp"
#include "driftsearch/grid.hpp"
#include "driftsearch/metrics.hpp"
#include "driftsearch/potential.hpp"
#include "driftsearch/rng.hpp"
#include "driftsearch/sensing.hpp"
#include "driftsearch/targets.hpp"
#include "driftsearch/transport.hpp"

namespace driftsearch {

/// Motion-safety bookkeeping accumulated over a run.
struct RunAudit {
    double max_turn_ratio = 0.0;  // max observed |omega| / omega_max
    double min_pair_separation = std::numeric_limits<double>::infinity();
    int separation_checks = 0;     // steps contributing to the minimum
    int infeasible_agent_steps = 0;
    int fluid_violations = 0;      // sampled or actual positions off the fluid
};

struct RunResult {
    std::vector<StepRecord> records;
    RunAudit audit;
    int steps = 0;
    int n_targets = 0;
    int n_detected = 0;
    int n_escaped = 0;
    double final_eta = 0.0;
    double final_kappa = 0.0;
    double final_eta_true = 0.0;
    std::optional<double> lambda;
    double wall_seconds = 0.0;
};

namespace detail {

inline uint64_t kNoiseSalt = 0x6e;

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string json_num(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

/// One fully built scenario: grid, flow, initial field, roster, and the
/// control loop. Holds self-referential field pointers, so it stays pinned
/// where it is constructed.
struct ScenarioEngine {
    ScenarioConfig cfg;
    uint64_t seed;
    Grid2D grid;
    FlowSeries flow;
    double outflow_speed = 0.0;
    ScalarField m0;
    std::optional<double> lambda;
    std::vector<AgentState> roster;  // base poses, inactive

    ScenarioEngine(const ScenarioEngine&) = delete;
    ScenarioEngine& operator=(const ScenarioEngine&) = delete;

    explicit ScenarioEngine(const ScenarioConfig& config,
                            std::optional<uint64_t> seed_override = std::nullopt)
        : cfg(config), seed(seed_override.value_or(config.targets.seed)) {
        validate_config(cfg);
        grid = build_grid(cfg.domain.origin, cfg.domain.size, cfg.domain.h, cfg.domain.obstacles,
                          cfg.domain.edges);
        grid.check();
        if (grid.fluid_count() == 0) throw ConfigError("domain has no fluid cells");

        build_flow();
        outflow_speed = detail::flow_outflow_speed(flow);
        const double mean = flow.mean_speed();
        if (mean > 0.0 && cfg.agents.count > 0) lambda = cfg.agents.v / mean;

        build_m0();

        const AgentSpec& a = cfg.agents;
        for (int i = 0; i < a.count; ++i) {
            if (!grid.is_fluid_at(a.bases[i]))
                throw ConfigError("agent base " + std::to_string(i) + " is not on fluid");
            AgentState st;
            st.z = a.bases[i];
            st.theta = wrap_angle(a.base_headings[i]);
            st.v = a.v;
            st.omega_max = a.v / a.r_min;
            st.clearance = a.clearance;
            st.footprint = a.footprint;
            st.active = false;
            roster.push_back(st);
        }
    }

    RunResult run(bool write_outputs = false);

private:
    void build_flow() {
        flow.grid = &grid;
        switch (cfg.flow.kind) {
            case FlowKind::NONE: {
                FlowSnapshot s;
                s.t = 0.0;
                s.wx.assign(grid.cell_count(), 0.0);
                s.wy.assign(grid.cell_count(), 0.0);
                flow.snaps.push_back(std::move(s));
                break;
            }
            case FlowKind::CAVITY:
                flow = cavity_like_flow(grid, cfg.flow.mean_speed);
                break;
            case FlowKind::CHANNEL:
                flow = channel_flow(grid, cfg.flow.mean_speed, cfg.flow.period,
                                    cfg.total_duration(), cfg.flow.snapshots);
                break;
            case FlowKind::FILE:
                flow = read_flow(cfg.flow.file, grid);
                break;
        }
        if (cfg.flow.scale != 1.0) flow = scale_flow(flow, cfg.flow.scale);
    }

    void build_m0() {
        m0 = ScalarField(grid, 0.0);
        std::vector<double> comp(grid.cell_count());
        auto add_component = [&](double weight) {
            double mass = 0.0;
            for (size_t i = 0; i < comp.size(); ++i) {
                if (grid.mask[i] == Cell::FLUID) mass += comp[i];
            }
            mass *= grid.h * grid.h;
            if (!(mass > 0.0)) throw ConfigError("m0 component has no mass on the fluid grid");
            const double s = weight / mass;
            for (size_t i = 0; i < comp.size(); ++i) {
                if (grid.mask[i] == Cell::FLUID) m0.data[i] += s * comp[i];
            }
        };
        for (const M0Gaussian& gsn : cfg.m0_gaussians) {
            const double inv2s2 = 1.0 / (2.0 * gsn.sigma * gsn.sigma);
            for (int iy = 0; iy < grid.ny; ++iy) {
                for (int ix = 0; ix < grid.nx; ++ix) {
                    const Vec2 c = grid.center(ix, iy);
                    comp[grid.index(ix, iy)] = std::exp(-norm_sq(c - gsn.center) * inv2s2);
                }
            }
            add_component(gsn.weight);
        }
        for (const M0Uniform& uni : cfg.m0_uniforms) {
            for (int iy = 0; iy < grid.ny; ++iy) {
                for (int ix = 0; ix < grid.nx; ++ix) {
                    comp[grid.index(ix, iy)] = uni.region.contains(grid.center(ix, iy)) ? 1.0 : 0.0;
                }
            }
            add_component(uni.weight);
        }
        normalize(m0);
    }
};

namespace detail {

/// Re-simulates committed arcs over the avoidance horizon and folds the
/// observed separations and fluid violations into the audit. Separation is
/// only meaningful when every active agent had a feasible arc this step.
inline void audit_avoidance(const std::vector<AgentState>& agents,
                            const std::vector<AvoidDecision>& decisions, const Grid2D& grid,
                            double dt, RunAudit& audit) {
    double horizon = 3.0 * dt;
    bool all_feasible = true;
    std::vector<size_t> active;
    for (size_t i = 0; i < agents.size(); ++i) {
        if (!agents[i].active) continue;
        active.push_back(i);
        if (agents[i].v > 0.0) horizon = std::max(horizon, 2.0 * agents[i].clearance / agents[i].v);
        if (agents[i].omega_max > 0.0)
            horizon = std::max(horizon, 0.5 * kPi / agents[i].omega_max);
        if (!decisions[i].feasible) {
            all_feasible = false;
            ++audit.infeasible_agent_steps;
        }
        if (agents[i].omega_max > 0.0) {
            audit.max_turn_ratio =
                std::max(audit.max_turn_ratio, std::abs(decisions[i].omega) / agents[i].omega_max);
        }
    }
    if (active.empty()) return;

    std::vector<std::vector<Vec2>> paths(active.size());
    for (size_t k = 0; k < active.size(); ++k) {
        arc_samples(agents[active[k]], decisions[active[k]].omega, horizon, kAvoidSamples, paths[k]);
    }
    if (all_feasible) {
        for (int s = 0; s < kAvoidSamples; ++s) {
            for (size_t a = 0; a < paths.size(); ++a) {
                if (!grid.is_fluid_at(paths[a][s])) ++audit.fluid_violations;
                for (size_t b = a + 1; b < paths.size(); ++b) {
                    audit.min_pair_separation =
                        std::min(audit.min_pair_separation, distance(paths[a][s], paths[b][s]));
                }
            }
        }
        ++audit.separation_checks;
    }
}

struct OutputFiles {
    std::filesystem::path dir;
    std::ofstream agents;
    std::ofstream targets;
    bool fields = false;
};

}  // namespace detail

inline RunResult ScenarioEngine::run(bool write_outputs) {
    const auto wall0 = std::chrono::steady_clock::now();
    const double dt = cfg.agents.dt;
    const int n_steps = static_cast<int>(std::llround(cfg.total_duration() / dt));
    if (n_steps < 1) throw ConfigError("scenario shorter than one control step");

    TransportConfig tcfg;
    tcfg.diffusion = cfg.diffusion();
    tcfg.substep_floor = cfg.transport.substep_floor;
    PotentialConfig pcfg;
    pcfg.alpha = cfg.agents.alpha;
    pcfg.tolerance = cfg.agents.tolerance;
    pcfg.max_iterations = cfg.agents.max_iterations;
    const bool still_flow = flow.mean_speed() == 0.0;
    const bool transports = !(still_flow && tcfg.diffusion == 0.0);
    const bool is_static = cfg.mode == RunMode::STATIC;

    ScalarField m = m0;
    ScalarField m_true = m0;  // fully evolving copy; aliases m conceptually in dynamic mode
    ScalarField u(grid, 0.0);
    std::vector<AgentState> agents = roster;
    TargetSet targets = spawn_targets(m0, cfg.targets.count, seed);
    DriftNoise noise{cfg.targets.sigma_noise, substream_seed(seed, 0, detail::kNoiseSalt)};

    const auto phases = cfg.phases();
    auto phase_at = [&](double t) {
        for (size_t i = 0; i < phases.size(); ++i) {
            if (t >= phases[i].start && t < phases[i].start + phases[i].duration)
                return static_cast<int>(i);
        }
        return -1;
    };

    detail::OutputFiles out;
    if (write_outputs) {
        if (cfg.output.directory.empty()) throw ConfigError("no output directory configured");
        out.dir = cfg.output.directory;
        std::filesystem::create_directories(out.dir);
        out.fields = cfg.output.snapshot_every > 0;
        if (out.fields) std::filesystem::create_directories(out.dir / "fields");
        if (cfg.output.record_agents) {
            out.agents.open(out.dir / "agents.csv", std::ios::binary);
            out.agents << "t,agent_id,x,y,theta,omega,active\n";
        }
        out.targets.open(out.dir / "targets.csv", std::ios::binary);
        out.targets << "t,target_id,x,y,status\n";
        write_mask((out.dir / "mask.bin").string(), grid);
    }
    auto log_targets = [&](double t) {
        static const char* names[] = {"alive", "detected", "escaped"};
        for (size_t i = 0; i < targets.particles.size(); ++i) {
            const TargetParticle& p = targets.particles[i];
            out.targets << detail::csv_num(t) << ',' << i << ',' << detail::csv_num(p.y.x) << ','
                        << detail::csv_num(p.y.y) << ',' << names[static_cast<int>(p.status)]
                        << '\n';
        }
    };

    RunResult res;
    res.records.reserve(n_steps);
    res.n_targets = cfg.targets.count;
    res.lambda = lambda;
    int last_phase = -1;

    auto run_step = [&](int k) {
        const double t = k * dt;
        StepRecord rec;
        rec.t = (k + 1) * dt;

        const int phase = phase_at(t);
        const bool active = phase >= 0 && !agents.empty();
        if (active && phase != last_phase) {
            // New phase: back from base swap, reset to base poses.
            for (size_t i = 0; i < agents.size(); ++i) {
                agents[i].z = roster[i].z;
                agents[i].theta = roster[i].theta;
            }
            last_phase = phase;
        }
        for (AgentState& a : agents) a.active = active;

        std::vector<AgentState> sensing_poses;
        std::vector<AvoidDecision> decisions(agents.size());
        if (active) {
            auto t0 = std::chrono::steady_clock::now();
            const ScalarField gamma = accumulate_coverage(agents, grid);
            apply_sensing(m, gamma, dt);
            if (is_static) apply_sensing(m_true, gamma, dt);
            rec.transport_ms += detail::ms_since(t0);

            t0 = std::chrono::steady_clock::now();
            solve_potential(m, pcfg, u);
            rec.potential_ms = detail::ms_since(t0);

            sensing_poses = agents;

            t0 = std::chrono::steady_clock::now();
            const Rect dom = grid.domain();
            const Vec2 dom_center{0.5 * (dom.lo.x + dom.hi.x), 0.5 * (dom.lo.y + dom.hi.y)};
            std::vector<double> proposals(agents.size(), 0.0);
            for (size_t i = 0; i < agents.size(); ++i) {
                if (!dom.contains(agents[i].z)) {
                    // Squeezed over a rim despite avoidance: steer back toward
                    // the middle of the domain until re-entry.
                    const Vec2 back = dom_center - agents[i].z;
                    const double len = norm(back);
                    proposals[i] = desired_turn_rate(
                        agents[i], Vec2{back.x / len, back.y / len}, dt);
                    continue;
                }
                proposals[i] = desired_turn_rate(agents[i], unit_gradient(u, agents[i].z), dt);
            }
            decisions = avoid(agents, proposals, grid, dt);
            rec.avoidance_ms = detail::ms_since(t0);

            detail::audit_avoidance(agents, decisions, grid, dt, res.audit);
            for (size_t i = 0; i < agents.size(); ++i) {
                agents[i] = step_agent(agents[i], decisions[i].omega, dt);
                if (!grid.is_fluid_at(agents[i].z)) ++res.audit.fluid_violations;
            }
        }

        if (transports) {
            const auto t0 = std::chrono::steady_clock::now();
            step_transport(is_static ? m_true : m, flow, tcfg, t, dt, outflow_speed);
            rec.transport_ms += detail::ms_since(t0);
        }

        advect_targets(targets, flow, t, dt, noise);
        if (active) detection_trials(targets, sensing_poses, dt, t);

        rec.eta = eta(m);
        const ScalarField& truth = is_static ? m_true : m;
        rec.eta_true = eta(truth);
        rec.mass_in_domain = total_mass(truth);
        rec.kappa = kappa(targets);
        rec.n_detected = targets.count(TargetStatus::DETECTED);
        rec.n_escaped = targets.count(TargetStatus::ESCAPED);
        res.records.push_back(rec);

        if (write_outputs) {
            if (out.agents.is_open()) {
                for (size_t i = 0; i < agents.size(); ++i) {
                    out.agents << detail::csv_num(rec.t) << ',' << i << ','
                               << detail::csv_num(agents[i].z.x) << ','
                               << detail::csv_num(agents[i].z.y) << ','
                               << detail::csv_num(agents[i].theta) << ','
                               << detail::csv_num(active ? decisions[i].omega : 0.0) << ','
                               << (active ? 1 : 0) << '\n';
                }
            }
            if ((k + 1) % cfg.targets.log_every == 0 || k + 1 == n_steps) log_targets(rec.t);
            if (out.fields && (k + 1) % cfg.output.snapshot_every == 0) {
                write_field((out.dir / "fields" / ("m_" + std::to_string(k + 1) + ".bin")).string(), m);
            }
        }
    };

    int done_steps = 0;
    try {
        for (int k = 0; k < n_steps; ++k) {
            run_step(k);
            done_steps = k + 1;
        }
    } catch (const std::exception& e) {
        if (write_outputs) {
            write_metrics_csv((out.dir / "metrics.csv").string(), res.records);
            write_timings_csv((out.dir / "timings.csv").string(), res.records);
        }
        throw SolverError("aborted at step " + std::to_string(done_steps) + ": " + e.what(), 0.0,
                          done_steps);
    }

    res.steps = n_steps;
    res.n_detected = targets.count(TargetStatus::DETECTED);
    res.n_escaped = targets.count(TargetStatus::ESCAPED);
    res.final_eta = res.records.empty() ? 0.0 : res.records.back().eta;
    res.final_eta_true = res.records.empty() ? 0.0 : res.records.back().eta_true;
    res.final_kappa = res.records.empty() ? 0.0 : res.records.back().kappa;
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

    if (write_outputs) {
        write_metrics_csv((out.dir / "metrics.csv").string(), res.records);
        write_timings_csv((out.dir / "timings.csv").string(), res.records);
        std::ofstream js(out.dir / "summary.json", std::ios::binary);
        js << "{\n"
           << "  \"mode\": \"" << (is_static ? "static" : "dynamic") << "\",\n"
           << "  \"seed\": " << seed << ",\n"
           << "  \"steps\": " << res.steps << ",\n"
           << "  \"dt\": " << detail::json_num(dt) << ",\n"
           << "  \"duration\": " << detail::json_num(n_steps * dt) << ",\n"
           << "  \"n_targets\": " << res.n_targets << ",\n"
           << "  \"n_detected\": " << res.n_detected << ",\n"
           << "  \"n_escaped\": " << res.n_escaped << ",\n"
           << "  \"final_eta\": " << detail::json_num(res.final_eta) << ",\n"
           << "  \"final_eta_true\": " << detail::json_num(res.final_eta_true) << ",\n"
           << "  \"final_kappa\": " << detail::json_num(res.final_kappa) << ",\n"
           << "  \"lambda\": " << (lambda ? detail::json_num(*lambda) : "null") << ",\n"
           << "  \"wall_seconds\": " << detail::json_num(res.wall_seconds) << ",\n"
           << "  \"max_turn_ratio\": " << detail::json_num(res.audit.max_turn_ratio) << ",\n"
           << "  \"min_pair_separation\": "
           << (res.audit.separation_checks ? detail::json_num(res.audit.min_pair_separation)
                                           : "null")
           << ",\n"
           << "  \"infeasible_agent_steps\": " << res.audit.infeasible_agent_steps << ",\n"
           << "  \"fluid_violations\": " << res.audit.fluid_violations << "\n"
           << "}\n";
    }
    return res;
}

/// Builds the engine in place and runs once.
inline RunResult run_scenario(const ScenarioConfig& cfg,
                              std::optional<uint64_t> seed_override = std::nullopt,
                              bool write_outputs = false) {
    ScenarioEngine engine(cfg, seed_override);
    return engine.run(write_outputs);
}

struct SweepRow {
    double lambda = 0.0;
    RunMode mode = RunMode::DYNAMIC;
    double horizon = 0.0;
    double eta = 0.0;
    double kappa = 0.0;
};

/// Runs the scenario across flow scalings chosen so the velocity ratio hits
/// each requested lambda, in both modes, and samples eta and kappa at each
/// horizon. Rows come back sorted by (lambda, mode, horizon).
inline std::vector<SweepRow> sweep_lambda(const ScenarioConfig& base,
                                          const std::vector<double>& lambdas,
                                          const std::vector<double>& horizons, int jobs = 1,
                                          std::optional<uint64_t> seed_override = std::nullopt) {
    if (lambdas.empty() || horizons.empty()) throw ConfigError("sweep needs lambdas and horizons");
    for (double l : lambdas) {
        if (!(l > 0.0)) throw ConfigError("sweep lambda values must be positive");
    }
    double max_h = 0.0;
    for (double h : horizons) {
        if (!(h > 0.0)) throw ConfigError("sweep horizons must be positive");
        max_h = std::max(max_h, h);
    }

    double lambda_base;
    {
        ScenarioEngine probe(base, seed_override);
        if (!probe.lambda) throw ConfigError("sweep needs a scalable flow and at least one agent");
        lambda_base = *probe.lambda;
    }

    struct Job {
        double lambda;
        RunMode mode;
        ScenarioConfig cfg;
    };
    std::vector<Job> todo;
    for (double l : lambdas) {
        for (RunMode mode : {RunMode::DYNAMIC, RunMode::STATIC}) {
            ScenarioConfig c = base;
            double s = lambda_base / l;
            if (std::abs(s - 1.0) < 1e-12) s = 1.0;  // exact reproduction at the base ratio
            c.flow.scale *= s;
            c.mode = mode;
            c.mission.duration = max_h;
            c.output.directory.clear();
            todo.push_back({l, mode, std::move(c)});
        }
    }

    std::vector<RunResult> results(todo.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            ScenarioEngine engine(todo[i].cfg, seed_override);
            results[i] = engine.run(false);
        }
    };
    jobs = std::clamp<int>(jobs, 1, static_cast<int>(todo.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    const double dt = base.agents.dt;
    std::vector<SweepRow> rows;
    for (size_t i = 0; i < todo.size(); ++i) {
        for (double T : horizons) {
            const int idx = static_cast<int>(std::llround(T / dt)) - 1;
            if (idx < 0 || idx >= static_cast<int>(results[i].records.size()))
                throw ConfigError("sweep horizon outside the simulated range");
            const StepRecord& r = results[i].records[idx];
            rows.push_back({todo[i].lambda, todo[i].mode, T, r.eta, r.kappa});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.lambda != b.lambda) return a.lambda < b.lambda;
        if (a.mode != b.mode) return a.mode == RunMode::DYNAMIC;
        return a.horizon < b.horizon;
    });
    return rows;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "lambda,mode,horizon,eta,kappa\n";
    for (const SweepRow& r : rows) {
        f << detail::csv_num(r.lambda) << ',' << (r.mode == RunMode::DYNAMIC ? "dynamic" : "static")
          << ',' << detail::csv_num(r.horizon) << ',' << detail::csv_num(r.eta) << ','
          << detail::csv_num(r.kappa) << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace driftsearch
