#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "driftsearch/errors.hpp"
#include "driftsearch/geometry.hpp"
#include "driftsearch/grid.hpp"
#include "driftsearch/sensing.hpp"

namespace driftsearch {

enum class FlowKind { NONE, CAVITY, CHANNEL, FILE };
enum class RunMode { DYNAMIC, STATIC };

struct DomainSpec {
    Vec2 origin{0.0, 0.0};
    Vec2 size{1.0, 1.0};
    double h = 0.01;
    EdgePolicies edges;
    std::vector<Polygon> obstacles;
};

struct FlowSpec {
    FlowKind kind = FlowKind::NONE;
    double mean_speed = 0.0;
    double period = 0.0;      // channel
    int snapshots = 2;        // channel
    std::string file;         // file kind
    double scale = 1.0;
};

struct M0Gaussian {
    double weight = 1.0;
    Vec2 center{0.0, 0.0};
    double sigma = 1.0;
};

struct M0Uniform {
    double weight = 1.0;
    Polygon region;
};

struct AgentSpec {
    int count = 1;
    double v = 1.0;
    double r_min = 1.0;
    double clearance = 0.0;
    double dt = 1.0;
    double alpha = 1.0;
    double tolerance = 1e-6;
    int max_iterations = 50000;
    Footprint footprint;
    std::vector<Vec2> bases;
    std::vector<double> base_headings;
};

struct TransportSpec {
    std::optional<double> diffusion;              // D directly
    std::optional<std::pair<double, double>> drift_error;  // (e, t) implying D
    int substep_floor = 10;
};

struct Phase {
    double start = 0.0;
    double duration = 0.0;
};

struct MissionSpec {
    double t_delay = 0.0;
    double phase_duration = 0.0;
    int phase_count = 1;
    double phase_gap = 0.0;
    std::vector<Phase> explicit_phases;  // overrides the regular schedule
    std::optional<double> duration;      // total simulated time
};

struct TargetSpec {
    int count = 1000;
    uint64_t seed = 1;
    double sigma_noise = 0.0;
    int log_every = 50;
};

struct OutputSpec {
    std::string directory;
    int snapshot_every = 0;  // field dumps every N steps; 0 disables
    bool record_agents = true;
};

struct ScenarioConfig {
    DomainSpec domain;
    FlowSpec flow;
    std::vector<M0Gaussian> m0_gaussians;
    std::vector<M0Uniform> m0_uniforms;
    AgentSpec agents;
    TransportSpec transport;
    MissionSpec mission;
    TargetSpec targets;
    RunMode mode = RunMode::DYNAMIC;
    OutputSpec output;

    /// Mission phases in absolute time, regular schedule unless overridden.
    std::vector<Phase> phases() const {
        if (!mission.explicit_phases.empty()) return mission.explicit_phases;
        std::vector<Phase> out;
        double start = mission.t_delay;
        for (int k = 0; k < mission.phase_count; ++k) {
            out.push_back({start, mission.phase_duration});
            start += mission.phase_duration + mission.phase_gap;
        }
        return out;
    }

    double total_duration() const {
        if (mission.duration) return *mission.duration;
        const auto ph = phases();
        if (ph.empty()) return mission.t_delay;
        return ph.back().start + ph.back().duration;
    }

    double diffusion() const {
        if (transport.diffusion) return *transport.diffusion;
        if (transport.drift_error) {
            const auto [e, t] = *transport.drift_error;
            if (!(t > 0.0)) throw ConfigError("drift error time must be positive");
            return e * e / (2.0 * t);
        }
        return 0.0;
    }
};

namespace detail {

struct ConfigLine {
    std::string section;
    std::string key;
    std::vector<std::string> values;
    int number = 0;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<ConfigLine> tokenize_config(std::istream& in) {
    std::vector<ConfigLine> lines;
    std::string section;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(number) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        ConfigLine cl;
        cl.section = section;
        cl.key = trim(line.substr(0, eq));
        cl.number = number;
        std::istringstream vs(line.substr(eq + 1));
        std::string tok;
        while (vs >> tok) cl.values.push_back(tok);
        if (cl.key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
        lines.push_back(std::move(cl));
    }
    return lines;
}

inline double to_double(const ConfigLine& cl, size_t idx) {
    try {
        size_t pos = 0;
        const double v = std::stod(cl.values.at(idx), &pos);
        if (pos != cl.values[idx].size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(cl.number) + ": bad number '" +
                          (idx < cl.values.size() ? cl.values[idx] : "<missing>") + "' for key " + cl.key);
    }
}

inline int to_int(const ConfigLine& cl, size_t idx) {
    const double v = to_double(cl, idx);
    const int i = static_cast<int>(std::llround(v));
    if (std::abs(v - i) > 1e-9)
        throw ConfigError("line " + std::to_string(cl.number) + ": key " + cl.key + " wants an integer");
    return i;
}

inline uint64_t to_u64(const ConfigLine& cl, size_t idx) {
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(cl.values.at(idx), &pos);
        if (pos != cl.values[idx].size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(cl.number) + ": bad seed for key " + cl.key);
    }
}

inline void want_values(const ConfigLine& cl, size_t n) {
    if (cl.values.size() != n)
        throw ConfigError("line " + std::to_string(cl.number) + ": key " + cl.key + " wants " +
                          std::to_string(n) + " value(s)");
}

inline EdgePolicy to_edge(const ConfigLine& cl, size_t idx) {
    const std::string& s = cl.values.at(idx);
    if (s == "wall") return EdgePolicy::WALL;
    if (s == "open") return EdgePolicy::OPEN;
    throw ConfigError("line " + std::to_string(cl.number) + ": edge policy must be wall or open");
}

inline Polygon to_polygon(const ConfigLine& cl, size_t first) {
    const size_t n = cl.values.size() - first;
    if (n < 6 || n % 2 != 0)
        throw ConfigError("line " + std::to_string(cl.number) + ": key " + cl.key +
                          " wants at least 3 x y vertex pairs");
    Polygon poly;
    for (size_t k = first; k < cl.values.size(); k += 2) {
        poly.pts.push_back({to_double(cl, k), to_double(cl, k + 1)});
    }
    return poly;
}

}  // namespace detail

inline ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig cfg;
    bool saw_footprint = false;
    for (const auto& cl : detail::tokenize_config(in)) {
        const std::string where = "line " + std::to_string(cl.number) + ": ";
        if (cl.section == "domain") {
            if (cl.key == "size") { detail::want_values(cl, 2); cfg.domain.size = {detail::to_double(cl, 0), detail::to_double(cl, 1)}; }
            else if (cl.key == "origin") { detail::want_values(cl, 2); cfg.domain.origin = {detail::to_double(cl, 0), detail::to_double(cl, 1)}; }
            else if (cl.key == "h") { detail::want_values(cl, 1); cfg.domain.h = detail::to_double(cl, 0); }
            else if (cl.key == "edges") {
                detail::want_values(cl, 4);
                cfg.domain.edges = {detail::to_edge(cl, 0), detail::to_edge(cl, 1), detail::to_edge(cl, 2), detail::to_edge(cl, 3)};
            }
            else if (cl.key == "obstacle") cfg.domain.obstacles.push_back(detail::to_polygon(cl, 0));
            else throw ConfigError(where + "unknown [domain] key " + cl.key);
        } else if (cl.section == "flow") {
            if (cl.key == "type") {
                detail::want_values(cl, 1);
                const std::string& t = cl.values[0];
                if (t == "none") cfg.flow.kind = FlowKind::NONE;
                else if (t == "cavity") cfg.flow.kind = FlowKind::CAVITY;
                else if (t == "channel") cfg.flow.kind = FlowKind::CHANNEL;
                else if (t == "file") cfg.flow.kind = FlowKind::FILE;
                else throw ConfigError(where + "unknown flow type " + t);
            }
            else if (cl.key == "mean_speed") { detail::want_values(cl, 1); cfg.flow.mean_speed = detail::to_double(cl, 0); }
            else if (cl.key == "period") { detail::want_values(cl, 1); cfg.flow.period = detail::to_double(cl, 0); }
            else if (cl.key == "snapshots") { detail::want_values(cl, 1); cfg.flow.snapshots = detail::to_int(cl, 0); }
            else if (cl.key == "file") { detail::want_values(cl, 1); cfg.flow.file = cl.values[0]; }
            else if (cl.key == "scale") { detail::want_values(cl, 1); cfg.flow.scale = detail::to_double(cl, 0); }
            else throw ConfigError(where + "unknown [flow] key " + cl.key);
        } else if (cl.section == "m0") {
            if (cl.key == "gaussian") {
                detail::want_values(cl, 4);
                cfg.m0_gaussians.push_back({detail::to_double(cl, 0),
                                            {detail::to_double(cl, 1), detail::to_double(cl, 2)},
                                            detail::to_double(cl, 3)});
            } else if (cl.key == "uniform") {
                M0Uniform u;
                u.weight = detail::to_double(cl, 0);
                u.region = detail::to_polygon(cl, 1);
                cfg.m0_uniforms.push_back(std::move(u));
            } else {
                throw ConfigError(where + "unknown [m0] key " + cl.key);
            }
        } else if (cl.section == "agents") {
            if (cl.key == "count") { detail::want_values(cl, 1); cfg.agents.count = detail::to_int(cl, 0); }
            else if (cl.key == "v") { detail::want_values(cl, 1); cfg.agents.v = detail::to_double(cl, 0); }
            else if (cl.key == "r_min") { detail::want_values(cl, 1); cfg.agents.r_min = detail::to_double(cl, 0); }
            else if (cl.key == "delta") { detail::want_values(cl, 1); cfg.agents.clearance = detail::to_double(cl, 0); }
            else if (cl.key == "dt") { detail::want_values(cl, 1); cfg.agents.dt = detail::to_double(cl, 0); }
            else if (cl.key == "alpha") { detail::want_values(cl, 1); cfg.agents.alpha = detail::to_double(cl, 0); }
            else if (cl.key == "tolerance") { detail::want_values(cl, 1); cfg.agents.tolerance = detail::to_double(cl, 0); }
            else if (cl.key == "max_iterations") { detail::want_values(cl, 1); cfg.agents.max_iterations = detail::to_int(cl, 0); }
            else if (cl.key == "footprint") {
                if (cl.values.empty()) throw ConfigError(where + "footprint wants a type");
                if (cl.values[0] == "gaussian") {
                    detail::want_values(cl, 4);
                    cfg.agents.footprint = GaussianDiskFootprint{detail::to_double(cl, 1), detail::to_double(cl, 2), detail::to_double(cl, 3)};
                } else if (cl.values[0] == "rect") {
                    detail::want_values(cl, 4);
                    cfg.agents.footprint = RectFootprint{detail::to_double(cl, 1), detail::to_double(cl, 2), detail::to_double(cl, 3)};
                } else {
                    throw ConfigError(where + "footprint type must be gaussian or rect");
                }
                saw_footprint = true;
            }
            else if (cl.key == "base") {
                detail::want_values(cl, 3);
                cfg.agents.bases.push_back({detail::to_double(cl, 0), detail::to_double(cl, 1)});
                cfg.agents.base_headings.push_back(detail::to_double(cl, 2));
            }
            else throw ConfigError(where + "unknown [agents] key " + cl.key);
        } else if (cl.section == "transport") {
            if (cl.key == "D") { detail::want_values(cl, 1); cfg.transport.diffusion = detail::to_double(cl, 0); }
            else if (cl.key == "drift_error") {
                detail::want_values(cl, 2);
                cfg.transport.drift_error = {detail::to_double(cl, 0), detail::to_double(cl, 1)};
            }
            else if (cl.key == "substep_floor") { detail::want_values(cl, 1); cfg.transport.substep_floor = detail::to_int(cl, 0); }
            else throw ConfigError(where + "unknown [transport] key " + cl.key);
        } else if (cl.section == "mission") {
            if (cl.key == "t_delay") { detail::want_values(cl, 1); cfg.mission.t_delay = detail::to_double(cl, 0); }
            else if (cl.key == "phase_duration") { detail::want_values(cl, 1); cfg.mission.phase_duration = detail::to_double(cl, 0); }
            else if (cl.key == "phase_count") { detail::want_values(cl, 1); cfg.mission.phase_count = detail::to_int(cl, 0); }
            else if (cl.key == "phase_gap") { detail::want_values(cl, 1); cfg.mission.phase_gap = detail::to_double(cl, 0); }
            else if (cl.key == "phase") {
                detail::want_values(cl, 2);
                cfg.mission.explicit_phases.push_back({detail::to_double(cl, 0), detail::to_double(cl, 1)});
            }
            else if (cl.key == "duration") { detail::want_values(cl, 1); cfg.mission.duration = detail::to_double(cl, 0); }
            else throw ConfigError(where + "unknown [mission] key " + cl.key);
        } else if (cl.section == "targets") {
            if (cl.key == "count") { detail::want_values(cl, 1); cfg.targets.count = detail::to_int(cl, 0); }
            else if (cl.key == "seed") { detail::want_values(cl, 1); cfg.targets.seed = detail::to_u64(cl, 0); }
            else if (cl.key == "sigma_noise") { detail::want_values(cl, 1); cfg.targets.sigma_noise = detail::to_double(cl, 0); }
            else if (cl.key == "log_every") { detail::want_values(cl, 1); cfg.targets.log_every = detail::to_int(cl, 0); }
            else throw ConfigError(where + "unknown [targets] key " + cl.key);
        } else if (cl.section == "run") {
            if (cl.key == "mode") {
                detail::want_values(cl, 1);
                if (cl.values[0] == "dynamic") cfg.mode = RunMode::DYNAMIC;
                else if (cl.values[0] == "static") cfg.mode = RunMode::STATIC;
                else throw ConfigError(where + "mode must be dynamic or static");
            }
            else if (cl.key == "out") { detail::want_values(cl, 1); cfg.output.directory = cl.values[0]; }
            else if (cl.key == "snapshot_every") { detail::want_values(cl, 1); cfg.output.snapshot_every = detail::to_int(cl, 0); }
            else if (cl.key == "record_agents") {
                detail::want_values(cl, 1);
                if (cl.values[0] == "true") cfg.output.record_agents = true;
                else if (cl.values[0] == "false") cfg.output.record_agents = false;
                else throw ConfigError(where + "record_agents must be true or false");
            }
            else throw ConfigError(where + "unknown [run] key " + cl.key);
        } else {
            throw ConfigError(where + "unknown section [" + cl.section + "]");
        }
    }
    if (!saw_footprint) cfg.agents.footprint = GaussianDiskFootprint{};
    return cfg;
}

inline ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    return parse_config(f);
}

/// Structural checks that do not need the grid built yet.
inline void validate_config(const ScenarioConfig& cfg) {
    if (!(cfg.domain.h > 0.0)) throw ConfigError("domain h must be positive");
    if (!(cfg.domain.size.x > 0.0) || !(cfg.domain.size.y > 0.0))
        throw ConfigError("domain size must be positive");

    if (cfg.flow.kind == FlowKind::CAVITY || cfg.flow.kind == FlowKind::CHANNEL) {
        if (!(cfg.flow.mean_speed > 0.0)) throw ConfigError("flow mean_speed must be positive");
    }
    if (cfg.flow.kind == FlowKind::CHANNEL) {
        if (!(cfg.flow.period > 0.0)) throw ConfigError("channel flow needs a positive period");
        if (cfg.flow.snapshots < 2) throw ConfigError("channel flow needs at least 2 snapshots");
    }
    if (cfg.flow.kind == FlowKind::FILE && cfg.flow.file.empty())
        throw ConfigError("flow type file needs a file path");
    if (!(cfg.flow.scale > 0.0)) throw ConfigError("flow scale must be positive");

    if (cfg.m0_gaussians.empty() && cfg.m0_uniforms.empty())
        throw ConfigError("m0 needs at least one component");
    double wsum = 0.0;
    for (const auto& c : cfg.m0_gaussians) {
        if (!(c.weight > 0.0)) throw ConfigError("m0 weights must be positive");
        if (!(c.sigma > 0.0)) throw ConfigError("m0 gaussian sigma must be positive");
        wsum += c.weight;
    }
    for (const auto& c : cfg.m0_uniforms) {
        if (!(c.weight > 0.0)) throw ConfigError("m0 weights must be positive");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("m0 weights must sum to 1");

    const AgentSpec& a = cfg.agents;
    if (a.count < 0) throw ConfigError("agent count must be non-negative");
    if (a.count > 0) {
        if (!(a.v > 0.0)) throw ConfigError("agent speed must be positive");
        if (!(a.r_min > 0.0)) throw ConfigError("agent r_min must be positive");
        if (a.clearance < 0.0) throw ConfigError("agent clearance must be non-negative");
        if (!(a.dt > 0.0)) throw ConfigError("control dt must be positive");
        if (!(a.alpha > 0.0)) throw ConfigError("alpha must be positive");
        if (!(a.tolerance > 0.0) || a.tolerance > 1e-4)
            throw ConfigError("solver tolerance must lie in (0, 1e-4]");
        if (static_cast<int>(a.bases.size()) != a.count)
            throw ConfigError("need exactly one base pose per agent");
        if (const auto* g = std::get_if<GaussianDiskFootprint>(&a.footprint)) {
            if (!(g->mu > 0.0) || g->mu >= 1.0) throw ConfigError("footprint mu must lie in (0,1)");
            if (!(g->sigma > 0.0)) throw ConfigError("footprint sigma must be positive");
        } else {
            const auto& r = std::get<RectFootprint>(a.footprint);
            if (!(r.mu > 0.0) || r.mu >= 1.0) throw ConfigError("footprint mu must lie in (0,1)");
            if (!(r.width > 0.0) || !(r.height > 0.0))
                throw ConfigError("footprint extent must be positive");
        }
        for (size_t i = 0; i < a.bases.size(); ++i) {
            for (size_t j = i + 1; j < a.bases.size(); ++j) {
                if (distance(a.bases[i], a.bases[j]) < a.clearance)
                    throw ConfigError("agent bases closer than the clearance distance");
            }
        }
    } else if (!a.bases.empty()) {
        throw ConfigError("base poses given for zero agents");
    }

    if (cfg.transport.diffusion && *cfg.transport.diffusion < 0.0)
        throw ConfigError("diffusion must be non-negative");
    if (cfg.transport.diffusion && cfg.transport.drift_error)
        throw ConfigError("give either D or drift_error, not both");
    if (cfg.transport.drift_error) {
        if (cfg.transport.drift_error->first < 0.0) throw ConfigError("drift error must be non-negative");
        if (!(cfg.transport.drift_error->second > 0.0)) throw ConfigError("drift error time must be positive");
    }
    if (cfg.transport.substep_floor < 1) throw ConfigError("substep floor must be at least 1");

    const auto phases = cfg.phases();
    double prev_end = -1.0;
    for (const Phase& p : phases) {
        if (p.start < 0.0 || !(p.duration > 0.0)) throw ConfigError("phase windows must be positive spans at t >= 0");
        if (p.start < prev_end) throw ConfigError("phase windows must not overlap and must increase");
        prev_end = p.start + p.duration;
    }
    if (cfg.mission.t_delay < 0.0) throw ConfigError("mission delay must be non-negative");
    if (!phases.empty() && phases.front().start + 1e-12 < cfg.mission.t_delay)
        throw ConfigError("phases must not start before the mission delay");
    if (cfg.mission.duration && *cfg.mission.duration <= 0.0)
        throw ConfigError("mission duration must be positive");

    if (cfg.targets.count <= 0) throw ConfigError("target count must be positive");
    if (cfg.targets.sigma_noise < 0.0) throw ConfigError("target noise sigma must be non-negative");
    if (cfg.targets.log_every < 1) throw ConfigError("target log decimation must be at least 1");
    if (cfg.output.snapshot_every < 0) throw ConfigError("snapshot interval must be non-negative");
}

}  // namespace driftsearch
