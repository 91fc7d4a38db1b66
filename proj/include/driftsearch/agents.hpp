#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "driftsearch/geometry.hpp"
#include "driftsearch/grid.hpp"
#include "driftsearch/sensing.hpp"

namespace driftsearch {

struct AgentState {
    Vec2 z{0.0, 0.0};
    double theta = 0.0;      // rad, wrapped to (-pi, pi]
    double v = 1.0;          // m/s, constant while flying
    double omega_max = 1.0;  // rad/s, equals v / R_min
    double clearance = 0.0;  // required separation from other agents, m
    Footprint footprint;
    bool active = true;
};

/// Proportional heading control: turn the full angle error within one step,
/// clamped at the turn-rate limit. A missing direction holds the heading.
inline double desired_turn_rate(const AgentState& a, const std::optional<Vec2>& dir, double dt) {
    if (!dir) return 0.0;
    const double err = wrap_angle(std::atan2(dir->y, dir->x) - a.theta);
    return std::clamp(err / dt, -a.omega_max, a.omega_max);
}

namespace detail {

/// Exact constant-turn-rate arc from (z, theta): position and heading after
/// time dt at speed v.
inline std::pair<Vec2, double> arc_endpoint(Vec2 z, double theta, double v, double omega, double dt) {
    const double theta1 = theta + omega * dt;
    if (std::abs(omega) * dt < 1e-10) {
        // Straight-segment limit; the arc formula would divide by ~0.
        return {z + v * dt * heading_vector(theta), theta1};
    }
    const double r = v / omega;
    return {{z.x + r * (std::sin(theta1) - std::sin(theta)),
             z.y + r * (std::cos(theta) - std::cos(theta1))},
            theta1};
}

}  // namespace detail

/// Advance one control step along the exact Dubins arc. Inactive agents do
/// not move.
inline AgentState step_agent(const AgentState& a, double omega, double dt) {
    if (!a.active) return a;
    if (std::abs(omega) > a.omega_max + 1e-12)
        throw std::invalid_argument("turn rate exceeds agent limit");
    AgentState next = a;
    const auto [z1, theta1] = detail::arc_endpoint(a.z, a.theta, a.v, omega, dt);
    next.z = z1;
    next.theta = wrap_angle(theta1);
    return next;
}

struct AvoidDecision {
    double omega = 0.0;
    bool feasible = true;   // some candidate cleared all checks
    bool adjusted = false;  // omega differs from the proposal
};

namespace detail {

/// Positions along a constant-omega arc at the shared sample times.
inline void arc_samples(const AgentState& a, double omega, double horizon, int count,
                        std::vector<Vec2>& out) {
    out.resize(count);
    for (int k = 0; k < count; ++k) {
        const double t = horizon * (k + 1) / count;
        out[k] = arc_endpoint(a.z, a.theta, a.v, omega, t).first;
    }
}

inline bool arc_clear(const std::vector<Vec2>& path, const Grid2D& grid,
                      const std::vector<std::vector<Vec2>>& committed, double delta) {
    const Rect dom = grid.domain();
    for (size_t k = 0; k < path.size(); ++k) {
        if (!dom.contains(path[k]) || !grid.is_fluid_at(path[k])) return false;
        for (const auto& other : committed) {
            if (distance(path[k], other[k]) < delta) return false;
        }
    }
    return true;
}

/// Nearest blocking thing: another active agent, a masked cell center, or
/// the domain rim, within the lookahead radius. Used only for the last-resort
/// turn direction.
inline std::optional<Vec2> nearest_threat(const AgentState& a, const std::vector<AgentState>& agents,
                                          size_t self, const Grid2D& grid, double radius) {
    std::optional<Vec2> best;
    double best_d = radius;
    auto consider = [&](Vec2 p) {
        const double d = distance(a.z, p);
        if (d < best_d) {
            best_d = d;
            best = p;
        }
    };
    for (size_t j = 0; j < agents.size(); ++j) {
        if (j == self || !agents[j].active) continue;
        consider(agents[j].z);
    }
    const int ix0 = std::max(0, static_cast<int>(std::floor((a.z.x - radius - grid.origin.x) / grid.h)));
    const int ix1 = std::min(grid.nx - 1, static_cast<int>(std::floor((a.z.x + radius - grid.origin.x) / grid.h)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((a.z.y - radius - grid.origin.y) / grid.h)));
    const int iy1 = std::min(grid.ny - 1, static_cast<int>(std::floor((a.z.y + radius - grid.origin.y) / grid.h)));
    for (int iy = iy0; iy <= iy1; ++iy) {
        for (int ix = ix0; ix <= ix1; ++ix) {
            if (!grid.is_fluid(ix, iy)) consider(grid.center(ix, iy));
        }
    }
    const Rect dom = grid.domain();
    consider({dom.lo.x, a.z.y});
    consider({dom.hi.x, a.z.y});
    consider({a.z.x, dom.lo.y});
    consider({a.z.x, dom.hi.y});
    return best;
}

}  // namespace detail

inline constexpr int kAvoidSamples = 32;

/// Clearance filter over proposed turn rates. Agents commit in index order;
/// each simulates its constant-omega arc over the shared horizon against
/// obstacles, domain exit, and the arcs already committed by lower indices.
/// An infeasible proposal is replaced by the feasible candidate rate closest
/// to it; with no feasible candidate the agent turns hard away from the
/// nearest threat.
inline std::vector<AvoidDecision> avoid(const std::vector<AgentState>& agents,
                                        const std::vector<double>& proposals, const Grid2D& grid,
                                        double dt) {
    if (agents.size() != proposals.size())
        throw std::invalid_argument("avoid: proposal count mismatch");
    double horizon = 3.0 * dt;
    for (const AgentState& a : agents) {
        if (!a.active || a.v <= 0.0) continue;
        horizon = std::max(horizon, 2.0 * a.clearance / a.v);
        // The horizon must contain a full minimum-radius quarter turn, or a
        // head-on boundary approach stays "feasible" past the point where any
        // turn can still keep the agent inside.
        if (a.omega_max > 0.0) horizon = std::max(horizon, 0.5 * kPi / a.omega_max);
    }

    std::vector<AvoidDecision> out(agents.size());
    std::vector<std::vector<Vec2>> committed;
    std::vector<Vec2> path;
    for (size_t i = 0; i < agents.size(); ++i) {
        const AgentState& a = agents[i];
        if (!a.active) {
            out[i] = {proposals[i], true, false};
            continue;
        }
        detail::arc_samples(a, proposals[i], horizon, kAvoidSamples, path);
        if (detail::arc_clear(path, grid, committed, a.clearance)) {
            out[i] = {proposals[i], true, false};
            committed.push_back(path);
            continue;
        }
        // Candidates sorted by closeness to the proposal, counterclockwise
        // preferred on ties, so the outcome is deterministic.
        struct Cand {
            double omega;
            double key;
        };
        std::vector<Cand> cands;
        for (int s : {0, 1, -1, 2, -2, 3, -3, 4, -4}) {
            const double w = a.omega_max * s / 4.0;
            cands.push_back({w, std::abs(w - proposals[i])});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
            if (x.key != y.key) return x.key < y.key;
            return x.omega > y.omega;
        });
        bool found = false;
        for (const Cand& c : cands) {
            detail::arc_samples(a, c.omega, horizon, kAvoidSamples, path);
            if (detail::arc_clear(path, grid, committed, a.clearance)) {
                out[i] = {c.omega, true, true};
                committed.push_back(path);
                found = true;
                break;
            }
        }
        if (!found) {
            const double radius = a.v * horizon + a.clearance + grid.h;
            const auto threat = detail::nearest_threat(a, agents, i, grid, radius);
            double turn = a.omega_max;
            if (threat) {
                const double side = cross(heading_vector(a.theta), *threat - a.z);
                if (side > 0.0) turn = -a.omega_max;  // threat on the left: turn right
            }
            out[i] = {turn, false, true};
            detail::arc_samples(a, turn, horizon, kAvoidSamples, path);
            committed.push_back(path);
        }
    }
    return out;
}

}  // namespace driftsearch
