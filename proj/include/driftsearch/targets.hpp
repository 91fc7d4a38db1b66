#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "driftsearch/agents.hpp"
#include "driftsearch/errors.hpp"
#include "driftsearch/grid.hpp"
#include "driftsearch/rng.hpp"
#include "driftsearch/sensing.hpp"

namespace driftsearch {

enum class TargetStatus : uint8_t { ALIVE = 0, DETECTED = 1, ESCAPED = 2 };

struct TargetParticle {
    Vec2 y{0.0, 0.0};
    TargetStatus status = TargetStatus::ALIVE;
    double event_time = -1.0;  // time of detection or escape
    bool frozen = false;       // left the domain; never moves again
};

struct DriftNoise {
    double sigma = 0.0;  // per-step per-axis standard deviation, m
    uint64_t seed = 0;

    void check() const {
        if (sigma < 0.0) throw ConfigError("drift noise sigma must be non-negative");
    }
};

namespace detail {
inline constexpr uint64_t kSpawnSalt = 0x73;
inline constexpr uint64_t kMotionSalt = 0x6d;
inline constexpr uint64_t kDetectSalt = 0x64;
}  // namespace detail

/// Ground-truth particle ensemble with per-particle RNG streams, so particle
/// histories depend only on (seed, flow, noise) and never on each other.
/// Detected particles keep drifting with their original draws; that keeps
/// trajectories identical across runs that differ only in sensing.
struct TargetSet {
    std::vector<TargetParticle> particles;
    uint64_t seed = 0;
    std::vector<Rng> motion;     // lazily created from the noise seed
    std::vector<Rng> detection;  // created at spawn from the set seed

    int count(TargetStatus s) const {
        int n = 0;
        for (const TargetParticle& p : particles) n += p.status == s;
        return n;
    }
};

/// Draws n positions from the discrete density m0: cell by cumulative mass,
/// uniform jitter inside the cell.
inline TargetSet spawn_targets(const ScalarField& m0, int n, uint64_t seed) {
    if (n <= 0) throw ConfigError("target count must be positive");
    const Grid2D& g = *m0.grid;
    std::vector<double> cum(g.cell_count(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < cum.size(); ++i) {
        if (g.mask[i] == Cell::FLUID && m0.data[i] > 0.0) total += m0.data[i];
        cum[i] = total;
    }
    if (!(total > 0.0)) throw ConfigError("cannot spawn targets from a massless field");

    TargetSet set;
    set.seed = seed;
    set.particles.resize(n);
    set.detection.reserve(n);
    Rng place(substream_seed(seed, 0, detail::kSpawnSalt));
    for (int i = 0; i < n; ++i) {
        const double u = place.uniform() * total;
        const size_t c = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        const int ix = static_cast<int>(c % g.nx);
        const int iy = static_cast<int>(c / g.nx);
        const Vec2 lo{g.origin.x + ix * g.h, g.origin.y + iy * g.h};
        set.particles[i].y = {lo.x + place.uniform() * g.h, lo.y + place.uniform() * g.h};
        set.detection.emplace_back(substream_seed(seed, i, detail::kDetectSalt));
    }
    return set;
}

/// Fixed-position ensemble for calibration experiments.
inline TargetSet targets_at(const std::vector<Vec2>& positions, uint64_t seed) {
    if (positions.empty()) throw ConfigError("target count must be positive");
    TargetSet set;
    set.seed = seed;
    set.particles.resize(positions.size());
    set.detection.reserve(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        set.particles[i].y = positions[i];
        set.detection.emplace_back(substream_seed(seed, i, detail::kDetectSalt));
    }
    return set;
}

namespace detail {

/// Walks one particle by the precomputed displacement, honoring boundaries:
/// crossing an open rim freezes it (and escapes it if still alive), walls
/// and obstacles are slid along axis by axis.
inline void move_particle(TargetParticle& p, Vec2 disp, const Grid2D& g, double t_event) {
    const Rect dom = g.domain();
    Vec2 target = p.y + disp;
    bool exits_open = false;
    if (target.x < dom.lo.x) {
        if (g.edges.left == EdgePolicy::OPEN) exits_open = true;
        target.x = dom.lo.x;
    } else if (target.x > dom.hi.x) {
        if (g.edges.right == EdgePolicy::OPEN) exits_open = true;
        target.x = dom.hi.x;
    }
    if (target.y < dom.lo.y) {
        if (g.edges.bottom == EdgePolicy::OPEN) exits_open = true;
        target.y = dom.lo.y;
    } else if (target.y > dom.hi.y) {
        if (g.edges.top == EdgePolicy::OPEN) exits_open = true;
        target.y = dom.hi.y;
    }
    if (exits_open) {
        if (p.status == TargetStatus::ALIVE) {
            p.status = TargetStatus::ESCAPED;
            p.event_time = t_event;
        }
        p.frozen = true;
        return;
    }
    Vec2 q = p.y;
    if (g.is_fluid_at({target.x, q.y})) q.x = target.x;
    if (g.is_fluid_at({q.x, target.y})) q.y = target.y;
    p.y = q;
}

}  // namespace detail

/// Midpoint integration of the flow plus optional Brownian per-axis noise.
/// Frozen particles neither move nor consume draws, so the draw sequence is
/// a pure function of each particle's own trajectory.
inline void advect_targets(TargetSet& set, const FlowSeries& flow, double t, double dt,
                           const DriftNoise& noise) {
    noise.check();
    const Grid2D& g = *flow.grid;
    if (set.motion.empty() && noise.sigma > 0.0) {
        set.motion.reserve(set.particles.size());
        for (size_t i = 0; i < set.particles.size(); ++i) {
            set.motion.emplace_back(substream_seed(noise.seed, i, detail::kMotionSalt));
        }
    }
    for (size_t i = 0; i < set.particles.size(); ++i) {
        TargetParticle& p = set.particles[i];
        if (p.frozen) continue;
        const Vec2 k1 = flow.sample(p.y, t);
        const Vec2 mid = p.y + 0.5 * dt * k1;
        Vec2 disp = dt * flow.sample(mid, t + 0.5 * dt);
        if (noise.sigma > 0.0) {
            const Vec2 gauss = set.motion[i].normal_pair();
            disp += noise.sigma * gauss;
        }
        detail::move_particle(p, disp, g, t + dt);
    }
}

/// One Bernoulli survival trial per alive particle against the summed agent
/// footprint rates at its exact position.
inline void detection_trials(TargetSet& set, const std::vector<AgentState>& agents, double dt,
                             double t) {
    for (size_t i = 0; i < set.particles.size(); ++i) {
        TargetParticle& p = set.particles[i];
        if (p.status != TargetStatus::ALIVE) continue;
        const double rate = coverage_rate_at(agents, p.y);
        if (rate <= 0.0) continue;
        const double p_detect = 1.0 - std::exp(-rate * dt);
        if (set.detection[i].uniform() < p_detect) {
            p.status = TargetStatus::DETECTED;
            p.event_time = t;
        }
    }
}

}  // namespace driftsearch
