#pragma once

#include <cmath>
#include <functional>

#include "driftsearch/errors.hpp"
#include "driftsearch/grid.hpp"

namespace driftsearch {

/// Unit-amplitude recirculating stream function: a single gyre, zero on the
/// domain rim. With inset = h/2 it vanishes on the outermost ring of cell
/// centers and on all ghost points beyond it (coordinates clamp into the
/// ring), which is what makes the flux-form divergence cancel exactly at
/// wall-adjacent cells, not just in the interior.
inline double gyre_stream_function(Vec2 p, Vec2 origin, Vec2 extent, double inset = 0.0) {
    const double lx = extent.x - 2.0 * inset;
    const double ly = extent.y - 2.0 * inset;
    const double x = std::clamp(p.x - origin.x - inset, 0.0, lx);
    const double y = std::clamp(p.y - origin.y - inset, 0.0, ly);
    const double sx = std::sin(kPi * x / lx);
    const double sy = std::sin(kPi * y / ly);
    return sx * sx * sy * sy;
}

namespace detail {

/// Cell-centered velocity from central differences of a stream function,
/// evaluated at neighbor cell centers. Using the exact same coordinates the
/// neighbors use makes the flux-form discrete divergence cancel to roundoff.
inline FlowSnapshot stream_function_snapshot(const Grid2D& g, double t,
                                             const std::function<double(Vec2)>& psi) {
    FlowSnapshot s;
    s.t = t;
    s.wx.assign(g.cell_count(), 0.0);
    s.wy.assign(g.cell_count(), 0.0);
    const double inv2h = 1.0 / (2.0 * g.h);
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const size_t c = g.index(ix, iy);
            if (!g.is_fluid(ix, iy)) continue;
            s.wx[c] = (psi(g.center(ix, iy + 1)) - psi(g.center(ix, iy - 1))) * inv2h;
            s.wy[c] = -(psi(g.center(ix + 1, iy)) - psi(g.center(ix - 1, iy))) * inv2h;
        }
    }
    return s;
}

}  // namespace detail

/// Steady divergence-free recirculation with the requested fluid-mean speed.
/// Stands in for a lid-driven cavity field: zero wall-normal flow, one gyre.
inline FlowSeries cavity_like_flow(const Grid2D& grid, double mean_speed) {
    if (!(mean_speed > 0.0)) throw ConfigError("flow mean speed must be positive");
    const Rect dom = grid.domain();
    const Vec2 extent{dom.width(), dom.height()};
    FlowSeries flow;
    flow.grid = &grid;
    flow.snaps.push_back(detail::stream_function_snapshot(grid, 0.0, [&](Vec2 p) {
        return gyre_stream_function(p, grid.origin, extent, 0.5 * grid.h);
    }));
    const double base = flow.mean_speed(0);
    if (!(base > 0.0)) throw ConfigError("degenerate flow field");
    const double s = mean_speed / base;
    for (double& v : flow.snaps[0].wx) v *= s;
    for (double& v : flow.snaps[0].wy) v *= s;
    return flow;
}

/// Transient divergence-free channel: smooth through-flow profile between
/// top and bottom walls plus a pulsing gyre, sampled as snapshots over
/// [0, duration]. Mean fluid speed over all snapshots matches mean_speed.
inline FlowSeries channel_flow(const Grid2D& grid, double mean_speed, double period,
                               double duration, int n_snapshots) {
    if (!(mean_speed > 0.0)) throw ConfigError("flow mean speed must be positive");
    if (!(period > 0.0)) throw ConfigError("flow period must be positive");
    if (n_snapshots < 2) throw ConfigError("channel flow needs at least 2 snapshots");
    if (!(duration > 0.0)) throw ConfigError("flow duration must be positive");
    const Rect dom = grid.domain();
    const Vec2 extent{dom.width(), dom.height()};
    auto psi = [&](Vec2 p, double t) {
        const double sy = std::clamp((p.y - grid.origin.y) / extent.y, 0.0, 1.0);
        const double through = extent.y * sy * sy * (3.0 - 2.0 * sy);
        const double pulse = 1.0 + 0.25 * std::sin(2.0 * kPi * t / period);
        const double gyre = 0.4 * extent.y *
                            gyre_stream_function(p, grid.origin, extent, 0.5 * grid.h) *
                            std::cos(2.0 * kPi * t / period);
        return through * pulse + gyre;
    };
    FlowSeries flow;
    flow.grid = &grid;
    for (int k = 0; k < n_snapshots; ++k) {
        const double t = duration * k / (n_snapshots - 1);
        flow.snaps.push_back(
            detail::stream_function_snapshot(grid, t, [&](Vec2 p) { return psi(p, t); }));
    }
    const double base = flow.mean_speed();
    if (!(base > 0.0)) throw ConfigError("degenerate flow field");
    const double s = mean_speed / base;
    for (FlowSnapshot& snap : flow.snaps) {
        for (double& v : snap.wx) v *= s;
        for (double& v : snap.wy) v *= s;
    }
    return flow;
}

/// Uniformly scaled copy; the velocity ratio divides by s exactly.
inline FlowSeries scale_flow(const FlowSeries& flow, double s) {
    if (!(s > 0.0)) throw ConfigError("flow scale must be positive");
    FlowSeries out;
    out.grid = flow.grid;
    out.snaps = flow.snaps;
    for (FlowSnapshot& snap : out.snaps) {
        for (double& v : snap.wx) v *= s;
        for (double& v : snap.wy) v *= s;
    }
    return out;
}

}  // namespace driftsearch
