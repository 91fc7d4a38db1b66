#pragma once

#include <cmath>
#include <vector>

#include "driftsearch/errors.hpp"
#include "driftsearch/grid.hpp"

namespace driftsearch {

struct TransportConfig {
    double diffusion = 0.0;  // D, m^2/s
    int substep_floor = 10;  // minimum explicit substeps per control step

    void check() const {
        if (diffusion < 0.0) throw ConfigError("diffusion coefficient must be non-negative");
        if (substep_floor < 1) throw ConfigError("substep floor must be at least 1");
    }
};

/// Integral of m over fluid cells.
inline double total_mass(const ScalarField& m) {
    const Grid2D& g = *m.grid;
    double acc = 0.0;
    for (size_t i = 0; i < m.data.size(); ++i) {
        if (g.mask[i] == Cell::FLUID) acc += m.data[i];
    }
    return acc * g.h * g.h;
}

/// Scale m in place so it integrates to 1.
inline void normalize(ScalarField& m) {
    const double total = total_mass(m);
    if (!std::isfinite(total) || total <= 0.0)
        throw ConfigError("cannot normalize field with non-positive or non-finite mass");
    const double inv = 1.0 / total;
    for (double& v : m.data) v *= inv;
}

/// Diffusion coefficient matching a mean square displacement of e^2 = 2 D t.
inline double diffusion_coefficient(double e, double t) {
    if (!(t > 0.0)) throw ConfigError("displacement time must be positive");
    if (e < 0.0) throw ConfigError("displacement must be non-negative");
    return e * e / (2.0 * t);
}

namespace detail {

/// Largest per-cell outgoing advective coefficient (units of speed) the
/// upwind scheme can see on this snapshot: interior faces use the two-cell
/// mean velocity, open rim faces the cell's own outward component, walls and
/// obstacle faces nothing. Positivity of the update needs
/// dt_sub/h * (this + 4 D/h) <= 1.
inline double snapshot_outflow_speed(const Grid2D& g, const FlowSnapshot& s) {
    double worst = 0.0;
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            if (!g.is_fluid(ix, iy)) continue;
            const size_t c = g.index(ix, iy);
            double out = 0.0;
            auto face = [&](int jx, int jy, bool x_face, double sign, EdgePolicy rim) {
                const double vcomp = x_face ? s.wx[c] : s.wy[c];
                if (g.in_bounds(jx, jy)) {
                    if (!g.is_fluid(jx, jy)) return;
                    const size_t nb = g.index(jx, jy);
                    const double vf = 0.5 * (vcomp + (x_face ? s.wx[nb] : s.wy[nb]));
                    out += std::max(sign * vf, 0.0);
                } else if (rim == EdgePolicy::OPEN) {
                    out += std::max(sign * vcomp, 0.0);
                }
            };
            face(ix + 1, iy, true, +1.0, g.edges.right);
            face(ix - 1, iy, true, -1.0, g.edges.left);
            face(ix, iy + 1, false, +1.0, g.edges.top);
            face(ix, iy - 1, false, -1.0, g.edges.bottom);
            worst = std::max(worst, out);
        }
    }
    return worst;
}

inline double flow_outflow_speed(const FlowSeries& flow) {
    double worst = 0.0;
    for (const FlowSnapshot& s : flow.snaps) {
        worst = std::max(worst, snapshot_outflow_speed(*flow.grid, s));
    }
    return worst;
}

}  // namespace detail

/// Substep count for one control step: starts at the configured floor and
/// doubles until the advective CFL, the diffusive bound, and the combined
/// positivity bound all hold. Deterministic given flow and config.
inline int required_substeps(const Grid2D& g, const FlowSeries* flow, const TransportConfig& cfg,
                             double dt, double outflow_speed = -1.0) {
    const double wmax = flow ? flow->max_speed_sum() : 0.0;
    if (outflow_speed < 0.0) outflow_speed = flow ? detail::flow_outflow_speed(*flow) : 0.0;
    int n = std::max(cfg.substep_floor, 1);
    for (;;) {
        const double dts = dt / n;
        const double adv = wmax * dts / g.h;
        const double diff = cfg.diffusion * dts / (g.h * g.h);
        const double combined = outflow_speed * dts / g.h + 4.0 * diff;
        if (adv <= 0.9 && diff <= 0.2 && combined <= 0.98) return n;
        if (n > (1 << 24)) throw SolverError("transport substep subdivision diverged", combined, n);
        n *= 2;
    }
}

/// One control step of the probability transport: n explicit substeps of
/// first-order upwind advection plus 5-point diffusion, in conservative flux
/// form. Walls and obstacle faces carry no flux; open rim faces let mass
/// advect out but never in, and carry no diffusive flux.
inline void step_transport(ScalarField& m, const FlowSeries& flow, const TransportConfig& cfg,
                           double t, double dt, double outflow_speed = -1.0) {
    cfg.check();
    const Grid2D& g = *m.grid;
    if (!std::isfinite(total_mass(m)))
        throw SolverError("transport input field is not finite", 0.0, 0);

    const int n_sub = required_substeps(g, &flow, cfg, dt, outflow_speed);
    const double dts = dt / n_sub;
    const double lam = dts / g.h;          // advective face coefficient
    const double mu = cfg.diffusion / g.h; // diffusive flux per unit value difference

    const size_t n = g.cell_count();
    std::vector<double> wx, wy;
    std::vector<double> next(n);
    const bool steady = flow.snaps.size() == 1;

    for (int k = 0; k < n_sub; ++k) {
        if (k == 0 || !steady) flow.blended_planes(t + k * dts, wx, wy);
        std::copy(m.data.begin(), m.data.end(), next.begin());

        // Interior x faces: flux from (ix-1,iy) into (ix,iy).
        for (int iy = 0; iy < g.ny; ++iy) {
            for (int ix = 1; ix < g.nx; ++ix) {
                const size_t a = g.index(ix - 1, iy);
                const size_t b = g.index(ix, iy);
                if (g.mask[a] != Cell::FLUID || g.mask[b] != Cell::FLUID) continue;
                const double vf = 0.5 * (wx[a] + wx[b]);
                const double adv = vf > 0.0 ? vf * m.data[a] : vf * m.data[b];
                const double flux = adv - mu * (m.data[b] - m.data[a]);
                next[a] -= lam * flux;
                next[b] += lam * flux;
            }
        }
        // Interior y faces.
        for (int iy = 1; iy < g.ny; ++iy) {
            for (int ix = 0; ix < g.nx; ++ix) {
                const size_t a = g.index(ix, iy - 1);
                const size_t b = g.index(ix, iy);
                if (g.mask[a] != Cell::FLUID || g.mask[b] != Cell::FLUID) continue;
                const double vf = 0.5 * (wy[a] + wy[b]);
                const double adv = vf > 0.0 ? vf * m.data[a] : vf * m.data[b];
                const double flux = adv - mu * (m.data[b] - m.data[a]);
                next[a] -= lam * flux;
                next[b] += lam * flux;
            }
        }
        // Open rim faces: advective outflow from the rim cell only.
        auto open_face = [&](int ix, int iy, double outward_v) {
            if (!g.is_fluid(ix, iy)) return;
            const size_t c = g.index(ix, iy);
            next[c] -= lam * std::max(outward_v, 0.0) * m.data[c];
        };
        if (g.edges.left == EdgePolicy::OPEN)
            for (int iy = 0; iy < g.ny; ++iy) open_face(0, iy, -wx[g.index(0, iy)]);
        if (g.edges.right == EdgePolicy::OPEN)
            for (int iy = 0; iy < g.ny; ++iy) open_face(g.nx - 1, iy, wx[g.index(g.nx - 1, iy)]);
        if (g.edges.bottom == EdgePolicy::OPEN)
            for (int ix = 0; ix < g.nx; ++ix) open_face(ix, 0, -wy[g.index(ix, 0)]);
        if (g.edges.top == EdgePolicy::OPEN)
            for (int ix = 0; ix < g.nx; ++ix) open_face(ix, g.ny - 1, wy[g.index(ix, g.ny - 1)]);

        // The CFL bound makes the update a convex combination, so negatives
        // can only be roundoff; pin them to keep the field a density.
        for (size_t i = 0; i < n; ++i) m.data[i] = next[i] > 0.0 ? next[i] : 0.0;
    }
}

/// Exact sensing sink over one control step: m *= exp(-Gamma dt) per cell.
inline void apply_sensing(ScalarField& m, const ScalarField& gamma, double dt) {
    if (m.grid != gamma.grid) throw ConfigError("sensing field grid mismatch");
    for (size_t i = 0; i < m.data.size(); ++i) {
        const double r = gamma.data[i];
        if (r == 0.0) continue;
        if (r < 0.0) throw ConfigError("sensing rate must be non-negative");
        m.data[i] *= std::exp(-r * dt);
    }
}

}  // namespace driftsearch
