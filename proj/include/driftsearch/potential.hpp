#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "driftsearch/errors.hpp"
#include "driftsearch/grid.hpp"

namespace driftsearch {

struct PotentialConfig {
    double alpha = 1.0;        // smoothing coefficient in (alpha lap(u) - u + m = 0)
    double tolerance = 1e-6;   // relative residual target
    int max_iterations = 50000;

    void check() const {
        if (!(alpha > 0.0)) throw ConfigError("potential alpha must be positive");
        if (!(tolerance > 0.0) || tolerance > 1e-4)
            throw ConfigError("potential tolerance must lie in (0, 1e-4]");
        if (max_iterations < 1) throw ConfigError("potential max iterations must be positive");
    }
};

namespace detail {

/// y = (I - alpha L) x on fluid cells, with zero-normal-derivative closure:
/// absent neighbors (rim, obstacle) drop out of the Laplacian entirely.
inline void apply_screened(const Grid2D& g, double alpha, const std::vector<double>& x,
                           std::vector<double>& y) {
    const double a = alpha / (g.h * g.h);
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const size_t c = g.index(ix, iy);
            if (g.mask[c] != Cell::FLUID) {
                y[c] = 0.0;
                continue;
            }
            double acc = 0.0;
            int links = 0;
            if (ix > 0 && g.is_fluid(ix - 1, iy)) { acc += x[c - 1]; ++links; }
            if (ix < g.nx - 1 && g.is_fluid(ix + 1, iy)) { acc += x[c + 1]; ++links; }
            if (iy > 0 && g.is_fluid(ix, iy - 1)) { acc += x[c - g.nx]; ++links; }
            if (iy < g.ny - 1 && g.is_fluid(ix, iy + 1)) { acc += x[c + g.nx]; ++links; }
            y[c] = (1.0 + a * links) * x[c] - a * acc;
        }
    }
}

inline double dot_fluid(const Grid2D& g, const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (g.mask[i] == Cell::FLUID) acc += a[i] * b[i];
    }
    return acc;
}

}  // namespace detail

/// Solves (I - alpha L) u = m by Jacobi-preconditioned conjugate gradients.
/// u doubles as the warm start on entry (pass zeros for a cold start) and
/// holds the solution on return. Returns the iteration count.
inline int solve_potential(const ScalarField& m, const PotentialConfig& cfg, ScalarField& u) {
    cfg.check();
    if (m.grid != u.grid) throw ConfigError("potential field grid mismatch");
    const Grid2D& g = *m.grid;
    const size_t n = g.cell_count();
    const double a = cfg.alpha / (g.h * g.h);

    const double bnorm = std::sqrt(detail::dot_fluid(g, m.data, m.data));
    if (!std::isfinite(bnorm)) throw SolverError("potential source is not finite", 0.0, 0);
    if (bnorm == 0.0) {
        std::fill(u.data.begin(), u.data.end(), 0.0);
        return 0;
    }

    // Jacobi diagonal: 1 + a * (number of fluid links).
    std::vector<double> inv_diag(n, 0.0);
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const size_t c = g.index(ix, iy);
            if (g.mask[c] != Cell::FLUID) continue;
            int links = 0;
            links += ix > 0 && g.is_fluid(ix - 1, iy);
            links += ix < g.nx - 1 && g.is_fluid(ix + 1, iy);
            links += iy > 0 && g.is_fluid(ix, iy - 1);
            links += iy < g.ny - 1 && g.is_fluid(ix, iy + 1);
            inv_diag[c] = 1.0 / (1.0 + a * links);
        }
    }

    std::vector<double> r(n, 0.0), z(n, 0.0), p(n, 0.0), Ap(n, 0.0);
    detail::apply_screened(g, cfg.alpha, u.data, Ap);
    for (size_t i = 0; i < n; ++i) {
        r[i] = g.mask[i] == Cell::FLUID ? m.data[i] - Ap[i] : 0.0;
        z[i] = r[i] * inv_diag[i];
    }
    std::copy(z.begin(), z.end(), p.begin());
    double rz = detail::dot_fluid(g, r, z);
    double rel = std::sqrt(detail::dot_fluid(g, r, r)) / bnorm;

    int it = 0;
    while (rel > cfg.tolerance) {
        if (it >= cfg.max_iterations)
            throw SolverError("potential solve did not converge", rel, it);
        detail::apply_screened(g, cfg.alpha, p, Ap);
        const double pAp = detail::dot_fluid(g, p, Ap);
        if (!(pAp > 0.0)) throw SolverError("potential system lost definiteness", rel, it);
        const double step = rz / pAp;
        for (size_t i = 0; i < n; ++i) {
            if (g.mask[i] != Cell::FLUID) continue;
            u.data[i] += step * p[i];
            r[i] -= step * Ap[i];
        }
        for (size_t i = 0; i < n; ++i) z[i] = r[i] * inv_diag[i];
        const double rz_next = detail::dot_fluid(g, r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (size_t i = 0; i < n; ++i) {
            if (g.mask[i] != Cell::FLUID) continue;
            p[i] = z[i] + beta * p[i];
        }
        rel = std::sqrt(detail::dot_fluid(g, r, r)) / bnorm;
        ++it;
    }
    return it;
}

/// Cold-start convenience wrapper.
inline ScalarField solve_potential(const ScalarField& m, const PotentialConfig& cfg) {
    ScalarField u(*m.grid, 0.0);
    solve_potential(m, cfg, u);
    return u;
}

namespace detail {

/// Central-difference gradient component at a cell, falling back to the
/// one-sided difference toward fluid when a neighbor is masked or off-grid.
inline Vec2 cell_gradient(const ScalarField& u, int ix, int iy) {
    const Grid2D& g = *u.grid;
    const double inv_h = 1.0 / g.h;
    const bool xm = ix > 0 && g.is_fluid(ix - 1, iy);
    const bool xp = ix < g.nx - 1 && g.is_fluid(ix + 1, iy);
    const bool ym = iy > 0 && g.is_fluid(ix, iy - 1);
    const bool yp = iy < g.ny - 1 && g.is_fluid(ix, iy + 1);
    Vec2 grad{0.0, 0.0};
    if (xm && xp) grad.x = 0.5 * inv_h * (u.at(ix + 1, iy) - u.at(ix - 1, iy));
    else if (xp) grad.x = inv_h * (u.at(ix + 1, iy) - u.at(ix, iy));
    else if (xm) grad.x = inv_h * (u.at(ix, iy) - u.at(ix - 1, iy));
    if (ym && yp) grad.y = 0.5 * inv_h * (u.at(ix, iy + 1) - u.at(ix, iy - 1));
    else if (yp) grad.y = inv_h * (u.at(ix, iy + 1) - u.at(ix, iy));
    else if (ym) grad.y = inv_h * (u.at(ix, iy) - u.at(ix, iy - 1));
    return grad;
}

}  // namespace detail

/// Normalized potential gradient at p, bilinearly interpolated from per-cell
/// central differences (fluid weights only). Returns nullopt where the
/// gradient is too small to define a direction.
inline std::optional<Vec2> unit_gradient(const ScalarField& u, Vec2 p) {
    const Grid2D& g = *u.grid;
    if (!g.domain().contains(p)) throw std::out_of_range("gradient query outside domain");
    const auto s = detail::bilinear_stencil(g, p);
    Vec2 acc{0.0, 0.0};
    double wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (!g.is_fluid(s.ix[k], s.iy[k])) continue;
        const Vec2 grad = detail::cell_gradient(u, s.ix[k], s.iy[k]);
        acc += s.w[k] * grad;
        wsum += s.w[k];
    }
    if (wsum <= 0.0) return std::nullopt;
    acc = acc / wsum;
    const double len = norm(acc);
    if (len < 1e-12) return std::nullopt;
    return acc / len;
}

}  // namespace driftsearch
