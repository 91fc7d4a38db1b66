#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "driftsearch/errors.hpp"
#include "driftsearch/geometry.hpp"

namespace driftsearch {

enum class Cell : uint8_t { FLUID = 0, OBSTACLE = 1 };

/// What happens at a domain rim face. WALL blocks flux and reflects motion,
/// OPEN lets mass and targets leave the domain.
enum class EdgePolicy : uint8_t { WALL = 0, OPEN = 1 };

struct EdgePolicies {
    EdgePolicy left = EdgePolicy::WALL;
    EdgePolicy right = EdgePolicy::WALL;
    EdgePolicy bottom = EdgePolicy::WALL;
    EdgePolicy top = EdgePolicy::WALL;
};

/// Uniform cell-centered grid with a FLUID/OBSTACLE mask. Cell (ix, iy) has
/// its center at origin + ((ix+0.5)h, (iy+0.5)h); data is stored row major,
/// index = iy*nx + ix. Obstacle faces always behave as walls; the rim policy
/// only applies where fluid touches the domain boundary.
struct Grid2D {
    Vec2 origin{0.0, 0.0};
    double h = 1.0;
    int nx = 0;
    int ny = 0;
    std::vector<Cell> mask;
    EdgePolicies edges;

    size_t cell_count() const { return static_cast<size_t>(nx) * static_cast<size_t>(ny); }
    size_t index(int ix, int iy) const { return static_cast<size_t>(iy) * nx + ix; }
    bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < nx && iy >= 0 && iy < ny; }
    bool is_fluid(int ix, int iy) const { return mask[index(ix, iy)] == Cell::FLUID; }
    Vec2 center(int ix, int iy) const {
        return {origin.x + (ix + 0.5) * h, origin.y + (iy + 0.5) * h};
    }
    Rect domain() const { return {origin, {origin.x + nx * h, origin.y + ny * h}}; }

    int fluid_count() const {
        return static_cast<int>(std::count(mask.begin(), mask.end(), Cell::FLUID));
    }

    /// Cell containing p, or nullopt if p lies outside the domain rectangle.
    /// Points exactly on the upper rim are assigned to the last cell.
    std::optional<std::pair<int, int>> locate(Vec2 p) const {
        const Rect d = domain();
        if (!d.contains(p)) return std::nullopt;
        int ix = static_cast<int>(std::floor((p.x - origin.x) / h));
        int iy = static_cast<int>(std::floor((p.y - origin.y) / h));
        ix = std::clamp(ix, 0, nx - 1);
        iy = std::clamp(iy, 0, ny - 1);
        return std::make_pair(ix, iy);
    }

    bool is_fluid_at(Vec2 p) const {
        const auto c = locate(p);
        return c && is_fluid(c->first, c->second);
    }

    void check() const {
        if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
        if (nx < 2 || ny < 2) throw ConfigError("grid needs at least 2x2 cells");
        if (mask.size() != cell_count()) throw ConfigError("grid mask size mismatch");
    }
};

/// Build a grid covering origin + [0,extent.x] x [0,extent.y]. Cell counts
/// round the extent up to whole cells; the small bias keeps exact multiples
/// of h from gaining a spurious extra cell to roundoff.
inline Grid2D build_grid(Vec2 origin, Vec2 extent, double h,
                         std::span<const Polygon> obstacles = {},
                         EdgePolicies edges = {}) {
    if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
    if (!(extent.x > 0.0) || !(extent.y > 0.0)) throw ConfigError("domain extent must be positive");
    Grid2D g;
    g.origin = origin;
    g.h = h;
    g.nx = static_cast<int>(std::ceil(extent.x / h - 1e-9));
    g.ny = static_cast<int>(std::ceil(extent.y / h - 1e-9));
    g.nx = std::max(g.nx, 1);
    g.ny = std::max(g.ny, 1);
    if (g.nx < 2 || g.ny < 2) throw ConfigError("domain too small for spacing: need at least 2x2 cells");
    g.edges = edges;
    g.mask.assign(g.cell_count(), Cell::FLUID);
    for (const Polygon& poly : obstacles) {
        const Rect bb = poly.bounding_box();
        const int ix0 = std::max(0, static_cast<int>(std::floor((bb.lo.x - origin.x) / h)) - 1);
        const int ix1 = std::min(g.nx - 1, static_cast<int>(std::ceil((bb.hi.x - origin.x) / h)) + 1);
        const int iy0 = std::max(0, static_cast<int>(std::floor((bb.lo.y - origin.y) / h)) - 1);
        const int iy1 = std::min(g.ny - 1, static_cast<int>(std::ceil((bb.hi.y - origin.y) / h)) + 1);
        for (int iy = iy0; iy <= iy1; ++iy) {
            for (int ix = ix0; ix <= ix1; ++ix) {
                if (poly.contains(g.center(ix, iy))) g.mask[g.index(ix, iy)] = Cell::OBSTACLE;
            }
        }
    }
    return g;
}

namespace detail {

/// Corner indices and weights for cell-centered bilinear interpolation,
/// clamped so samples near the rim degrade to the boundary cells.
struct BilinearStencil {
    int ix[4];
    int iy[4];
    double w[4];
};

inline BilinearStencil bilinear_stencil(const Grid2D& g, Vec2 p) {
    double gx = (p.x - g.origin.x) / g.h - 0.5;
    double gy = (p.y - g.origin.y) / g.h - 0.5;
    int i0 = static_cast<int>(std::floor(gx));
    int j0 = static_cast<int>(std::floor(gy));
    double fx = gx - i0;
    double fy = gy - j0;
    if (i0 < 0) { i0 = 0; fx = 0.0; }
    if (i0 > g.nx - 2) { i0 = g.nx - 2; fx = 1.0; }
    if (j0 < 0) { j0 = 0; fy = 0.0; }
    if (j0 > g.ny - 2) { j0 = g.ny - 2; fy = 1.0; }
    BilinearStencil s;
    s.ix[0] = i0;     s.iy[0] = j0;     s.w[0] = (1.0 - fx) * (1.0 - fy);
    s.ix[1] = i0 + 1; s.iy[1] = j0;     s.w[1] = fx * (1.0 - fy);
    s.ix[2] = i0;     s.iy[2] = j0 + 1; s.w[2] = (1.0 - fx) * fy;
    s.ix[3] = i0 + 1; s.iy[3] = j0 + 1; s.w[3] = fx * fy;
    return s;
}

}  // namespace detail

/// Scalar field on the fluid cells of a grid. Obstacle cells carry zeros and
/// never receive weight when sampling.
struct ScalarField {
    const Grid2D* grid = nullptr;
    std::vector<double> data;

    ScalarField() = default;
    explicit ScalarField(const Grid2D& g, double fill = 0.0)
        : grid(&g), data(g.cell_count(), fill) {}

    double& at(int ix, int iy) { return data[grid->index(ix, iy)]; }
    double at(int ix, int iy) const { return data[grid->index(ix, iy)]; }

    /// Bilinear sample with weights renormalized over FLUID corners, so
    /// values do not bleed to zero next to obstacles. Returns 0 where every
    /// corner is masked.
    double sample(Vec2 p) const {
        const auto s = detail::bilinear_stencil(*grid, p);
        double acc = 0.0, wsum = 0.0;
        for (int k = 0; k < 4; ++k) {
            if (!grid->is_fluid(s.ix[k], s.iy[k])) continue;
            acc += s.w[k] * data[grid->index(s.ix[k], s.iy[k])];
            wsum += s.w[k];
        }
        return wsum > 0.0 ? acc / wsum : 0.0;
    }
};

/// One velocity snapshot: cell-centered components, zero on obstacle cells.
struct FlowSnapshot {
    double t = 0.0;
    std::vector<double> wx;
    std::vector<double> wy;
};

/// Time series of flow snapshots on a shared grid, linearly interpolated in
/// time and clamped outside the covered interval.
struct FlowSeries {
    const Grid2D* grid = nullptr;
    std::vector<FlowSnapshot> snaps;

    bool empty() const { return snaps.empty(); }

    void check() const {
        if (!grid) throw ConfigError("flow series has no grid");
        if (snaps.empty()) throw ConfigError("flow series has no snapshots");
        for (size_t i = 0; i < snaps.size(); ++i) {
            if (snaps[i].wx.size() != grid->cell_count() || snaps[i].wy.size() != grid->cell_count())
                throw ConfigError("flow snapshot size mismatch");
            if (i > 0 && !(snaps[i].t > snaps[i - 1].t))
                throw ConfigError("flow snapshot times must be strictly increasing");
        }
    }

    /// Bracketing snapshot pair and blend factor for time t (clamped).
    std::tuple<size_t, size_t, double> bracket(double t) const {
        if (snaps.size() == 1 || t <= snaps.front().t) return {0, 0, 0.0};
        if (t >= snaps.back().t) return {snaps.size() - 1, snaps.size() - 1, 0.0};
        size_t hi = 1;
        while (snaps[hi].t < t) ++hi;
        const size_t lo = hi - 1;
        const double f = (t - snaps[lo].t) / (snaps[hi].t - snaps[lo].t);
        return {lo, hi, f};
    }

    /// Velocity at point p and time t. Bilinear in space with obstacle
    /// corners contributing zero (no renormalization: flow stagnates at
    /// solid boundaries), linear in time.
    Vec2 sample(Vec2 p, double t) const {
        const auto [lo, hi, f] = bracket(t);
        const auto s = detail::bilinear_stencil(*grid, p);
        Vec2 v{0.0, 0.0};
        for (int k = 0; k < 4; ++k) {
            const size_t idx = grid->index(s.ix[k], s.iy[k]);
            if (!grid->is_fluid(s.ix[k], s.iy[k])) continue;
            const double wxk = (1.0 - f) * snaps[lo].wx[idx] + f * snaps[hi].wx[idx];
            const double wyk = (1.0 - f) * snaps[lo].wy[idx] + f * snaps[hi].wy[idx];
            v.x += s.w[k] * wxk;
            v.y += s.w[k] * wyk;
        }
        return v;
    }

    /// Fill whole-grid component planes blended to time t.
    void blended_planes(double t, std::vector<double>& wx, std::vector<double>& wy) const {
        const auto [lo, hi, f] = bracket(t);
        const size_t n = grid->cell_count();
        wx.resize(n);
        wy.resize(n);
        if (lo == hi || f == 0.0) {
            std::copy(snaps[lo].wx.begin(), snaps[lo].wx.end(), wx.begin());
            std::copy(snaps[lo].wy.begin(), snaps[lo].wy.end(), wy.begin());
            return;
        }
        for (size_t i = 0; i < n; ++i) {
            wx[i] = (1.0 - f) * snaps[lo].wx[i] + f * snaps[hi].wx[i];
            wy[i] = (1.0 - f) * snaps[lo].wy[i] + f * snaps[hi].wy[i];
        }
    }

    /// Mean |w| over fluid cells of one snapshot.
    double mean_speed(size_t snap) const {
        const FlowSnapshot& s = snaps[snap];
        double acc = 0.0;
        int n = 0;
        for (int iy = 0; iy < grid->ny; ++iy) {
            for (int ix = 0; ix < grid->nx; ++ix) {
                if (!grid->is_fluid(ix, iy)) continue;
                const size_t i = grid->index(ix, iy);
                acc += std::hypot(s.wx[i], s.wy[i]);
                ++n;
            }
        }
        return n > 0 ? acc / n : 0.0;
    }

    /// Mean |w| over fluid cells and all snapshots.
    double mean_speed() const {
        double acc = 0.0;
        for (size_t k = 0; k < snaps.size(); ++k) acc += mean_speed(k);
        return snaps.empty() ? 0.0 : acc / snaps.size();
    }

    /// Largest |wx|+|wy| over all cells and snapshots; bounds the advective
    /// step for the CFL check.
    double max_speed_sum() const {
        double m = 0.0;
        for (const FlowSnapshot& s : snaps) {
            for (size_t i = 0; i < s.wx.size(); ++i) {
                m = std::max(m, std::abs(s.wx[i]) + std::abs(s.wy[i]));
            }
        }
        return m;
    }
};

}  // namespace driftsearch
