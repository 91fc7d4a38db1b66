#pragma once

#include <cmath>
#include <variant>

#include "driftsearch/geometry.hpp"
#include "driftsearch/grid.hpp"

namespace driftsearch {

/// Radial sensing rate peaking at the agent position; mu is the single
/// survival-model flyover detection probability the peak is calibrated to.
struct GaussianDiskFootprint {
    double mu = 0.8;
    double sigma = 0.015;          // m
    double cutoff_radius = 0.015;  // nominal detection radius, metadata only
};

/// Constant sensing rate inside a heading-aligned rectangle: width spans
/// across the heading, height along it.
struct RectFootprint {
    double mu = 0.75;
    double width = 160.0;  // m, across heading
    double height = 90.0;  // m, along heading
};

using Footprint = std::variant<GaussianDiskFootprint, RectFootprint>;

inline constexpr double kRateFloor = 1e-12;  // rates below this count as zero

inline double gamma_gaussian(double d, const GaussianDiskFootprint& f) {
    const double peak = -std::log(1.0 - f.mu) / 2.0 * f.mu;
    const double r = peak * std::exp(-0.5 * (d / f.sigma) * (d / f.sigma));
    return r < kRateFloor ? 0.0 : r;
}

/// r_local is the query point in the footprint frame: x across the heading,
/// y along it.
inline double gamma_rect(Vec2 r_local, const RectFootprint& f) {
    if (std::abs(r_local.x) > 0.5 * f.width || std::abs(r_local.y) > 0.5 * f.height) return 0.0;
    const double r = -std::log(1.0 - f.mu) / 9.0 * f.mu;
    return r < kRateFloor ? 0.0 : r;
}

/// World point -> footprint frame: rotates the agent heading onto +y, so the
/// local y axis runs along the direction of travel.
inline Vec2 to_footprint_frame(Vec2 z, double theta, Vec2 world) {
    return rotate(world - z, 0.5 * kPi - theta);
}

/// Sensing rate an agent at (z, theta) applies at a world point.
inline double footprint_rate(const Footprint& fp, Vec2 z, double theta, Vec2 world) {
    if (const auto* g = std::get_if<GaussianDiskFootprint>(&fp)) {
        return gamma_gaussian(distance(world, z), *g);
    }
    const auto& r = std::get<RectFootprint>(fp);
    return gamma_rect(to_footprint_frame(z, theta, world), r);
}

/// Radius beyond which the rate is identically zero.
inline double support_radius(const Footprint& fp) {
    if (const auto* g = std::get_if<GaussianDiskFootprint>(&fp)) {
        const double peak = -std::log(1.0 - g->mu) / 2.0 * g->mu;
        if (peak <= kRateFloor) return 0.0;
        return g->sigma * std::sqrt(2.0 * std::log(peak / kRateFloor));
    }
    const auto& r = std::get<RectFootprint>(fp);
    return 0.5 * std::hypot(r.width, r.height);
}

/// Total coverage rate at a world point from all active agents. AgentLike
/// needs members z, theta, footprint, active.
template <class AgentRange>
double coverage_rate_at(const AgentRange& agents, Vec2 p) {
    double acc = 0.0;
    for (const auto& a : agents) {
        if (!a.active) continue;
        acc += footprint_rate(a.footprint, a.z, a.theta, p);
    }
    return acc;
}

/// Rasterizes the summed footprint rates of all active agents onto the fluid
/// cells by cell-center sampling.
template <class AgentRange>
ScalarField accumulate_coverage(const AgentRange& agents, const Grid2D& grid) {
    ScalarField gamma(grid, 0.0);
    for (const auto& a : agents) {
        if (!a.active) continue;
        const double r = support_radius(a.footprint);
        if (r <= 0.0) continue;
        const int ix0 = std::max(0, static_cast<int>(std::floor((a.z.x - r - grid.origin.x) / grid.h)));
        const int ix1 = std::min(grid.nx - 1, static_cast<int>(std::floor((a.z.x + r - grid.origin.x) / grid.h)));
        const int iy0 = std::max(0, static_cast<int>(std::floor((a.z.y - r - grid.origin.y) / grid.h)));
        const int iy1 = std::min(grid.ny - 1, static_cast<int>(std::floor((a.z.y + r - grid.origin.y) / grid.h)));
        for (int iy = iy0; iy <= iy1; ++iy) {
            for (int ix = ix0; ix <= ix1; ++ix) {
                if (!grid.is_fluid(ix, iy)) continue;
                const double rate = footprint_rate(a.footprint, a.z, a.theta, grid.center(ix, iy));
                if (rate > 0.0) gamma.at(ix, iy) += rate;
            }
        }
    }
    return gamma;
}

}  // namespace driftsearch
