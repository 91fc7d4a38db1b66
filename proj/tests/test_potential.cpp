#include <catch2/catch_amalgamated.hpp>

#include "driftsearch/driftsearch.hpp"

using namespace driftsearch;
using Catch::Approx;

namespace {

double max_abs_diff(const ScalarField& a, const std::vector<double>& b) {
    double mx = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        if (a.grid->mask[i] != Cell::FLUID) continue;
        mx = std::max(mx, std::abs(a.data[i] - b[i]));
    }
    return mx;
}

}  // namespace

TEST_CASE("cosine modes are exact eigenvectors of the discrete operator") {
    const int n = 40;
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 1.0 / n);
    const int k = 3;
    const double alpha = 0.2;

    ScalarField m(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            m.at(ix, iy) = std::cos(k * kPi * g.center(ix, iy).x);

    // Neumann closure on cell centers: the discrete eigenvalue of this mode.
    const double lam = (2.0 - 2.0 * std::cos(k * kPi * g.h)) / (g.h * g.h);
    std::vector<double> expect(m.data);
    for (double& v : expect) v /= 1.0 + alpha * lam;

    PotentialConfig cfg;
    cfg.alpha = alpha;
    cfg.tolerance = 1e-12;
    const ScalarField u = solve_potential(m, cfg);
    REQUIRE(max_abs_diff(u, expect) < 1e-9);
}

TEST_CASE("fine-grid solution approaches the smooth screened response") {
    const int n = 200;
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 1.0 / n);
    const double alpha = 0.05;

    ScalarField m(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            m.at(ix, iy) = std::cos(kPi * g.center(ix, iy).x);

    std::vector<double> expect(m.data);
    for (double& v : expect) v /= 1.0 + alpha * kPi * kPi;

    PotentialConfig cfg;
    cfg.alpha = alpha;
    cfg.tolerance = 1e-12;
    const ScalarField u = solve_potential(m, cfg);
    REQUIRE(max_abs_diff(u, expect) < 1e-3);
}

TEST_CASE("uniform sources pass through unchanged, masks included") {
    const std::vector<Polygon> obs{Polygon::rectangle({0.3, 0.3}, {0.6, 0.7})};
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.05, obs);
    ScalarField m(g);
    for (size_t i = 0; i < m.data.size(); ++i)
        if (g.mask[i] == Cell::FLUID) m.data[i] = 4.2;

    PotentialConfig cfg;
    cfg.alpha = 7.0;
    cfg.tolerance = 1e-12;
    const ScalarField u = solve_potential(m, cfg);
    for (size_t i = 0; i < u.data.size(); ++i) {
        if (g.mask[i] == Cell::FLUID) {
            REQUIRE(u.data[i] == Approx(4.2).margin(1e-8));
        } else {
            REQUIRE(u.data[i] == 0.0);
        }
    }
}

TEST_CASE("the solve is linear in its source") {
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.05);
    ScalarField m1(g), m2(g), sum(g);
    Rng rng(3);
    for (size_t i = 0; i < m1.data.size(); ++i) {
        m1.data[i] = rng.uniform();
        m2.data[i] = rng.uniform(-1.0, 1.0);
        sum.data[i] = m1.data[i] + m2.data[i];
    }
    PotentialConfig cfg;
    cfg.alpha = 0.1;
    cfg.tolerance = 1e-12;
    const ScalarField u1 = solve_potential(m1, cfg);
    const ScalarField u2 = solve_potential(m2, cfg);
    const ScalarField us = solve_potential(sum, cfg);
    double mx = 0.0;
    for (size_t i = 0; i < us.data.size(); ++i)
        mx = std::max(mx, std::abs(us.data[i] - u1.data[i] - u2.data[i]));
    REQUIRE(mx < 1e-8);
}

TEST_CASE("non-negative sources give positive bounded potentials") {
    const std::vector<Polygon> obs{Polygon::rectangle({0.5, 0.1}, {0.7, 0.9})};
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.025, obs);
    ScalarField m(g);
    m.at(4, 4) = 1.0;
    m.at(30, 30) = 0.5;
    PotentialConfig cfg;
    cfg.alpha = 0.05;
    cfg.tolerance = 1e-10;
    const ScalarField u = solve_potential(m, cfg);

    double umin = 1e300, umax = -1e300, usum = 0.0, msum = 0.0;
    for (size_t i = 0; i < u.data.size(); ++i) {
        if (g.mask[i] != Cell::FLUID) continue;
        umin = std::min(umin, u.data[i]);
        umax = std::max(umax, u.data[i]);
        usum += u.data[i];
        msum += m.data[i];
    }
    REQUIRE(umin > 0.0);
    REQUIRE(umax <= 1.0 + 1e-9);
    // The screening term absorbs exactly what the Laplacian spreads: the
    // fluid sums of u and m agree.
    REQUIRE(usum == Approx(msum).epsilon(1e-6));
}

TEST_CASE("warm starts converge at least as fast as cold starts") {
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.02);
    ScalarField m(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            m.at(ix, iy) = std::exp(-20.0 * norm_sq(g.center(ix, iy) - Vec2{0.4, 0.6}));

    PotentialConfig cfg;
    cfg.alpha = 0.1;
    cfg.tolerance = 1e-8;
    ScalarField u(g, 0.0);
    const int cold = solve_potential(m, cfg, u);
    REQUIRE(cold > 0);

    for (double& v : m.data) v *= 1.01;
    ScalarField cold2(g, 0.0);
    const int cold_again = solve_potential(m, cfg, cold2);
    const int warm = solve_potential(m, cfg, u);
    REQUIRE(warm <= cold_again);
    REQUIRE(max_abs_diff(u, cold2.data) < 1e-6);
}

TEST_CASE("zero sources and solver failures are reported") {
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.1);
    ScalarField zero(g, 0.0);
    PotentialConfig cfg;
    ScalarField u(g, 3.0);
    REQUIRE(solve_potential(zero, cfg, u) == 0);
    for (double v : u.data) REQUIRE(v == 0.0);

    ScalarField m(g);
    m.at(5, 5) = 1.0;
    PotentialConfig tight;
    tight.alpha = 10.0;
    tight.tolerance = 1e-12;
    tight.max_iterations = 1;
    ScalarField u2(g, 0.0);
    try {
        solve_potential(m, tight, u2);
        FAIL("expected a convergence failure");
    } catch (const SolverError& e) {
        REQUIRE(e.iterations == 1);
        REQUIRE(e.residual > 0.0);
    }

    const Grid2D other = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.1);
    ScalarField uo(other, 0.0);
    REQUIRE_THROWS_AS(solve_potential(m, cfg, uo), ConfigError);
}

TEST_CASE("config validation rejects bad solver parameters") {
    PotentialConfig cfg;
    cfg.alpha = 0.0;
    REQUIRE_THROWS_AS(cfg.check(), ConfigError);
    cfg.alpha = 1.0;
    cfg.tolerance = 1e-3;
    REQUIRE_THROWS_AS(cfg.check(), ConfigError);
    cfg.tolerance = 1e-6;
    cfg.max_iterations = 0;
    REQUIRE_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("unit gradient recovers affine slopes") {
    const std::vector<Polygon> obs{Polygon::rectangle({0.4, 0.4}, {0.6, 0.6})};
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.05, obs);
    ScalarField u(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const Vec2 p = g.center(ix, iy);
            u.at(ix, iy) = 2.0 * p.x + 1.0 * p.y;
        }

    const double inv = 1.0 / std::sqrt(5.0);
    for (Vec2 p : {Vec2{0.2, 0.3}, Vec2{0.37, 0.5}, Vec2{0.8, 0.8}, Vec2{0.05, 0.95}}) {
        const auto dir = unit_gradient(u, p);
        REQUIRE(dir.has_value());
        REQUIRE(dir->x == Approx(2.0 * inv).margin(1e-9));
        REQUIRE(dir->y == Approx(1.0 * inv).margin(1e-9));
    }

    ScalarField flat(g, 5.0);
    REQUIRE_FALSE(unit_gradient(flat, {0.5, 0.2}).has_value());
    REQUIRE_THROWS_AS(unit_gradient(u, {1.5, 0.5}), std::out_of_range);
}

TEST_CASE("the gradient climbs toward remaining probability") {
    const Grid2D g = build_grid({0.0, 0.0}, {1.0, 1.0}, 0.02);
    ScalarField m(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            m.at(ix, iy) = std::exp(-30.0 * norm_sq(g.center(ix, iy) - Vec2{0.8, 0.8}));
    normalize(m);
    PotentialConfig cfg;
    cfg.alpha = 0.05;
    const ScalarField u = solve_potential(m, cfg);

    const Vec2 at{0.2, 0.2};
    const auto dir = unit_gradient(u, at);
    REQUIRE(dir.has_value());
    Vec2 toward = Vec2{0.8, 0.8} - at;
    toward = toward / norm(toward);
    REQUIRE(dot(*dir, toward) > 0.9);
}
