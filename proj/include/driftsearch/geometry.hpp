#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace driftsearch {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
constexpr double norm_sq(Vec2 v) { return v.x * v.x + v.y * v.y; }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Rotate v counterclockwise by angle a.
inline Vec2 rotate(Vec2 v, double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline Vec2 heading_vector(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

struct Rect {
    Vec2 lo;
    Vec2 hi;

    constexpr double width() const { return hi.x - lo.x; }
    constexpr double height() const { return hi.y - lo.y; }
    constexpr bool contains(Vec2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }
    constexpr Vec2 clamp(Vec2 p) const {
        return {p.x < lo.x ? lo.x : (p.x > hi.x ? hi.x : p.x),
                p.y < lo.y ? lo.y : (p.y > hi.y ? hi.y : p.y)};
    }
};

/// Simple polygon given by its vertex loop (implicitly closed).
struct Polygon {
    std::vector<Vec2> pts;

    /// Even-odd rule containment test.
    bool contains(Vec2 p) const {
        bool inside = false;
        const size_t n = pts.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            if ((pts[i].y > p.y) != (pts[j].y > p.y) &&
                p.x < (pts[j].x - pts[i].x) * (p.y - pts[i].y) / (pts[j].y - pts[i].y) + pts[i].x) {
                inside = !inside;
            }
        }
        return inside;
    }

    Rect bounding_box() const {
        Rect r{pts.front(), pts.front()};
        for (const Vec2& p : pts) {
            r.lo.x = std::min(r.lo.x, p.x);
            r.lo.y = std::min(r.lo.y, p.y);
            r.hi.x = std::max(r.hi.x, p.x);
            r.hi.y = std::max(r.hi.y, p.y);
        }
        return r;
    }

    /// Area-weighted centroid (positive for either winding).
    Vec2 centroid() const {
        double a = 0.0;
        Vec2 c{0.0, 0.0};
        const size_t n = pts.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            const double w = cross(pts[j], pts[i]);
            a += w;
            c += (pts[j] + pts[i]) * w;
        }
        if (std::abs(a) < 1e-300) return pts.front();
        return c / (3.0 * a);
    }

    static Polygon rectangle(Vec2 lo, Vec2 hi) {
        return Polygon{{{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}}};
    }
};

}  // namespace driftsearch
