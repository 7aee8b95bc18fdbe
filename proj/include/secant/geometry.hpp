#pragma once

#include "direction_law.hpp"
#include "errors.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace secant {

/// Points closer than this are considered coincident.
inline constexpr double geom_eps = 1e-9;

struct Vec2 {
    double x = 0, y = 0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// CCW angle from direction a to direction b, in (0, 2 pi].
inline double ccw_angle(double from, double to) {
    double d = std::fmod(to - from, 2 * pi);
    if (d <= 0) d += 2 * pi;
    return d;
}

struct CellMetrics {
    double area = 0;
    double perimeter = 0;
    int n_vertices = 0;
    double height = 0;
    Vec2 bottom_vertex;
    bool bottom_tie = false;
};

/// Convex cell, vertices in CCW order. Edge i runs from vertex i to vertex
/// i + 1; when arc[i] is set it is a CCW arc of the window circle instead of
/// a segment. A cell with no vertices and full_window set is the whole disk.
struct ConvexCell {
    std::vector<Vec2> vertices;
    std::vector<std::uint8_t> arc;
    double window_radius = 0;
    bool full_window = false;
    bool boundary = false;
    bool degenerate = false;
    std::optional<Vec2> generator;
    CellMetrics metrics;
};

/// Metrics of a straight-edged convex polygon given in CCW order.
inline CellMetrics polygon_metrics(const std::vector<Vec2>& v) {
    std::size_t n = v.size();
    if (n < 3) throw ContractError("polygon needs at least 3 vertices");
    CellMetrics m;
    m.n_vertices = int(n);
    Vec2 o = v[0];
    double twice = 0;
    double ymin = v[0].y, ymax = v[0].y;
    std::size_t ib = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = v[i], b = v[(i + 1) % n], c = v[(i + 2) % n];
        double turn = cross(b - a, c - b);
        double scale = norm(b - a) * norm(c - b);
        if (turn < -1e-12 * scale) throw ContractError("polygon is not convex or not CCW");
        twice += cross(a - o, b - o);
        m.perimeter += norm(b - a);
        if (a.y < ymin || (a.y == ymin && a.x < v[ib].x)) {
            ymin = a.y;
            ib = i;
        }
        ymax = std::max(ymax, a.y);
    }
    if (!(twice > 0)) throw ContractError("polygon has non-positive area");
    for (std::size_t i = 0; i < n; ++i)
        if (i != ib && std::abs(v[i].y - ymin) < geom_eps) m.bottom_tie = true;
    m.area = twice / 2;
    m.height = ymax - ymin;
    m.bottom_vertex = v[ib];
    return m;
}

/// Metrics of a cell that may have arc edges.
inline CellMetrics cell_metrics(const ConvexCell& c) {
    double R = c.window_radius;
    if (c.full_window) {
        CellMetrics m;
        m.area = pi * R * R;
        m.perimeter = 2 * pi * R;
        m.height = 2 * R;
        m.bottom_vertex = {0, -R};
        return m;
    }
    if (c.arc.empty()) return polygon_metrics(c.vertices);
    std::size_t n = c.vertices.size();
    if (n < 2 || c.arc.size() != n) throw ContractError("cell arc flags do not match vertices");
    CellMetrics m;
    m.n_vertices = int(n);
    Vec2 o = c.vertices[0];
    double twice = 0;
    double ymin = 1e300, ymax = -1e300;
    Vec2 bottom{};
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = c.vertices[i], b = c.vertices[(i + 1) % n];
        twice += cross(a - o, b - o);
        if (a.y < ymin || (a.y == ymin && a.x < bottom.x)) {
            ymin = a.y;
            bottom = a;
        }
        ymax = std::max(ymax, a.y);
        if (c.arc[i]) {
            double t0 = std::atan2(a.y, a.x), t1 = std::atan2(b.y, b.x);
            double th = ccw_angle(t0, t1);
            m.area += R * R * (th - std::sin(th)) / 2;
            m.perimeter += R * th;
            // extreme points of the circle swept by the arc
            if (ccw_angle(t0, -pi / 2) < th && -R < ymin) {
                ymin = -R;
                bottom = {0, -R};
            }
            if (ccw_angle(t0, pi / 2) < th) ymax = std::max(ymax, R);
        } else {
            m.perimeter += norm(b - a);
        }
    }
    m.area += twice / 2;
    m.height = ymax - ymin;
    m.bottom_vertex = bottom;
    return m;
}

} // namespace secant
