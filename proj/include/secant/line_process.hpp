#pragma once

#include "direction_law.hpp"
#include "geometry.hpp"
#include "rng.hpp"

#include <cmath>
#include <vector>

namespace secant {

/// The line {x : n . x = p} with direction d = (cos phi, sin phi) and
/// normal n = (-sin phi, cos phi).
struct Line {
    double phi = 0;
    double p = 0;

    Vec2 direction() const { return {std::cos(phi), std::sin(phi)}; }
    Vec2 normal() const { return {-std::sin(phi), std::cos(phi)}; }
    Vec2 foot() const { return p * normal(); }
};

/// Disk of the given radius centred at the origin.
struct Window {
    double radius = 1;

    explicit Window(double r = 1) : radius(r) {
        if (!(r > 0) || !std::isfinite(r)) throw DomainError("window radius must be > 0");
    }
    bool contains(Vec2 v) const { return norm(v) <= radius; }
    double area() const { return pi * radius * radius; }
};

/// Poisson line process restricted to the window. The number of lines is
/// Poisson with mean 2 R times the integral of F.
inline std::vector<Line> sample_lines(const DirectionLaw& law, const Window& w, std::uint64_t seed) {
    Engine eng = make_engine(seed);
    double mean = 2 * w.radius * law.total_mass();
    std::uint64_t n = poisson(eng, mean);
    std::vector<Line> lines;
    lines.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        double phi = sample_inclination(law, eng);
        double p = w.radius * (2 * uniform01(eng) - 1);
        lines.push_back({phi, p});
    }
    return lines;
}

/// Homogeneous Poisson points of intensity rho in the window.
inline std::vector<Vec2> sample_points(double rho, const Window& w, std::uint64_t seed) {
    if (!(rho >= 0) || !std::isfinite(rho)) throw DomainError("point intensity must be finite and >= 0");
    Engine eng = make_engine(seed);
    std::uint64_t n = poisson(eng, rho * w.area());
    std::vector<Vec2> pts;
    pts.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        double r = w.radius * std::sqrt(uniform01(eng));
        double th = 2 * pi * uniform01(eng);
        pts.push_back({r * std::cos(th), r * std::sin(th)});
    }
    return pts;
}

/// Crossing of a line with the horizontal line y = y0: abscissa and the
/// inclination of the crossing line. Returns false for horizontal lines.
inline bool horizontal_crossing(const Line& l, double y0, double& x) {
    Vec2 n = l.normal();
    if (std::abs(n.x) < 1e-15) return false;
    x = (l.p - n.y * y0) / n.x;
    return true;
}

} // namespace secant
