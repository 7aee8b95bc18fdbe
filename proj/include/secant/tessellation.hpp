#pragma once

#include "geometry.hpp"
#include "line_process.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

namespace secant {

enum class CellSource { lines, voronoi };

struct CellComplex {
    CellSource source = CellSource::lines;
    double window_radius = 1;
    std::vector<ConvexCell> cells;
    std::size_t n_lines = 0;
    std::size_t n_points = 0;
    std::size_t n_crossings = 0;
    std::size_t n_degenerate = 0;
};

namespace detail {

struct ArrNode {
    double s;
    int other;       // crossing line, -1 at the window boundary
    int other_index; // index of the same crossing in the other line's list
    int crossing;    // crossing id, -1 at the window boundary
};

} // namespace detail

/// Faces of the arrangement of the lines inside the disk window.
/// Crossings closer than geom_eps along a line, or closer than geom_eps to
/// the circle, mark the incident cells degenerate.
inline CellComplex build_arrangement(const std::vector<Line>& lines_in, const Window& w) {
    const double R = w.radius;
    CellComplex cx;
    cx.source = CellSource::lines;
    cx.window_radius = R;

    std::vector<Line> lines;
    for (const Line& l : lines_in)
        if (std::abs(l.p) < R - geom_eps) lines.push_back(l);
    cx.n_lines = lines.size();
    const int n = int(lines.size());
    if (n == 0) {
        ConvexCell c;
        c.window_radius = R;
        c.full_window = true;
        c.boundary = true;
        c.metrics = cell_metrics(c);
        cx.cells.push_back(c);
        return cx;
    }

    std::vector<Vec2> dir(n), foot(n);
    std::vector<double> half(n);
    for (int i = 0; i < n; ++i) {
        dir[i] = lines[i].direction();
        foot[i] = lines[i].foot();
        half[i] = std::sqrt(R * R - lines[i].p * lines[i].p);
    }

    std::vector<std::vector<detail::ArrNode>> nodes(n);
    std::vector<Vec2> xpos;
    std::vector<std::uint8_t> xbad;
    std::vector<std::array<int, 2>> xline;
    for (int i = 0; i < n; ++i) nodes[i].push_back({-half[i], -1, -1, -1});
    for (int i = 0; i < n; ++i) {
        Vec2 ni = lines[i].normal();
        for (int j = i + 1; j < n; ++j) {
            Vec2 nj = lines[j].normal();
            double det = cross(ni, nj);
            if (std::abs(det) < 1e-14) continue;
            Vec2 x{(lines[i].p * nj.y - lines[j].p * ni.y) / det, (ni.x * lines[j].p - nj.x * lines[i].p) / det};
            double r = norm(x);
            if (r >= R) continue;
            int id = int(xpos.size());
            xpos.push_back(x);
            xbad.push_back(R - r < geom_eps);
            xline.push_back({i, j});
            nodes[i].push_back({dot(x - foot[i], dir[i]), j, -1, id});
            nodes[j].push_back({dot(x - foot[j], dir[j]), i, -1, id});
        }
    }
    for (int i = 0; i < n; ++i) nodes[i].push_back({half[i], -1, -1, -1});
    cx.n_crossings = xpos.size();

    std::vector<std::array<int, 2>> xidx(xpos.size());
    for (int i = 0; i < n; ++i) {
        auto& nd = nodes[i];
        std::sort(nd.begin() + 1, nd.end() - 1, [](auto& a, auto& b) { return a.s < b.s; });
        for (std::size_t k = 1; k + 1 < nd.size(); ++k) {
            int id = nd[k].crossing;
            xidx[id][xline[id][0] == i ? 0 : 1] = int(k);
            if (nd[k + 1].s - nd[k].s < geom_eps) {
                xbad[id] = 1;
                if (nd[k + 1].crossing >= 0) xbad[nd[k + 1].crossing] = 1;
            }
        }
    }
    for (int i = 0; i < n; ++i)
        for (std::size_t k = 1; k + 1 < nodes[i].size(); ++k) {
            int id = nodes[i][k].crossing;
            nodes[i][k].other_index = xidx[id][xline[id][0] == i ? 1 : 0];
        }

    // half-edge h = offset[i] + 2 k + d : segment k of line i, d = 0 forward
    std::vector<int> offset(n + 1, 0);
    for (int i = 0; i < n; ++i) offset[i + 1] = offset[i] + 2 * int(nodes[i].size() - 1);
    auto node_pos = [&](int i, int k) { return foot[i] + nodes[i][k].s * dir[i]; };

    // window endpoints in CCW order; endpoint e = 2 i + (0 start, 1 end)
    std::vector<double> theta(2 * n);
    for (int i = 0; i < n; ++i) {
        Vec2 a = node_pos(i, 0), b = node_pos(i, int(nodes[i].size()) - 1);
        theta[2 * i] = std::atan2(a.y, a.x);
        theta[2 * i + 1] = std::atan2(b.y, b.x);
    }
    std::vector<int> order(2 * n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return theta[a] < theta[b]; });
    std::vector<int> next_ccw(2 * n);
    for (int k = 0; k < 2 * n; ++k) next_ccw[order[k]] = order[(k + 1) % (2 * n)];

    std::vector<std::uint8_t> seen(offset[n], 0);
    for (int h0 = 0; h0 < offset[n]; ++h0) {
        if (seen[h0]) continue;
        ConvexCell cell;
        cell.window_radius = R;
        int h = h0;
        bool bad = false;
        std::size_t guard = 0;
        do {
            if (++guard > std::size_t(offset[n]) + 4) throw NumericalError("arrangement face walk did not close");
            seen[h] = 1;
            int i = int(std::upper_bound(offset.begin(), offset.end(), h) - offset.begin()) - 1;
            int local = h - offset[i];
            int k = local / 2, d = local % 2;
            int from = d == 0 ? k : k + 1;
            int to = d == 0 ? k + 1 : k;
            int last = int(nodes[i].size()) - 1;
            cell.vertices.push_back(node_pos(i, from));
            cell.arc.push_back(0);
            if (nodes[i][from].crossing >= 0 && xbad[nodes[i][from].crossing]) bad = true;
            if (to == 0 || to == last) {
                cell.vertices.push_back(node_pos(i, to));
                cell.arc.push_back(1);
                cell.boundary = true;
                int e2 = next_ccw[2 * i + (to == 0 ? 0 : 1)];
                int i2 = e2 / 2;
                int last2 = int(nodes[i2].size()) - 1;
                h = (e2 % 2 == 0) ? offset[i2] : offset[i2] + 2 * (last2 - 1) + 1;
            } else {
                const auto& nd = nodes[i][to];
                int j = nd.other, m = nd.other_index;
                Vec2 cur = d == 0 ? dir[i] : -1.0 * dir[i];
                h = cross(cur, dir[j]) > 0 ? offset[j] + 2 * m : offset[j] + 2 * (m - 1) + 1;
            }
        } while (h != h0);
        if (!cell.boundary) cell.arc.clear();
        cell.degenerate = bad;
        try {
            cell.metrics = cell_metrics(cell);
        } catch (const ContractError&) {
            cell.degenerate = true;
        }
        if (cell.degenerate) ++cx.n_degenerate;
        cx.cells.push_back(std::move(cell));
    }
    return cx;
}

namespace detail {

/// Keep the part of a convex polygon where dot(x, n) <= c.
inline void clip_halfplane(std::vector<Vec2>& poly, Vec2 n, double c, std::vector<Vec2>& scratch) {
    scratch.clear();
    std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        Vec2 a = poly[i], b = poly[(i + 1) % m];
        double fa = dot(a, n) - c, fb = dot(b, n) - c;
        if (fa <= 0) scratch.push_back(a);
        if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) {
            double t = fa / (fa - fb);
            scratch.push_back(a + t * (b - a));
        }
    }
    poly.swap(scratch);
}

/// Intersect a convex polygon with the disk, producing arc edges.
inline ConvexCell clip_to_disk(const std::vector<Vec2>& poly, double R) {
    ConvexCell cell;
    cell.window_radius = R;
    std::size_t m = poly.size();
    bool all_in = true;
    for (Vec2 v : poly)
        if (norm(v) > R) all_in = false;
    if (all_in) {
        cell.vertices = poly;
        return cell;
    }
    // walk edges, collecting inside pieces; a pending exit is joined to the
    // next entry by an arc
    std::vector<Vec2> out;
    std::vector<std::uint8_t> arcs;
    for (std::size_t i = 0; i < m; ++i) {
        Vec2 a = poly[i], b = poly[(i + 1) % m];
        Vec2 d = b - a;
        double A = dot(d, d), B = 2 * dot(a, d), C = dot(a, a) - R * R;
        double disc = B * B - 4 * A * C;
        bool a_in = C <= 0;
        if (a_in) {
            out.push_back(a);
            arcs.push_back(0);
        }
        if (disc <= 0 || A == 0) continue;
        double sq = std::sqrt(disc);
        double t0 = (-B - sq) / (2 * A), t1 = (-B + sq) / (2 * A);
        if (t0 > 0 && t0 < 1 && !a_in) {
            out.push_back(a + t0 * d);
            arcs.push_back(0);
        }
        if (t1 > 0 && t1 < 1) {
            out.push_back(a + t1 * d);
            arcs.push_back(1);
        }
    }
    cell.boundary = true;
    if (out.empty()) {
        cell.full_window = true;
        return cell;
    }
    cell.vertices = std::move(out);
    cell.arc = std::move(arcs);
    return cell;
}

inline void merge_close_vertices(ConvexCell& c) {
    if (c.vertices.size() < 2) return;
    std::vector<Vec2> v;
    std::vector<std::uint8_t> a;
    for (std::size_t i = 0; i < c.vertices.size(); ++i) {
        if (!v.empty() && norm(c.vertices[i] - v.back()) < geom_eps) {
            c.degenerate = true;
            if (!c.arc.empty()) a.back() = c.arc[i];
            continue;
        }
        v.push_back(c.vertices[i]);
        if (!c.arc.empty()) a.push_back(c.arc[i]);
    }
    if (v.size() > 1 && norm(v.front() - v.back()) < geom_eps) {
        c.degenerate = true;
        v.pop_back();
        if (!a.empty()) a.pop_back();
    }
    c.vertices = std::move(v);
    c.arc = std::move(a);
}

} // namespace detail

/// Voronoi cells of the points clipped to the disk window.
inline CellComplex build_voronoi(const std::vector<Vec2>& pts, const Window& w) {
    const double R = w.radius;
    CellComplex cx;
    cx.source = CellSource::voronoi;
    cx.window_radius = R;
    cx.n_points = pts.size();
    const std::size_t n = pts.size();
    if (n == 0) return cx;

    double h = std::max(2 * R / 256, std::sqrt(w.area() / double(n)));
    int G = int(std::ceil(2 * R / h)) + 1;
    std::vector<std::vector<int>> grid(std::size_t(G) * G);
    auto gx = [&](double v) { return std::clamp(int((v + R) / h), 0, G - 1); };
    for (std::size_t i = 0; i < n; ++i) grid[std::size_t(gx(pts[i].y)) * G + gx(pts[i].x)].push_back(int(i));

    // polygon enclosing the disk, used to bound cell extent
    std::vector<Vec2> ring;
    const int K = 64;
    double Rc = R / std::cos(pi / K) * (1 + 1e-9);
    for (int k = 0; k < K; ++k) ring.push_back({Rc * std::cos(2 * pi * k / K), Rc * std::sin(2 * pi * k / K)});

    std::vector<Vec2> poly, scratch, bounded;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 g = pts[i];
        poly = ring;
        int cx0 = gx(g.x), cy0 = gx(g.y);
        for (int r = 0;; ++r) {
            bool any = false;
            for (int yy = cy0 - r; yy <= cy0 + r; ++yy) {
                if (yy < 0 || yy >= G) continue;
                for (int xx = cx0 - r; xx <= cx0 + r; ++xx) {
                    if (xx < 0 || xx >= G) continue;
                    if (std::max(std::abs(xx - cx0), std::abs(yy - cy0)) != r) continue;
                    any = true;
                    for (int j : grid[std::size_t(yy) * G + xx]) {
                        if (std::size_t(j) == i) continue;
                        Vec2 q = pts[j];
                        Vec2 nrm = q - g;
                        double c = dot(nrm, 0.5 * (q + g));
                        detail::clip_halfplane(poly, nrm, c, scratch);
                    }
                }
            }
            double dmax = 0;
            for (Vec2 v : poly) dmax = std::max(dmax, norm(v - g));
            if (2 * dmax <= r * h || (!any && r > G)) break;
        }
        ConvexCell cell = detail::clip_to_disk(poly, R);
        cell.generator = g;
        detail::merge_close_vertices(cell);
        try {
            cell.metrics = cell_metrics(cell);
        } catch (const ContractError&) {
            cell.degenerate = true;
        }
        if (cell.degenerate) ++cx.n_degenerate;
        cx.cells.push_back(std::move(cell));
    }
    return cx;
}

/// Cells not influenced by the window: for Voronoi cells every vertex v
/// satisfies |v| + |v - g| <= R.
inline bool window_exact(const CellComplex& cx, const ConvexCell& c) {
    if (c.boundary || c.full_window) return false;
    if (cx.source == CellSource::voronoi && c.generator) {
        for (Vec2 v : c.vertices)
            if (norm(v) + norm(v - *c.generator) > cx.window_radius) return false;
    }
    return true;
}

struct InteriorStats {
    std::size_t selected = 0;
    std::size_t excluded_degenerate = 0;
    std::size_t excluded_window = 0;
};

/// Minus-sampled cells: bottom vertex within R - m of the centre, cell not
/// touching the window and not degenerate.
inline std::vector<ConvexCell> interior_cells(const CellComplex& cx, double margin, InteriorStats* stats = nullptr) {
    if (!(margin >= 0)) throw DomainError("margin must be >= 0");
    std::vector<ConvexCell> out;
    InteriorStats st;
    if (margin >= cx.window_radius) {
        std::clog << "warning: margin " << margin << " leaves no interior region\n";
        if (stats) *stats = st;
        return out;
    }
    double lim = cx.window_radius - margin;
    for (const ConvexCell& c : cx.cells) {
        if (c.full_window || norm(c.metrics.bottom_vertex) > lim) continue;
        if (c.degenerate || c.metrics.bottom_tie) {
            ++st.excluded_degenerate;
            continue;
        }
        if (!window_exact(cx, c)) {
            ++st.excluded_window;
            continue;
        }
        out.push_back(c);
    }
    st.selected = out.size();
    if (stats) *stats = st;
    return out;
}

/// Cells cut by the horizontal line y = y0 whose chord starts (left end) in
/// [x_lo, x_hi]. The chord on the line of each cell is returned alongside.
struct SecantHit {
    ConvexCell cell;
    double x_left = 0;
    double x_right = 0;
};

inline std::vector<SecantHit> secant_cells(const CellComplex& cx, double y0, double x_lo, double x_hi) {
    std::vector<SecantHit> out;
    for (const ConvexCell& c : cx.cells) {
        if (c.full_window || c.vertices.empty()) continue;
        double lo = 1e300, hi = -1e300;
        for (Vec2 v : c.vertices) {
            lo = std::min(lo, v.y);
            hi = std::max(hi, v.y);
        }
        if (!(lo < y0 && y0 < hi)) continue;
        double xl = 1e300, xr = -1e300;
        std::size_t m = c.vertices.size();
        for (std::size_t i = 0; i < m; ++i) {
            Vec2 a = c.vertices[i], b = c.vertices[(i + 1) % m];
            if ((a.y - y0) * (b.y - y0) > 0 || a.y == b.y) continue;
            double x = a.x + (y0 - a.y) / (b.y - a.y) * (b.x - a.x);
            xl = std::min(xl, x);
            xr = std::max(xr, x);
        }
        if (!(xl >= x_lo && xl < x_hi)) continue;
        if (c.degenerate || c.metrics.bottom_tie || !window_exact(cx, c)) continue;
        out.push_back({c, xl, xr});
    }
    return out;
}

} // namespace secant
