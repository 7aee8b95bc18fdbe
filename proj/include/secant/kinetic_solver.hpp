#pragma once

#include "direction_law.hpp"
#include "errors.hpp"
#include "section_sweep.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace secant {

struct UniformAxis {
    double lo = 0;
    double hi = 1;
    std::size_t n = 0;

    double width() const { return (hi - lo) / double(n); }
    double center(std::size_t i) const { return lo + (double(i) + 0.5) * width(); }
    double edge(std::size_t i) const { return lo + double(i) * width(); }
};

enum class ThirdAxis { none, area, perimeter };

/// Cell masses of the single-end transition kernel started at alpha0.
///
/// The angle axis covers [alpha0, pi]. The l and third axes carry one ghost
/// cell below and one above the range; ghost cells still jump in angle but
/// are not transported. With l.n == 0 the l variable is integrated out.
/// Mass that has not jumped yet is held exactly in `ballistic`.
struct KernelGrid {
    double alpha0 = pi / 4;
    double t = 0;
    UniformAxis alpha;
    UniformAxis l;
    ThirdAxis third = ThirdAxis::none;
    UniformAxis z;
    std::vector<double> mass;
    double ballistic = 1;

    std::size_t nl() const { return l.n ? l.n + 2 : 1; }
    std::size_t nz() const { return third == ThirdAxis::none ? 1 : z.n + 2; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * nl() + j) * nz() + k; }
    double total_mass() const {
        double s = ballistic;
        for (double m : mass) s += m;
        return s;
    }
    double ballistic_l() const { return t / std::tan(alpha0); }
    double ballistic_S() const { return 0.5 * t * t / std::tan(alpha0); }
    double ballistic_P() const { return t / std::sin(alpha0); }
};

struct GridSpec {
    double alpha0 = pi / 4;
    std::size_t n_alpha = 128;
    double l_lo = -2, l_hi = 1;
    std::size_t n_l = 256;
    ThirdAxis third = ThirdAxis::none;
    double z_lo = 0, z_hi = 1;
    std::size_t n_z = 0;
    /// Start with all mass in the first angle cell at l = 0 instead of the
    /// exact ballistic atom.
    bool start_in_cell = false;
};

inline KernelGrid make_grid(const GridSpec& s) {
    require_open_angle(s.alpha0, "alpha0");
    if (s.n_alpha < 8) throw ResolutionError("angle axis needs at least 8 cells");
    KernelGrid g;
    g.alpha0 = s.alpha0;
    g.alpha = {s.alpha0, pi, s.n_alpha};
    if (s.n_l) {
        if (!(s.l_hi > s.l_lo)) throw ContractError("l axis needs l_hi > l_lo");
        g.l = {s.l_lo, s.l_hi, s.n_l};
    }
    g.third = s.third;
    if (s.third != ThirdAxis::none) {
        if (!(s.z_hi > s.z_lo) || s.n_z == 0) throw ContractError("third axis needs a range and cells");
        g.z = {s.z_lo, s.z_hi, s.n_z};
    }
    g.mass.assign(g.alpha.n * g.nl() * g.nz(), 0.0);
    if (s.start_in_cell) {
        auto slot = [](const UniformAxis& a, std::size_t ext, double x) -> std::size_t {
            if (ext == 1) return 0;
            if (x < a.lo) return 0;
            if (x >= a.hi) return a.n + 1;
            return std::size_t((x - a.lo) / a.width()) + 1;
        };
        g.mass[g.index(0, slot(g.l, g.nl(), 0.0), slot(g.z, g.nz(), 0.0))] = 1;
        g.ballistic = 0;
    }
    return g;
}

/// Per-cell jump data for the angle axis of a grid.
///
/// A jump from angle phi lands in cell i at rate a_i cot(phi) - b_i, where
/// a_i, b_i are the integrals of F sin and F cos over the cell. Jumps that
/// stay inside their own cell are dropped from both gain and loss.
struct JumpTable {
    std::vector<double> center;
    std::vector<double> cot;
    std::vector<double> a, b;
    std::vector<double> loss;
    std::vector<double> from_alpha0; // rate into each cell from the atom
    double g_alpha0 = 0;
};

inline JumpTable make_jump_table(const DirectionLaw& law, const UniformAxis& ax, double alpha0) {
    JumpTable jt;
    std::size_t n = ax.n;
    for (std::size_t i = 0; i < n; ++i) {
        double lo = ax.edge(i), hi = ax.edge(i + 1), c = ax.center(i);
        jt.center.push_back(c);
        jt.cot.push_back(std::cos(c) / std::sin(c));
        if (law.is_isotropic()) {
            double lam = law.intensity();
            jt.a.push_back(lam * (std::cos(lo) - std::cos(hi)));
            jt.b.push_back(lam * (std::sin(hi) - std::sin(lo)));
        } else {
            jt.a.push_back(law.integrate_piecewise([&](double x) { return law(x) * std::sin(x); }, lo, hi));
            jt.b.push_back(law.integrate_piecewise([&](double x) { return law(x) * std::cos(x); }, lo, hi));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t k = i + 1; k < n; ++k) s += jt.a[k] * jt.cot[i] - jt.b[k];
        jt.loss.push_back(std::max(s, 0.0));
    }
    double c0 = std::cos(alpha0) / std::sin(alpha0);
    for (std::size_t i = 0; i < n; ++i) {
        double r = std::max(jt.a[i] * c0 - jt.b[i], 0.0);
        jt.from_alpha0.push_back(r);
        jt.g_alpha0 += r;
    }
    return jt;
}

namespace detail {

/// Shift the masses of one strided row by `shift` cells (any sign) with
/// linear splitting of the fractional part. Indices 0 and n+1 are ghosts.
inline void shift_row(double* row, std::size_t stride, std::size_t n, double shift, std::vector<double>& buf) {
    buf.assign(n + 2, 0.0);
    buf[0] = row[0];
    buf[n + 1] = row[(n + 1) * stride];
    double fl = std::floor(shift);
    long s0 = long(fl);
    double f = shift - fl;
    for (std::size_t j = 1; j <= n; ++j) {
        double m = row[j * stride];
        if (m == 0) continue;
        long t0 = long(j) + s0, t1 = t0 + 1;
        auto put = [&](long t, double w) {
            if (w == 0) return;
            if (t < 1) buf[0] += w;
            else if (t > long(n)) buf[n + 1] += w;
            else buf[std::size_t(t)] += w;
        };
        put(t0, m * (1 - f));
        put(t1, m * f);
    }
    for (std::size_t j = 0; j < n + 2; ++j) row[j * stride] = buf[j];
}

/// Linear split of mass w at coordinate x onto a ghosted axis.
template <class F>
void split_onto(const UniformAxis& a, std::size_t ext, double x, double w, F&& put) {
    if (ext == 1) {
        put(std::size_t(0), w);
        return;
    }
    double u = (x - a.lo) / a.width() - 0.5;
    if (u < -0.5) {
        put(std::size_t(0), w);
        return;
    }
    if (u > double(a.n) - 0.5) {
        put(a.n + 1, w);
        return;
    }
    double fl = std::floor(u);
    double f = u - fl;
    long j0 = long(fl);
    auto clampi = [&](long j) { return std::size_t(std::clamp(j, 0L, long(a.n) - 1)) + 1; };
    put(clampi(j0), w * (1 - f));
    put(clampi(j0 + 1), w * f);
}

} // namespace detail

/// Largest stable step for the jump part (explicit update keeps masses >= 0).
inline double max_stable_dt(const JumpTable& jt) {
    double m = jt.g_alpha0;
    for (double r : jt.loss) m = std::max(m, r);
    return m > 0 ? 1.0 / m : 1e300;
}

/// One step of the transition equation: transport along l and the third
/// axis by shifted linear splitting, then explicit jumps in angle.
inline void step_transition(KernelGrid& g, const JumpTable& jt, double dt) {
    if (!(dt > 0)) throw DomainError("dt must be > 0");
    if (dt > max_stable_dt(jt) * (1 + 1e-12)) throw StabilityError("time step exceeds the jump stability bound");
    const std::size_t na = g.alpha.n, nl = g.nl(), nz = g.nz();
    std::vector<double> buf;
    if (g.l.n) {
        for (std::size_t i = 0; i < na; ++i) {
            double shift = jt.cot[i] * dt / g.l.width();
            for (std::size_t k = 0; k < nz; ++k)
                detail::shift_row(&g.mass[g.index(i, 0, k)], nz, g.l.n, shift, buf);
        }
    }
    if (g.third != ThirdAxis::none) {
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nl; ++j) {
                double v;
                if (g.third == ThirdAxis::perimeter) v = 1 / std::sin(jt.center[i]);
                else {
                    if (!g.l.n || j == 0 || j == nl - 1) continue;
                    v = g.l.center(j - 1);
                }
                detail::shift_row(&g.mass[g.index(i, j, 0)], 1, g.z.n, v * dt / g.z.width(), buf);
            }
    }
    // jumps: gain_i = a_i sum_{j<i} m_j cot_j - b_i sum_{j<i} m_j
    std::vector<double> col(na);
    for (std::size_t j = 0; j < nl; ++j)
        for (std::size_t k = 0; k < nz; ++k) {
            double A = 0, B = 0;
            bool any = false;
            for (std::size_t i = 0; i < na; ++i) {
                double m = g.mass[g.index(i, j, k)];
                col[i] = m;
                any = any || m != 0;
            }
            if (!any) continue;
            for (std::size_t i = 0; i < na; ++i) {
                double gain = jt.a[i] * A - jt.b[i] * B;
                double m = col[i];
                g.mass[g.index(i, j, k)] = m + dt * (std::max(gain, 0.0) - jt.loss[i] * m);
                A += m * jt.cot[i];
                B += m;
            }
        }
    // jumps out of the atom, placed where the atom's mass lands by the end of the step
    if (g.ballistic > 0 && jt.g_alpha0 > 0) {
        double released = g.ballistic * (-std::expm1(-jt.g_alpha0 * dt));
        double tm = g.t + 0.5 * dt;
        double c0 = 1 / std::tan(g.alpha0), s0 = 1 / std::sin(g.alpha0);
        for (std::size_t i = 0; i < na; ++i) {
            double w = released * jt.from_alpha0[i] / jt.g_alpha0;
            if (w == 0) continue;
            double lb = tm * c0 + 0.5 * dt * jt.cot[i];
            double zb = 0;
            if (g.third == ThirdAxis::area) zb = 0.5 * tm * tm * c0 + 0.5 * dt * lb;
            if (g.third == ThirdAxis::perimeter) zb = tm * s0 + 0.5 * dt / std::sin(jt.center[i]);
            detail::split_onto(g.l, nl, lb, w, [&](std::size_t jj, double wl) {
                detail::split_onto(g.z, nz, zb, wl, [&](std::size_t kk, double wz) { g.mass[g.index(i, jj, kk)] += wz; });
            });
        }
        g.ballistic -= released;
    }
    g.t += dt;
}

/// Run a grid forward, stopping exactly at each requested time.
inline std::vector<KernelGrid> solve_kinetic(const DirectionLaw& law, const GridSpec& spec, const std::vector<double>& times,
                                             double dt_max = 2.5e-3) {
    KernelGrid g = make_grid(spec);
    JumpTable jt = make_jump_table(law, g.alpha, g.alpha0);
    double dt_cap = std::min(dt_max, 0.5 * max_stable_dt(jt));
    std::vector<KernelGrid> out;
    for (double T : times) {
        if (T < g.t) throw DomainError("times must be ascending");
        while (g.t < T - 1e-14) {
            double remaining = T - g.t;
            double dt = remaining / std::ceil(remaining / dt_cap - 1e-9);
            step_transition(g, jt, std::min(dt, remaining));
        }
        out.push_back(g);
    }
    return out;
}

/// Volterra integral of nodal values v over phi in [nodes[0], x] against
/// sin(x - phi) / sin(phi), by the trapezoid rule.
inline double volterra_trapezoid(const std::vector<double>& nodes, const std::vector<double>& v, double x) {
    double s = 0;
    for (std::size_t j = 0; j + 1 < nodes.size() && nodes[j] < x; ++j) {
        double a = nodes[j], b = std::min(nodes[j + 1], x);
        double fb = nodes[j + 1] <= x ? v[j + 1] : v[j] + (v[j + 1] - v[j]) * (b - a) / (nodes[j + 1] - a);
        double ka = std::sin(x - a) / std::sin(a), kb = std::sin(x - b) / std::sin(b);
        s += 0.5 * (b - a) * (v[j] * ka + fb * kb);
    }
    return s;
}

/// Kinetic operator of the single-end transition equation applied to the
/// grid's density: cot(a') dN/dl (upwind) + g1(a') N - F(a') * Volterra(N).
/// The atom is not part of the field.
inline std::vector<double> apply_Q1(const KernelGrid& g, const DirectionLaw& law) {
    const std::size_t na = g.alpha.n, nl = g.nl(), nz = g.nz();
    std::size_t above = 0;
    for (std::size_t i = 0; i < na; ++i)
        if (g.alpha.center(i) > g.alpha0) ++above;
    if (above < 8) throw ResolutionError("fewer than 8 angle nodes between alpha0 and pi");
    double vol = g.alpha.width() * (g.l.n ? g.l.width() : 1.0) * (g.third != ThirdAxis::none ? g.z.width() : 1.0);
    std::vector<double> out(g.mass.size(), 0.0);
    std::vector<double> nodes(na), col(na);
    for (std::size_t i = 0; i < na; ++i) nodes[i] = g.alpha.center(i);
    auto rho = [&](std::size_t i, std::size_t j, std::size_t k) { return g.mass[g.index(i, j, k)] / vol; };
    for (std::size_t j = 0; j < nl; ++j)
        for (std::size_t k = 0; k < nz; ++k) {
            for (std::size_t i = 0; i < na; ++i) col[i] = rho(i, j, k);
            for (std::size_t i = 0; i < na; ++i) {
                double a = nodes[i], c = std::cos(a) / std::sin(a);
                double adv = 0;
                if (g.l.n && j >= 1 && j <= g.l.n) {
                    double h = g.l.width();
                    if (c > 0) adv = c * (col[i] - (j > 1 ? rho(i, j - 1, k) : 0.0)) / h;
                    else adv = c * ((j < g.l.n ? rho(i, j + 1, k) : 0.0) - col[i]) / h;
                }
                double gain = law(a) * volterra_trapezoid(nodes, col, a);
                out[g.index(i, j, k)] = adv + g1(law, a) * col[i] - gain;
            }
        }
    return out;
}

/// (angle, l) or (angle, third) marginal, aggregated onto a coarser
/// comparison grid. The ghost cells become one extra bin at each end of the
/// second axis; the atom is placed in its cell.
inline Histogram grid_marginal(const KernelGrid& g, bool use_third, std::size_t na_bins, std::size_t n2_bins) {
    const UniformAxis& ax2 = use_third ? g.z : g.l;
    if (!ax2.n) throw ContractError("marginal axis is not resolved");
    if (g.alpha.n % na_bins || ax2.n % n2_bins) throw ContractError("comparison bins must nest the grid cells");
    std::size_t fa = g.alpha.n / na_bins, f2 = ax2.n / n2_bins;
    double h2 = ax2.width() * double(f2);
    Axis a1 = Axis::uniform("alpha", "rad", g.alpha.lo, g.alpha.hi, na_bins);
    Axis a2 = Axis::uniform(use_third ? (g.third == ThirdAxis::area ? "S" : "P") : "l", "length", ax2.lo - h2,
                            ax2.hi + h2, n2_bins + 2);
    Histogram h({a1, a2});
    const std::size_t nb = n2_bins + 2;
    for (std::size_t i = 0; i < g.alpha.n; ++i)
        for (std::size_t j = 0; j < g.nl(); ++j)
            for (std::size_t k = 0; k < g.nz(); ++k) {
                double m = g.mass[g.index(i, j, k)];
                if (m == 0) continue;
                std::size_t e = use_third ? k : j;
                std::size_t b2 = e == 0 ? 0 : (e == ax2.n + 1 ? nb - 1 : (e - 1) / f2 + 1);
                h.values[(i / fa) * nb + b2] += m;
            }
    if (g.ballistic > 0) {
        double x = use_third ? (g.third == ThirdAxis::area ? g.ballistic_S() : g.ballistic_P()) : g.ballistic_l();
        long b2 = a2.locate(std::clamp(x, a2.edges.front(), std::nextafter(a2.edges.back(), -1e300)));
        h.values[std::size_t(b2)] += g.ballistic;
    }
    h.sample_size = 1;
    return h;
}

/// Histogram of single-end Monte Carlo states on the same bins as
/// grid_marginal (values outside the range go into the end bins).
inline Histogram end_marginal(const std::vector<EndState>& s, const Histogram& like, char var) {
    Histogram h(like.axes);
    const Axis& a2 = h.axes[1];
    double lo = a2.edges.front(), hi = std::nextafter(a2.edges.back(), -1e300);
    for (const EndState& e : s) {
        double x = var == 'l' ? e.l : (var == 'S' ? e.S : e.P);
        double a = std::clamp(e.alpha, h.axes[0].edges.front(), std::nextafter(h.axes[0].edges.back(), 0.0));
        h.add(a, std::clamp(x, lo, hi), 1.0);
    }
    return h;
}

/// Two-end grid over (alpha1, alpha2, l) used to check that the end updates
/// commute. Both ends see the isotropic-form kernel of the given law for the
/// right end and its reflection for the left end.
struct TwoEndGrid {
    UniformAxis alpha;
    UniformAxis l;
    std::vector<double> mass; // [i1][i2][l ghosted]
    std::size_t nl() const { return l.n + 2; }
    std::size_t index(std::size_t i1, std::size_t i2, std::size_t j) const { return (i1 * alpha.n + i2) * nl() + j; }
};

inline TwoEndGrid make_two_end(double alpha0, std::size_t na, double l_lo, double l_hi, std::size_t n_l) {
    TwoEndGrid g;
    g.alpha = {alpha0, pi, na};
    g.l = {l_lo, l_hi, n_l};
    g.mass.assign(na * na * g.nl(), 0.0);
    std::size_t j0 = std::size_t((0 - l_lo) / g.l.width()) + 1;
    g.mass[g.index(0, 0, j0)] = 1;
    return g;
}

/// One step: transport in l with drift cot(a1) + cot(a2), then the two jump
/// updates in the given order.
inline void step_two_end(TwoEndGrid& g, const JumpTable& right, const JumpTable& left, double dt, bool right_first) {
    const std::size_t na = g.alpha.n, nl = g.nl();
    std::vector<double> buf, col(na);
    for (std::size_t i1 = 0; i1 < na; ++i1)
        for (std::size_t i2 = 0; i2 < na; ++i2)
            detail::shift_row(&g.mass[g.index(i1, i2, 0)], 1, g.l.n, (right.cot[i1] + left.cot[i2]) * dt / g.l.width(),
                              buf);
    auto jump = [&](const JumpTable& jt, bool first_axis) {
        for (std::size_t o = 0; o < na; ++o)
            for (std::size_t j = 0; j < nl; ++j) {
                auto at = [&](std::size_t i) -> double& {
                    return first_axis ? g.mass[g.index(i, o, j)] : g.mass[g.index(o, i, j)];
                };
                double A = 0, B = 0;
                for (std::size_t i = 0; i < na; ++i) col[i] = at(i);
                for (std::size_t i = 0; i < na; ++i) {
                    double gain = jt.a[i] * A - jt.b[i] * B;
                    at(i) = col[i] + dt * (std::max(gain, 0.0) - jt.loss[i] * col[i]);
                    A += col[i] * jt.cot[i];
                    B += col[i];
                }
            }
    };
    if (right_first) {
        jump(right, true);
        jump(left, false);
    } else {
        jump(left, false);
        jump(right, true);
    }
}

} // namespace secant
