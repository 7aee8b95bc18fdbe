#pragma once

#include "direction_law.hpp"
#include "errors.hpp"
#include "section_sweep.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace secant {

/// Dual variables of S, P, l and t.
struct TransformPoint {
    double s = 0;
    double p = 0;
    double l = 0;
    double t = 1;
};

inline void require_point(const TransformPoint& q) {
    if (!(q.s >= 0 && q.p >= 0 && q.l >= 0 && q.t >= 0)) throw DomainError("transform coordinates must be >= 0");
    if (!(q.t > 0)) throw DomainError("t dual of 0 gives a divergent time integral");
}

/// Transform of the single-end kernel under exponential killing at rate t:
///   E[ int t e^{-t u} e^{-s S(u) - p P(u) - l l(u)} 1{alpha(u) in da} du ].
/// The part that never jumped is the atom at alpha0; the rest is binned.
struct TransformProfile {
    double alpha0 = pi / 4;
    TransformPoint point;
    std::vector<double> edges;
    /// density per unit angle of the jumped part
    std::vector<double> values;
    std::vector<double> se;
    double atom = 0;
    double atom_se = 0;
    std::size_t trajectories = 0;
    /// per-batch copies of values (same units), used for error bars
    std::vector<std::vector<double>> batches;

    double bin_width() const { return edges[1] - edges[0]; }
    double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    double total() const {
        double s = atom;
        for (double v : values) s += v * bin_width();
        return s;
    }
};

/// t + l cot(a) + p / sin(a) + g1(a): the total exponential rate at angle a.
inline double transform_rate(const DirectionLaw& law, double a, const TransformPoint& q) {
    double g = law.is_zero() ? 0.0 : g1(law, a);
    return q.t + q.l / std::tan(a) + q.p / std::sin(a) + g;
}

/// Exact atom of the transform at alpha0 (valid for s = 0).
inline double transform_atom(const DirectionLaw& law, double alpha0, const TransformPoint& q) {
    return q.t / transform_rate(law, alpha0, q);
}

/// T(a) = (p + t sin a + l cos a + g1(a) sin a) / F(a).
inline double build_T(const DirectionLaw& law, double a, const TransformPoint& q) {
    require_open_angle(a, "alpha'");
    double f = law(a);
    if (!(f > 0)) throw NumericalError("singular coefficient: F vanishes at alpha'");
    double g = g1(law, a);
    return (q.p + q.t * std::sin(a) + q.l * std::cos(a) + g * std::sin(a)) / f;
}

enum class OdeSign { minus, plus };

struct OdeCoefficients {
    double alpha0 = 0;
    std::vector<double> alpha;
    std::vector<double> T;
    std::vector<double> G;
    /// weight of the point source at alpha0: atom / sin(alpha0)
    double nu = 0;
    /// fraction of nodes with |T| > 0.05
    double well_posed_fraction = 0;
};

/// Coefficients of Y'' + G Y = nu delta(a - alpha0) on a midpoint grid over
/// (alpha0, pi), with Y = T * profile / sin and G = (T - 1) / T. OdeSign::plus
/// gives G = (T + 1) / T instead.
inline OdeCoefficients assemble_ode(const DirectionLaw& law, double alpha0, const TransformPoint& q, std::size_t n = 256,
                                    OdeSign sign = OdeSign::minus) {
    require_open_angle(alpha0, "alpha0");
    require_point(q);
    if (law.is_zero()) throw DegenerateLawError("zero-intensity law is outside the transform equation's domain");
    OdeCoefficients c;
    c.alpha0 = alpha0;
    double h = (pi - alpha0) / double(n);
    std::size_t good = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = alpha0 + (double(i) + 0.5) * h;
        double T = build_T(law, a, q);
        if (!c.T.empty() && (T > 0) != (c.T.back() > 0)) throw TurningPointError("T changes sign on the angle grid");
        if (std::abs(T) > 0.05) ++good;
        c.alpha.push_back(a);
        c.T.push_back(T);
        c.G.push_back(sign == OdeSign::minus ? (T - 1) / T : (T + 1) / T);
    }
    // the limit at pi is (p - l) / F(pi)
    if ((q.p - q.l) * c.T.back() < 0) throw TurningPointError("T changes sign before pi");
    c.nu = transform_atom(law, alpha0, q) / std::sin(alpha0);
    c.well_posed_fraction = double(good) / double(n);
    return c;
}

/// Monte Carlo transform profiles for several points from one set of
/// single-end trajectories. Each drift segment is integrated exactly (for
/// s = 0) or by Gauss-Legendre panels.
inline std::vector<TransformProfile> mc_transform(const DirectionLaw& law, double alpha0,
                                                  const std::vector<TransformPoint>& points, std::size_t n,
                                                  std::uint64_t seed, std::size_t bins = 2048, std::size_t batches = 32) {
    require_open_angle(alpha0, "alpha0");
    if (points.empty()) throw ContractError("no transform points");
    if (n < batches) throw ContractError("fewer trajectories than batches");
    double tmin = 1e300;
    for (const auto& q : points) {
        require_point(q);
        tmin = std::min(tmin, q.t);
    }
    const double cutoff = 40;
    const double horizon = cutoff / tmin;
    const std::size_t np = points.size();
    std::vector<TransformProfile> out(np);
    double w = (pi - alpha0) / double(bins);
    for (std::size_t k = 0; k < np; ++k) {
        TransformProfile& pr = out[k];
        pr.alpha0 = alpha0;
        pr.point = points[k];
        for (std::size_t i = 0; i <= bins; ++i) pr.edges.push_back(alpha0 + w * double(i));
        pr.batches.assign(batches, std::vector<double>(bins, 0.0));
        pr.values.assign(bins, 0.0);
    }
    std::vector<std::vector<double>> atom_b(np, std::vector<double>(batches, 0.0));
    using GL = boost::math::quadrature::gauss<double, 16>;
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t b = r % batches;
        Engine eng = make_engine(replica_seed(seed, r));
        EndProcess proc(law, alpha0, eng);
        EndState s;
        s.alpha = alpha0;
        bool first = true;
        for (std::size_t ev = 0;; ++ev) {
            if (ev > 100000) throw NumericalError("transform trajectory exceeded its event budget");
            double t_end = std::min(proc.next_jump(), horizon);
            double tau = t_end - s.t;
            double c = std::cos(s.alpha) / std::sin(s.alpha), si = 1 / std::sin(s.alpha);
            bool alive = false;
            for (std::size_t k = 0; k < np; ++k) {
                const TransformPoint& q = points[k];
                double e = q.t * s.t + q.s * s.S + q.p * s.P + q.l * s.l;
                if (e < cutoff) alive = true;
                if (e > cutoff + 10 || tau <= 0) continue;
                double v;
                if (q.s == 0) {
                    double rate = q.t + q.l * c + q.p * si;
                    v = std::abs(rate * tau) < 1e-12 ? tau : -std::expm1(-rate * tau) / rate;
                    v *= std::exp(-e);
                } else {
                    std::size_t panels = std::max<std::size_t>(1, std::size_t(std::ceil(tau / 0.05)));
                    double hp = tau / double(panels);
                    v = 0;
                    for (std::size_t m = 0; m < panels; ++m)
                        v += GL::integrate(
                            [&](double u) {
                                double S = s.S + s.l * u + 0.5 * c * u * u;
                                return std::exp(-(q.t * (s.t + u) + q.s * S + q.p * (s.P + u * si) +
                                                  q.l * (s.l + c * u)));
                            },
                            double(m) * hp, double(m + 1) * hp);
                }
                v *= q.t;
                if (first) atom_b[k][b] += v;
                else {
                    std::size_t i = std::min(bins - 1, std::size_t((s.alpha - alpha0) / w));
                    out[k].batches[b][i] += v;
                }
            }
            if (!alive || t_end >= horizon) break;
            s.S += s.l * tau + 0.5 * c * tau * tau;
            s.l += c * tau;
            s.P += tau * si;
            s.t = t_end;
            s.alpha = proc.jump();
            first = false;
        }
    }
    double per_batch = double(n) / double(batches);
    for (std::size_t k = 0; k < np; ++k) {
        TransformProfile& pr = out[k];
        pr.trajectories = n;
        pr.se.assign(bins, 0.0);
        for (auto& bv : pr.batches)
            for (double& v : bv) v /= per_batch * w;
        for (std::size_t i = 0; i < bins; ++i) {
            double m = 0, m2 = 0;
            for (auto& bv : pr.batches) {
                m += bv[i];
                m2 += bv[i] * bv[i];
            }
            m /= double(batches);
            pr.values[i] = m;
            pr.se[i] = std::sqrt(std::max(m2 / double(batches) - m * m, 0.0) / double(batches - 1));
        }
        double m = 0, m2 = 0;
        for (double a : atom_b[k]) {
            m += a / per_batch;
            m2 += (a / per_batch) * (a / per_batch);
        }
        m /= double(batches);
        pr.atom = m;
        pr.atom_se = std::sqrt(std::max(m2 / double(batches) - m * m, 0.0) / double(batches - 1));
    }
    return out;
}

struct EquationCheck {
    double bandwidth = 0;
    double residual = 0;
    std::size_t nodes = 0;
    std::size_t inconclusive = 0;
};

namespace detail {

// Test functions are bumps (1 - u^2)^4 with u = (a - x) / (3h): smooth
// enough for two derivatives and zero outside |a - x| < 3h.
inline double bump(double a, double x, double h) {
    double u = (a - x) / (3 * h);
    if (std::abs(u) >= 1) return 0;
    double q = 1 - u * u;
    return q * q * q * q;
}

inline double bump_dd(double a, double x, double h) {
    double u = (a - x) / (3 * h);
    if (std::abs(u) >= 1) return 0;
    double q = 1 - u * u;
    return (-8 * q * q * q + 48 * u * u * q * q) / (9 * h * h);
}

/// int_a^pi psi(y) sin(y - a) dy
inline double volterra_test(double a, double x, double h) {
    double lo = std::max(a, x - 3 * h), hi = std::min(pi, x + 3 * h);
    if (!(hi > lo)) return 0;
    return boost::math::quadrature::gauss<double, 30>::integrate(
        [&](double y) { return bump(y, x, h) * std::sin(y - a); }, lo, hi);
}

/// Residual over test nodes given a per-node residual functor returning
/// (residual, term scale) for a bin-value array.
template <class Eval>
EquationCheck tested_residual(const TransformProfile& pr, const std::vector<double>& nodes, double h, Eval&& eval) {
    EquationCheck c;
    c.bandwidth = h;
    double num = 0, den = 0;
    for (double x : nodes) {
        auto [r, scale] = eval(pr.values, x);
        double m = 0, m2 = 0;
        for (const auto& bv : pr.batches) {
            double rb = eval(bv, x).first;
            m += rb;
            m2 += rb * rb;
        }
        double nb = double(pr.batches.size());
        m /= nb;
        double se = std::sqrt(std::max(m2 / nb - m * m, 0.0) / (nb - 1));
        if (scale < 3 * se) {
            ++c.inconclusive;
            continue;
        }
        num += std::abs(r);
        den += scale;
        ++c.nodes;
    }
    c.residual = den > 0 ? num / den : 0;
    return c;
}

inline std::vector<double> test_nodes(const TransformProfile& pr, double h, std::size_t n) {
    double lo = pr.alpha0, hi = pi - 3 * h;
    std::vector<double> x;
    if (!(hi > lo)) return x;
    for (std::size_t k = 0; k < n; ++k) x.push_back(lo + (hi - lo) * (double(k) + 0.5) / double(n));
    return x;
}

} // namespace detail

/// Integral form T n - int n(b) sin(a - b) db = H with n = profile / sin and
/// H = (atom / sin alpha0) sin(a - alpha0), tested against bumps of
/// width h. Residual: sum |R| over sum of term magnitudes.
inline EquationCheck verify_integral_form(const DirectionLaw& law, const TransformProfile& pr, double h,
                                          std::size_t n_nodes = 48) {
    const std::size_t nb = pr.values.size();
    const double w = pr.bin_width();
    std::vector<double> a(nb), T(nb), is(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        a[i] = pr.center(i);
        T[i] = build_T(law, a[i], pr.point);
        is[i] = 1 / std::sin(a[i]);
    }
    double c = transform_atom(law, pr.alpha0, pr.point) / std::sin(pr.alpha0);
    auto nodes = detail::test_nodes(pr, h, n_nodes);
    std::vector<std::vector<double>> V(nodes.size(), std::vector<double>(nb));
    std::vector<double> H(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        for (std::size_t i = 0; i < nb; ++i) V[k][i] = detail::volterra_test(a[i], nodes[k], h);
        H[k] = c * detail::volterra_test(pr.alpha0, nodes[k], h);
    }
    auto eval = [&](const std::vector<double>& vals, double x) {
        std::size_t k = std::size_t(std::find(nodes.begin(), nodes.end(), x) - nodes.begin());
        double A = 0, B = 0;
        for (std::size_t i = 0; i < nb; ++i) {
            double m = vals[i] * w * is[i];
            if (m == 0) continue;
            A += m * T[i] * detail::bump(a[i], x, h);
            B += m * V[k][i];
        }
        return std::pair{A - B - H[k], std::abs(A) + std::abs(B) + std::abs(H[k])};
    };
    return detail::tested_residual(pr, nodes, h, eval);
}

/// Second-order form Y'' + G Y = nu delta(a - alpha0) with Y = T n, tested
/// against bumps of width h (derivatives moved onto the test function).
inline EquationCheck verify_ode(const DirectionLaw& law, const TransformProfile& pr, double h,
                                OdeSign sign = OdeSign::minus, std::size_t n_nodes = 48) {
    const std::size_t nb = pr.values.size();
    const double w = pr.bin_width();
    std::vector<double> a(nb), T(nb), is(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        a[i] = pr.center(i);
        T[i] = build_T(law, a[i], pr.point);
        is[i] = 1 / std::sin(a[i]);
    }
    double nu = transform_atom(law, pr.alpha0, pr.point) / std::sin(pr.alpha0);
    double shift = sign == OdeSign::minus ? -1.0 : 1.0;
    auto nodes = detail::test_nodes(pr, h, n_nodes);
    auto eval = [&](const std::vector<double>& vals, double x) {
        double A = 0, B = 0;
        for (std::size_t i = 0; i < nb; ++i) {
            double m = vals[i] * w * is[i];
            if (m == 0) continue;
            A += m * T[i] * detail::bump_dd(a[i], x, h);
            B += m * (T[i] + shift) * detail::bump(a[i], x, h);
        }
        double N = nu * detail::bump(pr.alpha0, x, h);
        return std::pair{A + B - N, std::abs(A) + std::abs(B) + std::abs(N)};
    };
    return detail::tested_residual(pr, nodes, h, eval);
}

} // namespace secant
