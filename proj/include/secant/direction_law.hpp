#pragma once

#include "errors.hpp"
#include "rng.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace secant {

inline constexpr double pi = std::numbers::pi;

/// Angles closer than this to 0 or pi are clamped before evaluating rates.
inline constexpr double angle_guard = 1e-9;

inline constexpr double quad_tolerance = 1e-10;

/// Adaptive Gauss-Kronrod integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    double l1 = 0.0;
    const double w = b - a;
    auto g = [&](double u) { return w * f(a + w * u); };
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 20, 1e-13, &err, &l1);
    if (!std::isfinite(v) || err > quad_tolerance * std::max(1.0, std::abs(v)))
        throw NumericalError("quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    return v;
}

/// Directional intensity F of a stationary line process, defined on [0, pi).
///
/// Either isotropic (F = lambda) or tabulated (piecewise linear through
/// nodes, constant beyond the outermost nodes).
class DirectionLaw {
public:
    static DirectionLaw isotropic(double lambda) {
        if (!(lambda >= 0) || !std::isfinite(lambda)) throw DomainError("intensity must be finite and >= 0");
        DirectionLaw d;
        d.iso_ = true;
        d.lambda_ = lambda;
        d.fmax_ = lambda;
        return d;
    }

    static DirectionLaw tabulated(std::vector<double> phi, std::vector<double> f) {
        if (phi.size() != f.size() || phi.size() < 2) throw ContractError("tabulated law needs >= 2 matching nodes");
        for (std::size_t i = 0; i < phi.size(); ++i) {
            if (!(phi[i] > 0 && phi[i] < pi)) throw DomainError("tabulated node outside (0, pi)");
            if (i && !(phi[i] > phi[i - 1])) throw ContractError("tabulated nodes must increase strictly");
            if (!(f[i] >= 0) || !std::isfinite(f[i])) throw DomainError("tabulated value must be finite and >= 0");
        }
        DirectionLaw d;
        d.iso_ = false;
        d.phi_ = std::move(phi);
        d.f_ = std::move(f);
        d.fmax_ = *std::max_element(d.f_.begin(), d.f_.end());
        return d;
    }

    /// Two-column CSV "phi,F" with optional header line.
    static DirectionLaw from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ContractError("cannot open law table " + path);
        std::vector<double> phi, f;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ss(line);
            double a, b;
            if (!(ss >> a >> b)) {
                if (phi.empty() && lineno == 1) continue;
                throw ContractError(path + ":" + std::to_string(lineno) + ": expected two numbers");
            }
            phi.push_back(a);
            f.push_back(b);
        }
        return tabulated(std::move(phi), std::move(f));
    }

    bool is_isotropic() const { return iso_; }
    double intensity() const { return lambda_; }
    const std::vector<double>& nodes() const { return phi_; }
    const std::vector<double>& values() const { return f_; }
    double max_density() const { return fmax_; }
    bool is_zero() const { return fmax_ == 0.0; }

    double operator()(double phi) const {
        if (iso_) return lambda_;
        if (phi <= phi_.front()) return f_.front();
        if (phi >= phi_.back()) return f_.back();
        auto it = std::upper_bound(phi_.begin(), phi_.end(), phi);
        std::size_t k = std::size_t(it - phi_.begin());
        double w = (phi - phi_[k - 1]) / (phi_[k] - phi_[k - 1]);
        return f_[k - 1] * (1 - w) + f_[k] * w;
    }

    /// The law phi -> F(pi - phi).
    DirectionLaw reflected() const {
        if (iso_) return *this;
        std::vector<double> p(phi_.size()), v(f_.size());
        for (std::size_t i = 0; i < phi_.size(); ++i) {
            p[i] = pi - phi_[phi_.size() - 1 - i];
            v[i] = f_[f_.size() - 1 - i];
        }
        return tabulated(std::move(p), std::move(v));
    }

    /// Integral of g over [a, b] split at the table nodes.
    template <class G>
    double integrate_piecewise(G&& g, double a, double b) const {
        if (!(b > a)) return 0.0;
        if (iso_) return integrate(g, a, b);
        double s = 0.0;
        double lo = a;
        for (double x : phi_) {
            if (x <= lo) continue;
            if (x >= b) break;
            s += segment(g, lo, x);
            lo = x;
        }
        return s + segment(g, lo, b);
    }

    /// Integral of F over [0, pi).
    double total_mass() const {
        if (iso_) return lambda_ * pi;
        return integrate_piecewise([this](double x) { return (*this)(x); }, 0.0, pi);
    }

private:
    template <class G>
    static double segment(G& g, double a, double b) {
        if (!(b > a)) return 0.0;
        double v = boost::math::quadrature::gauss<double, 20>::integrate(g, a, b);
        if (!std::isfinite(v)) throw NumericalError("non-finite integrand on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
        return v;
    }

    bool iso_ = true;
    double lambda_ = 0.0;
    double fmax_ = 0.0;
    std::vector<double> phi_, f_;
};

inline double clamp_angle(double a) {
    return std::clamp(a, angle_guard, pi - angle_guard);
}

inline void require_open_angle(double a, const char* what) {
    if (!(a > 0 && a < pi)) throw DomainError(std::string(what) + " must lie in (0, pi)");
}

/// Jump rate of the right end at state angle alpha.
inline double g1(const DirectionLaw& law, double alpha) {
    require_open_angle(alpha, "alpha");
    alpha = clamp_angle(alpha);
    if (law.is_isotropic()) return law.intensity() / std::tan(alpha / 2);
    double s = std::sin(alpha);
    return law.integrate_piecewise([&](double phi) { return law(phi) * std::sin(phi - alpha) / s; }, alpha, pi);
}

/// Jump rate of the left end; the kernel sees F(pi - phi).
inline double g2(const DirectionLaw& law, double alpha) {
    require_open_angle(alpha, "alpha");
    alpha = clamp_angle(alpha);
    if (law.is_isotropic()) return law.intensity() / std::tan(alpha / 2);
    double s = std::sin(alpha);
    return law.integrate_piecewise([&](double psi) { return law(psi) * std::sin(psi + alpha) / s; }, 0.0, pi - alpha);
}

/// Crossing rate of the lines with a horizontal line, per unit length.
inline double crossing_rate(const DirectionLaw& law) {
    if (law.is_isotropic()) return 2 * law.intensity();
    return law.integrate_piecewise([&](double phi) { return law(phi) * std::sin(phi); }, 0.0, pi);
}

/// Inverse transform of the isotropic jump kernel: alpha' has density
/// proportional to sin(alpha' - alpha) on (alpha, pi).
inline double isotropic_jump(double alpha, double u) {
    double c = 2 * std::cos(alpha / 2) * std::cos(alpha / 2);
    return alpha + std::acos(std::clamp(1 - u * c, -1.0, 1.0));
}

/// Jump of the right end from alpha driven by a single uniform u.
/// Tabulated laws invert the kernel CDF numerically.
inline double sample_jump_angle(const DirectionLaw& law, double alpha, double u) {
    require_open_angle(alpha, "alpha");
    if (!(u >= 0 && u <= 1)) throw DomainError("u must lie in [0, 1]");
    if (law.is_zero()) throw DegenerateLawError("jump kernel of a zero-intensity law");
    if (law.is_isotropic()) return isotropic_jump(alpha, u);
    double s = std::sin(alpha);
    auto k = [&](double phi) { return law(phi) * std::sin(phi - alpha) / s; };
    double total = law.integrate_piecewise(k, alpha, pi);
    if (total <= 0) throw DegenerateLawError("jump kernel vanishes above alpha");
    double lo = alpha, hi = pi;
    for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
        double mid = 0.5 * (lo + hi);
        if (law.integrate_piecewise(k, alpha, mid) < u * total) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Jump of the right end from alpha; tabulated laws use rejection against
/// the isotropic kernel.
inline double sample_jump_angle(const DirectionLaw& law, double alpha, Engine& eng) {
    if (law.is_zero()) throw DegenerateLawError("jump kernel of a zero-intensity law");
    if (law.is_isotropic()) return isotropic_jump(alpha, uniform01(eng));
    for (int it = 0; it < 1000000; ++it) {
        double a = isotropic_jump(alpha, uniform01(eng));
        if (uniform01(eng) * law.max_density() < law(a)) return a;
    }
    throw NumericalError("rejection sampler for jump angle did not accept");
}

/// Inclination of a line drawn from the process: density proportional to F.
inline double sample_inclination(const DirectionLaw& law, Engine& eng) {
    if (law.is_zero()) throw DegenerateLawError("inclination of a zero-intensity law");
    if (law.is_isotropic()) return pi * uniform01(eng);
    for (int it = 0; it < 1000000; ++it) {
        double a = pi * uniform01(eng);
        if (uniform01(eng) * law.max_density() < law(a)) return a;
    }
    throw NumericalError("rejection sampler for inclination did not accept");
}

/// Inclination of a line crossing a horizontal line: density F(theta) sin(theta) / C.
inline double sample_trace_angle(const DirectionLaw& law, Engine& eng) {
    if (law.is_zero()) throw DegenerateLawError("trace angle of a zero-intensity law");
    for (int it = 0; it < 1000000; ++it) {
        double a = std::acos(1 - 2 * uniform01(eng));
        if (law.is_isotropic() || uniform01(eng) * law.max_density() < law(a)) return a;
    }
    throw NumericalError("rejection sampler for trace angle did not accept");
}

} // namespace secant
