#pragma once

#include "direction_law.hpp"
#include "errors.hpp"
#include "section_sweep.hpp"
#include "stats.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <numeric>
#include <cmath>
#include <string>
#include <vector>

namespace secant {

enum class KineticVariant { mass, area, perimeter, joint, area_tan, perimeter_cos };

inline const char* to_string(KineticVariant v) {
    switch (v) {
    case KineticVariant::mass: return "mass";
    case KineticVariant::area: return "area";
    case KineticVariant::perimeter: return "perimeter";
    case KineticVariant::joint: return "joint";
    case KineticVariant::area_tan: return "area_tan";
    default: return "perimeter_cos";
    }
}

struct OccupationSpec {
    std::size_t nodes = 32;
    double l_max = 2.0;
    double t_max = 2.0;
    std::size_t gain_bins = 128;
};

struct ResidualReport {
    KineticVariant variant = KineticVariant::area;
    double residual = 0;
    double smoothing_cells = 0;
    std::size_t valid_nodes = 0;
    std::size_t masked_nodes = 0;
    double samples = 0;
};

/// Occupation measure of the two-end section process on a node grid over
/// (alpha1, alpha2, l, t), tested against tent functions at the nodes.
///
/// Each sample of a trajectory is deposited as the integrals that enter the
/// weak form of the kinetic equation for the moments 1, S, P and S*P of the
/// density: time and l derivatives of the tent, loss, gain and source terms.
class OccupationField {
public:
    static constexpr std::size_t n_weights = 4;
    // per-node fields
    enum : std::size_t {
        f_count = 0,
        f_dt = 1,        // + weight
        f_dl = 5,        // + weight
        f_loss = 9,      // + weight
        f_loss_tan = 13, // + weight
        f_src_l = 17,
        f_src_w = 18,
        f_src_wcos = 19,
        f_src_joint = 20,
        n_fields = 21
    };

    OccupationField(const DirectionLaw& law, OccupationSpec spec = {})
        : law_(law), refl_(law.reflected()), spec_(spec) {
        if (spec.nodes < 8) throw ResolutionError("occupation grid needs at least 8 nodes per axis");
        if (!(spec.l_max > 0 && spec.t_max > 0)) throw ContractError("occupation grid needs positive l and t ranges");
        n_ = spec.nodes;
        da_ = pi / double(n_ - 1);
        dl_ = spec.l_max / double(n_ - 1);
        dtt_ = spec.t_max / double(n_ - 1);
        fields_.assign(n_ * n_ * n_ * n_ * n_fields, 0.0);
        gain_.assign(2 * spec.gain_bins * n_ * n_ * n_ * n_weights, 0.0);
        iso_ = law.is_isotropic();
        kernel_.assign(2 * spec.gain_bins * n_, 0.0);
        for (std::size_t end = 0; end < 2; ++end) {
            const DirectionLaw& l = end == 0 ? law_ : refl_;
            if (l.is_zero()) continue;
            for (std::size_t b = 0; b < spec.gain_bins; ++b)
                for (std::size_t j = 0; j < n_; ++j)
                    kernel_[(end * spec.gain_bins + b) * n_ + j] =
                        tent_kernel(l, j, (double(b) + 0.5) * pi / double(spec.gain_bins));
        }
    }

    std::size_t nodes() const { return n_; }
    double samples() const { return samples_; }
    double trajectories() const { return trajectories_; }

    /// Deposit one state with quadrature weight w.
    void add_sample(const SectionState& s, double w) {
        samples_ += 1;
        Hat ha1 = hat(s.alpha1, da_), ha2 = hat(s.alpha2, da_), hl = hat(s.l, dl_), ht = hat(s.t, dtt_);
        const double c1 = std::cos(s.alpha1) / std::sin(s.alpha1), c2 = std::cos(s.alpha2) / std::sin(s.alpha2);
        const double v = c1 + c2;
        const double ws = 1 / std::sin(s.alpha1) + 1 / std::sin(s.alpha2);
        const double wc = 1 / std::cos(s.alpha1) + 1 / std::cos(s.alpha2);
        const double loss = rate(law_, s.alpha1) + rate(refl_, s.alpha2);
        const double loss_tan = tan_rate(s.alpha1) + tan_rate(s.alpha2);
        const std::array<double, n_weights> om{1.0, s.S, s.P, s.S * s.P};
        for (int i1 = 0; i1 < 2; ++i1) {
            if (!ha1.ok[i1]) continue;
            for (int i2 = 0; i2 < 2; ++i2) {
                if (!ha2.ok[i2]) continue;
                double pa = ha1.w[i1] * ha2.w[i2];
                for (int il = 0; il < 2; ++il) {
                    if (!hl.ok[il]) continue;
                    for (int it = 0; it < 2; ++it) {
                        if (!ht.ok[it]) continue;
                        double phi = pa * hl.w[il] * ht.w[it];
                        double phi_t = pa * hl.w[il] * ht.d[it];
                        double phi_l = pa * hl.d[il] * ht.w[it];
                        double* f = &fields_[node(ha1.i[i1], ha2.i[i2], hl.i[il], ht.i[it]) * n_fields];
                        f[f_count] += phi;
                        for (std::size_t k = 0; k < n_weights; ++k) {
                            double wo = w * om[k];
                            f[f_dt + k] += wo * phi_t;
                            f[f_dl + k] += wo * v * phi_l;
                            f[f_loss + k] += wo * loss * phi;
                            f[f_loss_tan + k] += wo * loss_tan * phi;
                        }
                        f[f_src_l] += w * s.l * phi;
                        f[f_src_w] += w * ws * phi;
                        f[f_src_wcos] += w * wc * phi;
                        f[f_src_joint] += w * (s.l * s.P + ws * s.S) * phi;
                    }
                }
            }
        }
        // gain: bucket the jumping angle, tents in the other three coordinates
        const std::size_t nb = spec_.gain_bins;
        for (int end = 0; end < 2; ++end) {
            double a = end == 0 ? s.alpha1 : s.alpha2;
            const Hat& ho = end == 0 ? ha2 : ha1;
            std::size_t b = std::min(nb - 1, std::size_t(a / pi * double(nb)));
            for (int io = 0; io < 2; ++io) {
                if (!ho.ok[io]) continue;
                for (int il = 0; il < 2; ++il) {
                    if (!hl.ok[il]) continue;
                    for (int it = 0; it < 2; ++it) {
                        if (!ht.ok[it]) continue;
                        double phi = ho.w[io] * hl.w[il] * ht.w[it];
                        double* g = &gain_[gain_index(std::size_t(end), b, ho.i[io], hl.i[il], ht.i[it])];
                        for (std::size_t k = 0; k < n_weights; ++k) g[k] += w * om[k] * phi;
                    }
                }
            }
        }
    }

    /// Deposit a piecewise-drift trajectory: knots are the states at the
    /// start of each drift segment (after jumps); the last knot ends it.
    /// Samples sit at offset*ds + k*ds along t, each with weight ds.
    void add_trajectory(const std::vector<SectionState>& knots, double ds, double offset) {
        if (knots.size() < 2) throw ContractError("trajectory needs at least two knots");
        if (!(ds > 0) || !(offset >= 0 && offset < 1)) throw DomainError("sampling step must be > 0, offset in [0, 1)");
        trajectories_ += 1;
        double t_end = std::min(knots.back().t, spec_.t_max + dtt_);
        std::size_t seg = 0;
        for (double t = knots.front().t + offset * ds; t < t_end; t += ds) {
            while (seg + 2 < knots.size() && knots[seg + 1].t <= t) ++seg;
            SectionState s = knots[seg];
            detail::drift(s, t - knots[seg].t);
            add_sample(s, ds);
        }
    }

    /// Weak-form residual of one kinetic equation, after Gaussian smoothing
    /// of every term field. smoothing_cells <= 0 picks Silverman's rule with
    /// a floor of min_cells.
    ResidualReport residual(KineticVariant variant, double smoothing_cells = 0, double min_cells = 1.0,
                            double min_count = 20) const {
        if (samples_ == 0) throw ContractError("occupation field is empty");
        if ((variant == KineticVariant::area_tan) && !iso_) throw ContractError("tan variant is defined for isotropic laws");
        std::size_t k = 0, src = 0;
        bool use_tan = false;
        switch (variant) {
        case KineticVariant::mass: k = 0; break;
        case KineticVariant::area: k = 1, src = f_src_l; break;
        case KineticVariant::area_tan: k = 1, src = f_src_l, use_tan = true; break;
        case KineticVariant::perimeter: k = 2, src = f_src_w; break;
        case KineticVariant::perimeter_cos: k = 2, src = f_src_wcos; break;
        case KineticVariant::joint: k = 3, src = f_src_joint; break;
        }
        double sigma = smoothing_cells > 0 ? smoothing_cells : std::max(min_cells, silverman_cells());
        auto gains = gain_fields(k);
        std::vector<std::vector<double>> terms;
        terms.push_back(extract(f_count));
        terms.push_back(extract(f_dt + k));
        terms.push_back(extract(f_dl + k));
        terms.push_back(extract((use_tan ? f_loss_tan : f_loss) + k));
        terms.push_back(std::move(gains[0]));
        terms.push_back(std::move(gains[1]));
        terms.push_back(src ? extract(src) : std::vector<double>(n_ * n_ * n_ * n_, 0.0));
        for (auto& f : terms) smooth(f, sigma);
        const std::size_t r = std::size_t(std::ceil(3 * sigma)) + 1;
        ResidualReport rep;
        rep.variant = variant;
        rep.smoothing_cells = sigma;
        rep.samples = samples_;
        double num = 0, den = 0;
        for (std::size_t a1 = 0; a1 < n_; ++a1)
            for (std::size_t a2 = 0; a2 < n_; ++a2)
                for (std::size_t il = r + 1; il + r + 2 <= n_; ++il)
                    for (std::size_t it = r + 1; it + r + 2 <= n_; ++it) {
                        std::size_t q = ((a1 * n_ + a2) * n_ + il) * n_ + it;
                        if (terms[0][q] < min_count) {
                            ++rep.masked_nodes;
                            continue;
                        }
                        double dt = terms[1][q], dl = terms[2][q], lo = terms[3][q];
                        double g = terms[4][q] + terms[5][q], s = terms[6][q];
                        num += std::abs(-dt - dl + lo - g - s);
                        den += std::abs(dt) + std::abs(dl) + std::abs(lo) + std::abs(g) + std::abs(s);
                        ++rep.valid_nodes;
                    }
        if (rep.valid_nodes == 0 || den == 0) throw NumericalError("no valid nodes for the kinetic residual");
        rep.residual = num / den;
        return rep;
    }

private:
    struct Hat {
        std::array<std::size_t, 2> i{};
        std::array<double, 2> w{};
        std::array<double, 2> d{};
        std::array<bool, 2> ok{};
    };

    Hat hat(double x, double h) const {
        Hat r;
        double u = x / h;
        if (u < 0 || u >= double(n_ - 1)) return r;
        std::size_t j = std::size_t(u);
        double f = u - double(j);
        r.i = {j, j + 1};
        r.w = {1 - f, f};
        r.d = {-1 / h, 1 / h};
        r.ok = {true, true};
        return r;
    }

    std::size_t node(std::size_t a1, std::size_t a2, std::size_t l, std::size_t t) const {
        return ((a1 * n_ + a2) * n_ + l) * n_ + t;
    }
    std::size_t gain_index(std::size_t end, std::size_t b, std::size_t o, std::size_t l, std::size_t t) const {
        return ((((end * spec_.gain_bins + b) * n_ + o) * n_ + l) * n_ + t) * n_weights;
    }

    double rate(const DirectionLaw& law, double a) const {
        if (law.is_zero()) return 0;
        return g1(law, clamp_angle(a));
    }
    double tan_rate(double a) const { return iso_ ? law_.intensity() * std::tan(std::min(a, pi - 1e-6) / 2) : 0.0; }

    std::vector<double> extract(std::size_t f) const {
        std::vector<double> out(n_ * n_ * n_ * n_);
        for (std::size_t q = 0; q < out.size(); ++q) out[q] = fields_[q * n_fields + f];
        return out;
    }

    /// Tent integral of the jump kernel: J_j(a) = int F(b) sin(b - a)/sin(a) tent_j(b) db.
    double tent_kernel(const DirectionLaw& law, std::size_t j, double a) const {
        double c = double(j) * da_;
        double lo = std::max(a, c - da_), hi = std::min(pi, c + da_);
        if (!(hi > lo)) return 0;
        double sa = std::sin(a);
        auto f = [&](double b) { return law(b) * std::sin(b - a) / sa * std::max(0.0, 1 - std::abs(b - c) / da_); };
        auto piece = [&](double x0, double x1) {
            if (law.is_isotropic()) return boost::math::quadrature::gauss<double, 20>::integrate(f, x0, x1);
            return law.integrate_piecewise(f, x0, x1);
        };
        if (lo < c && hi > c) return piece(lo, c) + piece(c, hi);
        return piece(lo, hi);
    }

    std::array<std::vector<double>, 2> gain_fields(std::size_t k) const {
        const std::size_t nb = spec_.gain_bins, n3 = n_ * n_ * n_;
        std::array<std::vector<double>, 2> out;
        for (int end = 0; end < 2; ++end) {
            const DirectionLaw& law = end == 0 ? law_ : refl_;
            std::vector<double>& g = out[std::size_t(end)];
            g.assign(n3 * n_, 0.0);
            if (law.is_zero()) continue;
            for (std::size_t b = 0; b < nb; ++b) {
                for (std::size_t j = 0; j < n_; ++j) {
                    double J = kernel_[(std::size_t(end) * nb + b) * n_ + j];
                    if (J == 0) continue;
                    for (std::size_t r = 0; r < n3; ++r) {
                        double m = gain_[gain_index(std::size_t(end), b, 0, 0, 0) + r * n_weights + k];
                        if (m == 0) continue;
                        // r enumerates (other angle, l, t)
                        std::size_t o = r / (n_ * n_), rest = r % (n_ * n_);
                        std::size_t q = end == 0 ? (j * n_ + o) * n_ * n_ + rest : (o * n_ + j) * n_ * n_ + rest;
                        g[q] += J * m;
                    }
                }
            }
        }
        return out;
    }

    double silverman_cells() const {
        double n = std::max(trajectories_, 1.0);
        double f = 1.06 * std::pow(n, -1.0 / 8);
        // spread of the occupation measure per axis, in cells
        std::array<double, 4> s0{}, s1{}, s2{};
        for (std::size_t a1 = 0; a1 < n_; ++a1)
            for (std::size_t a2 = 0; a2 < n_; ++a2)
                for (std::size_t l = 0; l < n_; ++l)
                    for (std::size_t t = 0; t < n_; ++t) {
                        double m = fields_[node(a1, a2, l, t) * n_fields + f_count];
                        std::array<double, 4> x{double(a1), double(a2), double(l), double(t)};
                        for (int d = 0; d < 4; ++d) {
                            s0[d] += m;
                            s1[d] += m * x[d];
                            s2[d] += m * x[d] * x[d];
                        }
                    }
        double h = 1e300;
        for (int d = 0; d < 4; ++d) {
            double mu = s1[d] / s0[d];
            h = std::min(h, f * std::sqrt(std::max(s2[d] / s0[d] - mu * mu, 0.0)));
        }
        return h;
    }

    void smooth(std::vector<double>& f, double sigma) const {
        const long r = long(std::ceil(3 * sigma));
        std::vector<double> ker(std::size_t(2 * r + 1));
        for (long k = -r; k <= r; ++k) ker[std::size_t(k + r)] = std::exp(-0.5 * double(k * k) / (sigma * sigma));
        std::vector<double> line(n_), out(n_);
        const std::array<std::size_t, 4> stride{n_ * n_ * n_, n_ * n_, n_, 1};
        for (int d = 0; d < 4; ++d) {
            std::size_t st = stride[std::size_t(d)];
            for (std::size_t base = 0; base < f.size(); ++base) {
                if ((base / st) % n_ != 0) continue;
                for (std::size_t i = 0; i < n_; ++i) line[i] = f[base + i * st];
                for (std::size_t i = 0; i < n_; ++i) {
                    double s = 0;
                    for (long k = -r; k <= r; ++k) {
                        long j = long(i) + k;
                        if (j < 0 || j >= long(n_)) continue;
                        s += ker[std::size_t(k + r)] * line[std::size_t(j)];
                    }
                    out[i] = s;
                }
                for (std::size_t i = 0; i < n_; ++i) f[base + i * st] = out[i];
            }
        }
    }

    DirectionLaw law_, refl_;
    OccupationSpec spec_;
    std::size_t n_ = 32;
    double da_ = 0, dl_ = 0, dtt_ = 0;
    bool iso_ = true;
    double samples_ = 0;
    double trajectories_ = 0;
    std::vector<double> fields_;
    std::vector<double> gain_;
    std::vector<double> kernel_;
};

/// Occupation field of n polygons from simulate_polygon, each sampled at a
/// random offset with step ds.
inline OccupationField polygon_occupation(const DirectionLaw& law, std::size_t n, std::uint64_t seed, double ds = 0.05,
                                          OccupationSpec spec = {}) {
    OccupationField f(law, spec);
    SimOptions opt;
    opt.record = true;
    for (std::size_t k = 0; k < n; ++k) {
        SimResult r = simulate_polygon(law, replica_seed(seed, k), opt);
        Engine e = make_engine(replica_seed(seed ^ 0x9e3779b97f4a7c15ULL, k));
        f.add_trajectory(r.sample.trajectory, ds, uniform01(e));
    }
    return f;
}

/// State of a freshly born section at height delta, with its birth angles.
struct BirthSnapshot {
    double alpha1 = 0;
    double alpha2 = 0;
    SectionState state;
};

struct BoundaryReport {
    double delta = 0;
    std::size_t births = 0;
    /// mean over births of the per-cell relative error
    double rel_l = 0;
    double rel_S = 0;
    double rel_P = 0;
    /// sum of errors over sum of magnitudes
    double pooled_l = 0;
    double pooled_S = 0;
    double pooled_P = 0;
    /// fraction of births whose state left the straight start before delta
    double jumped = 0;
    Chi2Result product_law;
    Chi2Result vertex_law;
};

/// Relative mismatch of l, S, P at height delta against
/// l = delta v, S = delta^2 v / 2, P = delta w.
inline BoundaryReport boundary_constraints(const std::vector<BirthSnapshot>& s, double delta) {
    if (!(delta > 0)) throw DomainError("delta must be > 0");
    if (s.empty()) throw ContractError("no births to check");
    double el = 0, nl = 0, eS = 0, nS = 0, eP = 0, nP = 0, ml = 0, mS = 0, mP = 0, moved = 0;
    for (const BirthSnapshot& b : s) {
        double v = 1 / std::tan(b.alpha1) + 1 / std::tan(b.alpha2);
        double w = 1 / std::sin(b.alpha1) + 1 / std::sin(b.alpha2);
        double dl = std::abs(b.state.l - delta * v), dS = std::abs(b.state.S - 0.5 * delta * delta * v),
               dP = std::abs(b.state.P - delta * w);
        el += dl;
        nl += std::abs(delta * v);
        eS += dS;
        nS += std::abs(0.5 * delta * delta * v);
        eP += dP;
        nP += std::abs(delta * w);
        ml += dl / std::abs(delta * v);
        mS += dS / std::abs(0.5 * delta * delta * v);
        mP += dP / std::abs(delta * w);
        if (b.state.alpha1 != b.alpha1 || b.state.alpha2 != b.alpha2) moved += 1;
    }
    double n = double(s.size());
    BoundaryReport r;
    r.delta = delta;
    r.births = s.size();
    r.rel_l = ml / n;
    r.rel_S = mS / n;
    r.rel_P = mP / n;
    r.pooled_l = el / nl;
    r.pooled_S = eS / nS;
    r.pooled_P = eP / nP;
    r.jumped = moved / n;
    return r;
}

/// Probabilities of a uniform bins x bins grid over [0, pi]^2 under a
/// density on the simplex a1 + a2 < pi (normalized numerically).
template <class D>
std::vector<double> simplex_bin_probs(D&& density, std::size_t bins) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    double h = pi / double(bins);
    std::vector<double> p(bins * bins, 0.0);
    for (std::size_t i = 0; i < bins; ++i)
        for (std::size_t j = 0; i + j < bins; ++j) {
            double x0 = double(i) * h, y0 = double(j) * h;
            bool diag = i + j + 1 == bins;
            p[i * bins + j] = GL::integrate(
                [&](double x) {
                    double y1 = diag ? pi - x : y0 + h;
                    return GL::integrate([&](double y) { return density(x, y); }, y0, y1);
                },
                x0, x0 + h);
        }
    double tot = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= tot;
    return p;
}

/// Birth-time check: simulate n cells, keep the state at height delta for
/// those still open, and test the birth angles against the product law
/// F(a1) sin a1 F(pi - a2) sin a2 and against the vertex law
/// F(a1) F(pi - a2) sin(a1 + a2).
inline BoundaryReport check_boundary(const DirectionLaw& law, std::size_t n, double delta, std::uint64_t seed,
                                     std::size_t bins = 16, BirthLaw birth = BirthLaw::vertex) {
    if (law.is_zero()) throw DegenerateLawError("zero-intensity law has no cell births");
    if (n < 1000) throw ContractError("check_boundary needs at least 1000 births");
    if (!(delta > 0 && delta * crossing_rate(law) < 0.1)) throw DomainError("delta must be small against 1/C");
    SimOptions opt;
    opt.snapshot_at = delta;
    opt.birth = birth;
    std::vector<BirthSnapshot> snaps;
    std::vector<double> obs(bins * bins, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        SimResult r = simulate_polygon(law, replica_seed(seed, k), opt);
        double a1 = r.sample.alpha1_birth, a2 = r.sample.alpha2_birth;
        std::size_t i = std::min(bins - 1, std::size_t(a1 / pi * double(bins)));
        std::size_t j = std::min(bins - 1, std::size_t(a2 / pi * double(bins)));
        obs[i * bins + j] += 1;
        if (r.has_snapshot) snaps.push_back({a1, a2, r.snapshot});
    }
    BoundaryReport rep = boundary_constraints(snaps, delta);
    DirectionLaw refl = law.reflected();
    auto product = [&](double a, double b) { return law(a) * std::sin(a) * refl(b) * std::sin(b); };
    auto vertex = [&](double a, double b) { return law(a) * refl(b) * std::sin(a + b); };
    rep.product_law = chi2_test(obs, simplex_bin_probs(product, bins));
    rep.vertex_law = chi2_test(obs, simplex_bin_probs(vertex, bins));
    rep.births = n;
    return rep;
}

} // namespace secant
