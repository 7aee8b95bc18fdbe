#pragma once

#include "errors.hpp"
#include "rng.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace secant {

/// One variable of a sample set, optionally weighted.
struct SampleSet {
    std::string name;
    std::string unit;
    std::vector<double> values;
    std::vector<double> weights; // empty means unit weights

    double total_weight() const {
        return weights.empty() ? double(values.size()) : std::accumulate(weights.begin(), weights.end(), 0.0);
    }
    /// Kish effective sample size.
    double effective_size() const {
        if (weights.empty()) return double(values.size());
        double s = 0, s2 = 0;
        for (double w : weights) {
            s += w;
            s2 += w * w;
        }
        return s2 > 0 ? s * s / s2 : 0.0;
    }
};

namespace detail {

inline std::vector<std::pair<double, double>> sorted_weighted(const std::vector<double>& v, const std::vector<double>& w) {
    std::vector<std::pair<double, double>> out(v.size());
    double tot = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double wi = w.empty() ? 1.0 : w[i];
        out[i] = {v[i], wi};
        tot += wi;
    }
    std::sort(out.begin(), out.end());
    for (auto& p : out) p.second /= tot;
    return out;
}

} // namespace detail

/// Sup distance between the empirical CDFs of two weighted samples.
inline double ks_distance(const std::vector<double>& a, const std::vector<double>& b,
                          const std::vector<double>& wa = {}, const std::vector<double>& wb = {}) {
    if (a.empty() || b.empty()) throw ContractError("ks_distance needs non-empty samples");
    if ((!wa.empty() && wa.size() != a.size()) || (!wb.empty() && wb.size() != b.size()))
        throw ContractError("weights do not match samples");
    auto sa = detail::sorted_weighted(a, wa), sb = detail::sorted_weighted(b, wb);
    double fa = 0, fb = 0, d = 0;
    std::size_t i = 0, j = 0;
    while (i < sa.size() || j < sb.size()) {
        double x = (j >= sb.size() || (i < sa.size() && sa[i].first <= sb[j].first)) ? sa[i].first : sb[j].first;
        while (i < sa.size() && sa[i].first == x) fa += sa[i++].second;
        while (j < sb.size() && sb[j].first == x) fb += sb[j++].second;
        d = std::max(d, std::abs(fa - fb));
    }
    return std::min(d, 1.0);
}

inline double ks_distance(const SampleSet& a, const SampleSet& b) {
    if (a.unit != b.unit) throw ContractError("unit mismatch: " + a.unit + " vs " + b.unit);
    return ks_distance(a.values, b.values, a.weights, b.weights);
}

/// Sup distance between an empirical CDF and a continuous model CDF.
inline double ks_distance(const std::vector<double>& a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw ContractError("ks_distance needs a non-empty sample");
    std::vector<double> s = a;
    std::sort(s.begin(), s.end());
    double n = double(s.size()), d = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double f = cdf(s[i]);
        d = std::max({d, std::abs(f - double(i) / n), std::abs(double(i + 1) / n - f)});
    }
    return d;
}

/// Asymptotic Kolmogorov tail probability for distance d at effective size n.
inline double ks_pvalue(double d, double n) {
    double sn = std::sqrt(n);
    double lam = (sn + 0.12 + 0.11 / sn) * d;
    if (lam < 1e-3) return 1.0;
    double s = 0;
    for (int k = 1; k <= 100; ++k) {
        double term = 2 * ((k % 2) ? 1 : -1) * std::exp(-2.0 * k * k * lam * lam);
        s += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double ks_effective_n(double n1, double n2) { return n1 * n2 / (n1 + n2); }

/// Two-sample KS critical value at the 1% level.
inline double ks_critical_1pct(double n1, double n2) { return 1.628 * std::sqrt((n1 + n2) / (n1 * n2)); }

struct Chi2Result {
    double statistic = 0;
    int dof = 0;
    double p_value = 1;
    std::size_t merged_bins = 0;
};

/// Pearson chi-square of counts against model probabilities. Adjacent bins
/// are pooled until every expected count is at least min_expected.
inline Chi2Result chi2_test(const std::vector<double>& observed, const std::vector<double>& prob,
                            double min_expected = 5.0, int fitted_params = 0) {
    if (observed.size() != prob.size() || observed.empty()) throw ContractError("chi2: size mismatch");
    double n = std::accumulate(observed.begin(), observed.end(), 0.0);
    double ptot = std::accumulate(prob.begin(), prob.end(), 0.0);
    std::vector<double> o, e;
    double co = 0, ce = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        co += observed[i];
        ce += n * prob[i] / ptot;
        if (ce >= min_expected) {
            o.push_back(co);
            e.push_back(ce);
            co = ce = 0;
        }
    }
    if (ce > 0 || co > 0) {
        if (e.empty()) throw ContractError("chi2: too few samples");
        o.back() += co;
        e.back() += ce;
    }
    Chi2Result r;
    for (std::size_t i = 0; i < o.size(); ++i) r.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    r.dof = int(o.size()) - 1 - fitted_params;
    r.merged_bins = observed.size() - o.size();
    if (r.dof < 1) throw ContractError("chi2: no degrees of freedom left");
    r.p_value = boost::math::gamma_q(r.dof / 2.0, r.statistic / 2.0);
    return r;
}

struct Interval {
    double lo = 0;
    double hi = 0;
    bool degenerate = false;
};

/// Percentile bootstrap interval of a statistic.
inline Interval bootstrap_ci(const std::vector<double>& x, const std::function<double(const std::vector<double>&)>& stat,
                             double level, std::uint64_t seed, int resamples = 1000) {
    if (x.size() < 100) throw ContractError("bootstrap needs at least 100 samples");
    if (!(level > 0 && level < 1)) throw DomainError("level must lie in (0, 1)");
    Interval iv;
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
        iv.lo = iv.hi = stat(x);
        iv.degenerate = true;
        return iv;
    }
    Engine eng = make_engine(seed);
    std::vector<double> res(resamples), buf(x.size());
    for (int r = 0; r < resamples; ++r) {
        for (auto& b : buf) b = x[std::size_t(uniform01(eng) * double(x.size()))];
        res[r] = stat(buf);
    }
    std::sort(res.begin(), res.end());
    double a = (1 - level) / 2;
    auto q = [&](double p) {
        double pos = p * (resamples - 1);
        std::size_t k = std::size_t(pos);
        double f = pos - double(k);
        return k + 1 < res.size() ? res[k] * (1 - f) + res[k + 1] * f : res[k];
    };
    iv.lo = q(a);
    iv.hi = q(1 - a);
    return iv;
}

inline double mean(const std::vector<double>& x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

inline double weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
    double s = 0, sw = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * x[i];
        sw += w[i];
    }
    return s / sw;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = mean(x), my = mean(y), sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

struct Axis {
    std::string name;
    std::string unit;
    std::vector<double> edges;

    static Axis uniform(std::string name, std::string unit, double lo, double hi, std::size_t n) {
        if (!(hi > lo) || n == 0) throw ContractError("axis needs hi > lo and n > 0");
        Axis a{std::move(name), std::move(unit), {}};
        for (std::size_t i = 0; i <= n; ++i) a.edges.push_back(lo + (hi - lo) * double(i) / double(n));
        return a;
    }
    std::size_t bins() const { return edges.size() - 1; }
    /// Bin index, or -1 below / bins() above the range.
    long locate(double x) const {
        if (x < edges.front()) return -1;
        if (x >= edges.back()) return long(bins());
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        return long(it - edges.begin()) - 1;
    }
};

enum class Weighting { counts, line_sampled, height_unweighted };

inline const char* to_string(Weighting w) {
    switch (w) {
    case Weighting::line_sampled: return "line-sampled";
    case Weighting::height_unweighted: return "height-unweighted";
    default: return "counts";
    }
}

/// Histogram over one or two axes. Values are bin masses until normalize()
/// turns them into densities. Out-of-range mass is kept separately.
struct Histogram {
    std::vector<Axis> axes;
    std::vector<double> values;
    std::vector<double> ci_lo, ci_hi;
    double outside = 0;
    double sample_size = 0;
    Weighting weighting = Weighting::counts;
    bool normalized = false;

    Histogram() = default;
    explicit Histogram(std::vector<Axis> ax, Weighting w = Weighting::counts) : axes(std::move(ax)), weighting(w) {
        std::size_t n = 1;
        for (auto& a : axes) n *= a.bins();
        values.assign(n, 0.0);
    }

    void add(double x, double w = 1.0) {
        long i = axes.at(0).locate(x);
        sample_size += 1;
        if (i < 0 || i >= long(axes[0].bins())) outside += w;
        else values[std::size_t(i)] += w;
    }
    void add(double x, double y, double w) {
        long i = axes.at(0).locate(x), j = axes.at(1).locate(y);
        sample_size += 1;
        if (i < 0 || j < 0 || i >= long(axes[0].bins()) || j >= long(axes[1].bins())) outside += w;
        else values[std::size_t(i) * axes[1].bins() + std::size_t(j)] += w;
    }
    double bin_volume(std::size_t flat) const {
        if (axes.size() == 1) return axes[0].edges[flat + 1] - axes[0].edges[flat];
        std::size_t nj = axes[1].bins(), i = flat / nj, j = flat % nj;
        return (axes[0].edges[i + 1] - axes[0].edges[i]) * (axes[1].edges[j + 1] - axes[1].edges[j]);
    }
    double total() const { return std::accumulate(values.begin(), values.end(), 0.0) + outside; }
    /// Divide by total mass (including out-of-range) and by bin volume.
    void normalize() {
        double tot = total();
        if (!(tot > 0)) throw NumericalError("cannot normalize an empty histogram");
        for (std::size_t k = 0; k < values.size(); ++k) {
            double s = 1.0 / (tot * bin_volume(k));
            values[k] *= s;
            if (!ci_lo.empty()) ci_lo[k] *= s;
            if (!ci_hi.empty()) ci_hi[k] *= s;
        }
        outside /= tot;
        normalized = true;
    }
    double integral() const {
        double s = 0;
        for (std::size_t k = 0; k < values.size(); ++k) s += values[k] * (normalized ? bin_volume(k) : 1.0);
        return s + outside;
    }
};

/// Sum of absolute differences of bin masses, both histograms scaled to unit
/// total mass (out-of-range mass compared as one extra bin).
inline double l1_distance(const Histogram& a, const Histogram& b) {
    if (a.values.size() != b.values.size()) throw ContractError("l1_distance: shape mismatch");
    double ta = a.total(), tb = b.total(), s = 0;
    for (std::size_t k = 0; k < a.values.size(); ++k) s += std::abs(a.values[k] / ta - b.values[k] / tb);
    return s + std::abs(a.outside / ta - b.outside / tb);
}

struct TestReport {
    std::string name;
    std::string statistic_name;
    double statistic = 0;
    double threshold = 0;
    /// true: pass when statistic <= threshold; false: pass when >= threshold
    bool upper_bound = true;
    std::optional<double> p_value;
    std::vector<double> sample_sizes;
    std::vector<std::uint64_t> seeds;
    std::string note;

    bool pass() const { return upper_bound ? statistic <= threshold : statistic >= threshold; }
};

} // namespace secant
