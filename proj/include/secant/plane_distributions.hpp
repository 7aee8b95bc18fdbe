#pragma once

#include "direction_law.hpp"
#include "line_process.hpp"
#include "section_sweep.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace secant {

/// Cell statistics with a sampling weight. Cells found by a horizontal line
/// carry weight 1 (height-biased); height_unweight turns them typical.
struct CellRecord {
    double area = 0;
    double perimeter = 0;
    double height = 0;
    int n_sides = 0;
    double weight = 1;
};

struct ComposeOptions {
    std::size_t angle_nodes = 32;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
};

/// Angle grid of the chord end directions: midpoint nodes on (0, pi) with
/// weights F(a1) sin(a1) (right end) and F(pi - a2) sin(a2) (left end).
struct EndAngleGrid {
    std::vector<double> nodes;
    std::vector<double> right_weight;
    std::vector<double> left_weight;
};

inline EndAngleGrid end_angle_grid(const DirectionLaw& law, std::size_t n) {
    if (n < 16) throw ResolutionError("angle grid needs at least 16 nodes");
    EndAngleGrid g;
    double h = pi / double(n);
    for (std::size_t k = 0; k < n; ++k) {
        double a = (double(k) + 0.5) * h;
        g.nodes.push_back(a);
        g.right_weight.push_back(law(a) * std::sin(a) * h);
        g.left_weight.push_back(law(pi - a) * std::sin(a) * h);
    }
    return g;
}

/// Cells met by a horizontal line, built from the chord trace law and two
/// independent end processes above and below the chord. Chord length is
/// exponential with rate C; the end angles come from the quadrature grid.
inline std::vector<CellRecord> compose_two_ends(const DirectionLaw& law, const ComposeOptions& opt = {}) {
    if (law.is_zero()) throw DegenerateLawError("zero-intensity law has no chords");
    EndAngleGrid g = end_angle_grid(law, opt.angle_nodes);
    const double C = crossing_rate(law);
    DirectionLaw refl = law.reflected();
    auto cumulative = [](const std::vector<double>& w) {
        std::vector<double> c(w.size());
        std::partial_sum(w.begin(), w.end(), c.begin());
        for (auto& x : c) x /= c.back();
        return c;
    };
    auto cr = cumulative(g.right_weight), cl = cumulative(g.left_weight);
    auto pick = [&](const std::vector<double>& c, Engine& e) {
        return std::size_t(std::lower_bound(c.begin(), c.end(), uniform01(e)) - c.begin());
    };
    std::vector<CellRecord> out;
    out.reserve(opt.samples);
    for (std::size_t k = 0; k < opt.samples; ++k) {
        Engine e0 = make_engine(replica_seed(opt.seed, 5 * k));
        double a1 = g.nodes[pick(cr, e0)];
        double a2 = g.nodes[pick(cl, e0)];
        double l0 = exponential(e0, C);
        Engine e1 = make_engine(replica_seed(opt.seed, 5 * k + 1)), e2 = make_engine(replica_seed(opt.seed, 5 * k + 2));
        Engine e3 = make_engine(replica_seed(opt.seed, 5 * k + 3)), e4 = make_engine(replica_seed(opt.seed, 5 * k + 4));
        // above the chord: right end sees F, left end sees F(pi - .)
        EndProcess ur(law, a1, e1), ul(refl, a2, e2);
        ClosureResult up = close_section(l0, ur, ul);
        // below the chord the picture is mirrored top to bottom
        EndProcess dr(refl, pi - a1, e3), dl(law, pi - a2, e4);
        ClosureResult dn = close_section(l0, dr, dl);
        CellRecord r;
        r.area = up.area + dn.area;
        r.perimeter = up.perimeter + dn.perimeter;
        r.height = up.height + dn.height;
        r.n_sides = 2 + up.jumps + dn.jumps;
        out.push_back(r);
    }
    return out;
}

struct TypicalEstimate {
    SampleSet area;
    SampleSet perimeter;
    SampleSet n_sides;
    /// Normalizing constant: mean of 1/t over the line-sampled cells.
    double Q = 0;
    double Q_se = 0;
    std::size_t excluded = 0;
};

inline constexpr double height_eps = 1e-6;

/// Reweight line-sampled cells by 1/height.
inline TypicalEstimate height_unweight(const std::vector<CellRecord>& cells) {
    TypicalEstimate te;
    te.area = {"area", "length^2", {}, {}};
    te.perimeter = {"perimeter", "length", {}, {}};
    te.n_sides = {"n_sides", "count", {}, {}};
    double s = 0, s2 = 0, sw = 0;
    for (const CellRecord& c : cells) {
        if (!(c.height > height_eps)) {
            ++te.excluded;
            continue;
        }
        double w = c.weight / c.height;
        te.area.values.push_back(c.area);
        te.perimeter.values.push_back(c.perimeter);
        te.n_sides.values.push_back(c.n_sides);
        te.area.weights.push_back(w);
        te.perimeter.weights.push_back(w);
        te.n_sides.weights.push_back(w);
        s += w;
        s2 += w * w / c.weight;
        sw += c.weight;
    }
    if (sw <= 0) throw ContractError("no cells with positive height");
    te.Q = s / sw;
    double var = s2 / sw - te.Q * te.Q;
    te.Q_se = std::sqrt(std::max(var, 0.0) / sw);
    return te;
}

/// Weighted histogram normalized to a density, with percentile bootstrap
/// bands per bin.
inline Histogram density_with_bands(const SampleSet& s, const Axis& axis, std::uint64_t seed, int resamples = 1000,
                                    Weighting tag = Weighting::height_unweighted) {
    auto fill = [&](const std::vector<std::size_t>* idx) {
        Histogram h({axis}, tag);
        std::size_t n = idx ? idx->size() : s.values.size();
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t i = idx ? (*idx)[k] : k;
            h.add(s.values[i], s.weights.empty() ? 1.0 : s.weights[i]);
        }
        h.normalize();
        return h;
    };
    Histogram h = fill(nullptr);
    std::vector<std::vector<double>> reps(h.values.size());
    Engine eng = make_engine(seed);
    std::vector<std::size_t> idx(s.values.size());
    for (int r = 0; r < resamples; ++r) {
        for (auto& i : idx) i = std::size_t(uniform01(eng) * double(s.values.size()));
        Histogram b = fill(&idx);
        for (std::size_t k = 0; k < b.values.size(); ++k) reps[k].push_back(b.values[k]);
    }
    h.ci_lo.resize(h.values.size());
    h.ci_hi.resize(h.values.size());
    for (std::size_t k = 0; k < reps.size(); ++k) {
        auto& v = reps[k];
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        h.ci_lo[k] = v[std::size_t(0.025 * double(v.size() - 1))];
        h.ci_hi[k] = v[std::size_t(0.975 * double(v.size() - 1))];
    }
    h.sample_size = double(s.values.size());
    return h;
}

struct ChordStats {
    std::vector<double> gaps;
    std::vector<double> angles;
    std::vector<double> left_angle_of_gap;
    double rate = 0;
    double rate_se = 0;
    double ks_exponential = 0;
    double ks_pvalue = 0;
    Chi2Result angle_chi2;
    double correlation = 0;
};

/// Chords cut on the horizontal line y = y0 by each line realization.
inline ChordStats chord_stats(const std::vector<std::vector<Line>>& realizations, const Window& w, double y0,
                              const DirectionLaw& law, std::size_t min_chords = 100000, std::size_t angle_bins = 40) {
    ChordStats cs;
    double half = std::sqrt(w.radius * w.radius - y0 * y0);
    double tail = 20 / crossing_rate(law);
    for (const auto& lines : realizations) {
        std::vector<std::pair<double, double>> hits;
        for (const Line& l : lines) {
            double x;
            if (horizontal_crossing(l, y0, x) && std::abs(x) < half) hits.push_back({x, l.phi});
        }
        std::sort(hits.begin(), hits.end());
        // the gap after a crossing is memoryless; crossings too close to the
        // right end of the chord are skipped so no gap is cut short
        for (std::size_t i = 0; i < hits.size(); ++i) {
            cs.angles.push_back(hits[i].second);
            if (i + 1 < hits.size() && hits[i].first < half - tail) {
                cs.gaps.push_back(hits[i + 1].first - hits[i].first);
                cs.left_angle_of_gap.push_back(hits[i].second);
            }
        }
    }
    if (cs.gaps.size() < min_chords) throw ContractError("too few chords: " + std::to_string(cs.gaps.size()));
    double n = double(cs.gaps.size()), sum = std::accumulate(cs.gaps.begin(), cs.gaps.end(), 0.0);
    cs.rate = n / sum;
    cs.rate_se = cs.rate / std::sqrt(n);
    double rate = cs.rate;
    cs.ks_exponential = ks_distance(cs.gaps, [rate](double x) { return 1 - std::exp(-rate * x); });
    cs.ks_pvalue = ks_pvalue(cs.ks_exponential, n);
    const double C = crossing_rate(law);
    std::vector<double> obs(angle_bins, 0.0), prob(angle_bins);
    for (double a : cs.angles) obs[std::min(angle_bins - 1, std::size_t(a / pi * double(angle_bins)))] += 1;
    for (std::size_t k = 0; k < angle_bins; ++k) {
        double lo = pi * double(k) / double(angle_bins), hi = pi * double(k + 1) / double(angle_bins);
        prob[k] = law.integrate_piecewise([&](double a) { return law(a) * std::sin(a) / C; }, lo, hi);
    }
    cs.angle_chi2 = chi2_test(obs, prob);
    cs.correlation = pearson(cs.gaps, cs.left_angle_of_gap);
    return cs;
}

} // namespace secant
