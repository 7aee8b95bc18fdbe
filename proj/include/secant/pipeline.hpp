#pragma once

#include "line_process.hpp"
#include "plane_distributions.hpp"
#include "rng.hpp"
#include "section_sweep.hpp"
#include "tessellation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace secant {

/// f(0) .. f(n - 1) on up to `jobs` threads; results in index order. The
/// first exception thrown by any task is rethrown after all workers stop.
template <class F>
auto parallel_map(std::size_t n, unsigned jobs, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<R> out(n);
    jobs = std::max(1u, std::min<unsigned>(jobs, unsigned(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr err;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                out[i] = f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

inline CellComplex line_tessellation(const DirectionLaw& law, const Window& w, std::uint64_t seed) {
    return build_arrangement(sample_lines(law, w, seed), w);
}

inline CellComplex voronoi_tessellation(double rho, const Window& w, std::uint64_t seed) {
    return build_voronoi(sample_points(rho, w, seed), w);
}

/// Sweep samples of the interior cells; cells whose sweep is degenerate
/// (a horizontal edge) are dropped and counted.
struct InteriorSweep {
    std::vector<ConvexCell> cells;
    std::vector<PolygonSample> samples;
    std::size_t dropped = 0;
};

inline InteriorSweep sweep_interior(const CellComplex& cx, double margin, bool keep_cells = false) {
    InteriorSweep out;
    for (ConvexCell& c : interior_cells(cx, margin)) {
        PolygonSample s = sweep_cell(c);
        if (s.degenerate) {
            ++out.dropped;
            continue;
        }
        out.samples.push_back(std::move(s));
        if (keep_cells) out.cells.push_back(std::move(c));
    }
    return out;
}

/// Cells cut by the horizontal lines y = k * spacing with |y| <= R - margin.
/// Chords are taken only where their left end lies inside the inner disk.
inline std::vector<CellRecord> secant_records(const CellComplex& cx, double margin, double spacing) {
    std::vector<CellRecord> out;
    double inner = cx.window_radius - margin;
    if (!(inner > 0)) return out;
    int kmax = int(std::floor(inner / spacing));
    for (int k = -kmax; k <= kmax; ++k) {
        double y0 = k * spacing;
        double half = std::sqrt(std::max(0.0, inner * inner - y0 * y0));
        for (const SecantHit& h : secant_cells(cx, y0, -half, half)) {
            if (!h.cell.arc.empty()) continue;
            PolygonSample s = sweep_cell(h.cell);
            if (s.degenerate) continue;
            out.push_back({s.area, s.perimeter, s.height, s.n_sides, 1.0});
        }
    }
    return out;
}

/// Exposure and jump counts of the right chord end, per angle bin, read off
/// swept cell trajectories.
struct HazardTally {
    std::vector<double> edges;
    std::vector<double> exposure;
    std::vector<double> jumps;
    std::vector<double> g1_exposure;
};

inline HazardTally make_hazard_tally(std::vector<double> centers, double half_width) {
    HazardTally h;
    for (double c : centers) {
        h.edges.push_back(c - half_width);
        h.edges.push_back(c + half_width);
    }
    h.exposure.assign(centers.size(), 0.0);
    h.jumps.assign(centers.size(), 0.0);
    h.g1_exposure.assign(centers.size(), 0.0);
    return h;
}

inline void tally_hazard(HazardTally& h, const DirectionLaw& law, const PolygonSample& s) {
    const auto& tr = s.trajectory;
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
        double a = tr[i].alpha1, dt = tr[i + 1].t - tr[i].t;
        // the right side ends at the top vertex; the last leg has no jump
        bool last = tr[i + 1].l == 0.0;
        bool jumped = !last && tr[i + 1].alpha1 != a;
        for (std::size_t b = 0; b < h.exposure.size(); ++b) {
            if (a < h.edges[2 * b] || a >= h.edges[2 * b + 1]) continue;
            h.exposure[b] += dt;
            h.g1_exposure[b] += dt * g1(law, a);
            if (jumped) h.jumps[b] += 1;
        }
    }
}

} // namespace secant
