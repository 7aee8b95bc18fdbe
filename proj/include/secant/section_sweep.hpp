#pragma once

#include "direction_law.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace secant {

/// State of the chord cut from one cell by the moving horizontal line.
/// alpha1 belongs to the right end, alpha2 to the left end.
struct SectionState {
    double t = 0;
    double l = 0;
    double alpha1 = pi / 2;
    double alpha2 = pi / 2;
    double S = 0;
    double P = 0;
};

/// State of a single chord end. l and S are signed relative to the column
/// through the starting point.
struct EndState {
    double alpha = pi / 2;
    double l = 0;
    double S = 0;
    double P = 0;
    double t = 0;
};

enum class EventKind { birth, jump, closure };

struct SectionEvent {
    double t = 0;
    EventKind kind = EventKind::jump;
    int end = 0;
    double old_angle = 0;
    double new_angle = 0;
};

struct PolygonSample {
    double area = 0;
    double perimeter = 0;
    double height = 0;
    int n_sides = 0;
    double alpha1_birth = 0;
    double alpha2_birth = 0;
    bool degenerate = false;
    std::vector<SectionState> trajectory;
    std::vector<SectionEvent> events;
};

namespace detail {

inline double edge_angle(Vec2 a, Vec2 b) {
    return std::atan2(b.y - a.y, b.x - a.x);
}

} // namespace detail

/// Sweep a convex polygon upward from its bottom vertex. The trajectory has
/// one state per vertex height.
inline PolygonSample sweep_cell(const ConvexCell& cell) {
    if (cell.full_window || !cell.arc.empty()) throw ContractError("sweep needs a straight-edged cell");
    const auto& v = cell.vertices;
    const std::size_t n = v.size();
    if (n < 3) throw ContractError("sweep needs at least 3 vertices");
    PolygonSample out;
    std::size_t b = 0, top = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (v[i].y < v[b].y) b = i;
        if (v[i].y > v[top].y) top = i;
    }
    double span = v[top].y - v[b].y;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = v[i], c = v[(i + 1) % n];
        if (std::abs(c.y - a.y) <= geom_eps * std::max(1.0, norm(c - a))) out.degenerate = true;
    }
    out.n_sides = int(n);
    out.height = span;
    if (out.degenerate) return out;

    // right chain follows CCW order from b to top, left chain CW order
    std::size_t r = b, l = b;
    auto next = [n](std::size_t i) { return (i + 1) % n; };
    auto prev = [n](std::size_t i) { return (i + n - 1) % n; };
    double y0 = v[b].y;
    double t = 0, S = 0, P = 0;
    double xr = v[b].x, xl = v[b].x;
    SectionState st;
    st.alpha1 = detail::edge_angle(v[r], v[next(r)]);
    st.alpha2 = pi - detail::edge_angle(v[l], v[prev(l)]);
    out.alpha1_birth = st.alpha1;
    out.alpha2_birth = st.alpha2;
    out.trajectory.push_back(st);
    while (r != top || l != top) {
        double yr = v[next(r)].y, yl = v[prev(l)].y;
        double ynext = std::min(r == top ? 1e300 : yr, l == top ? 1e300 : yl);
        double dt = (ynext - y0) - t;
        Vec2 ra = v[r], rb = v[next(r)], la = v[l], lb = v[prev(l)];
        double xr1 = ra.x + (ynext - ra.y) / (rb.y - ra.y) * (rb.x - ra.x);
        double xl1 = la.x + (ynext - la.y) / (lb.y - la.y) * (lb.x - la.x);
        if (ynext == yr) xr1 = rb.x;
        if (ynext == yl) xl1 = lb.x;
        double l0 = xr - xl, l1 = xr1 - xl1;
        S += 0.5 * (l0 + l1) * dt;
        P += std::hypot(xr1 - xr, dt) + std::hypot(xl1 - xl, dt);
        t += dt;
        xr = xr1;
        xl = xl1;
        if (ynext == yr && r != top) r = next(r);
        if (ynext == yl && l != top) l = prev(l);
        st.t = t;
        st.l = (r == top && l == top) ? 0.0 : xr - xl;
        st.S = S;
        st.P = P;
        if (r != top) st.alpha1 = detail::edge_angle(v[r], v[next(r)]);
        if (l != top) st.alpha2 = pi - detail::edge_angle(v[l], v[prev(l)]);
        out.trajectory.push_back(st);
    }
    out.area = S;
    out.perimeter = P;
    return out;
}

enum class BirthLaw {
    /// Angles at the lowest vertex of a typical cell:
    /// density proportional to F(a1) F(pi - a2) sin(a1 + a2) on a1 + a2 < pi.
    vertex,
    /// Product of the trace densities F(a1) sin(a1) F(pi - a2) sin(a2) on the
    /// same simplex.
    trace_product,
};

struct SimOptions {
    BirthLaw birth = BirthLaw::vertex;
    std::size_t max_events = 10000;
    bool record = false;
    /// When positive, the state at this height is stored in snapshot if the
    /// section is still open.
    double snapshot_at = -1;
};

struct SimResult {
    PolygonSample sample;
    bool has_snapshot = false;
    SectionState snapshot;
};

/// Birth angles (right, left) for a new cell.
inline std::pair<double, double> sample_birth(const DirectionLaw& law, BirthLaw kind, Engine& eng) {
    if (law.is_zero()) throw DegenerateLawError("zero-intensity law has no cell births");
    DirectionLaw refl = law.reflected();
    double fm2 = law.max_density() * law.max_density();
    for (int it = 0; it < 10000000; ++it) {
        double a1, a2;
        if (kind == BirthLaw::vertex) {
            // s = a1 + a2 has density proportional to s sin s; a1 | s uniform
            constexpr double smax = 1.8197057843434806; // max of s sin s on (0, pi)
            double s = pi * uniform01(eng);
            if (uniform01(eng) * smax >= s * std::sin(s)) continue;
            a1 = s * uniform01(eng);
            a2 = s - a1;
            if (law.is_isotropic() || uniform01(eng) * fm2 < law(a1) * law(pi - a2)) return {a1, a2};
        } else {
            a1 = sample_trace_angle(law, eng);
            a2 = sample_trace_angle(refl, eng);
            if (a1 + a2 < pi) return {a1, a2};
        }
    }
    throw NumericalError("birth angle sampler did not accept");
}

namespace detail {

inline double cot(double a) { return std::cos(a) / std::sin(a); }

/// Advance a two-end section by dt without jumps.
inline void drift(SectionState& s, double dt) {
    double v = cot(s.alpha1) + cot(s.alpha2);
    s.S += s.l * dt + 0.5 * v * dt * dt;
    s.l += v * dt;
    s.P += dt * (1 / std::sin(s.alpha1) + 1 / std::sin(s.alpha2));
    s.t += dt;
}

inline double guard_jump(double a) {
    return std::min(a, pi - 1e-12);
}

} // namespace detail

/// Two-end section process started at a cell's lowest vertex, run to closure.
inline SimResult simulate_polygon(const DirectionLaw& law, std::uint64_t seed, const SimOptions& opt = {}) {
    Engine eng = make_engine(seed);
    auto [a1, a2] = sample_birth(law, opt.birth, eng);
    DirectionLaw refl = law.reflected();
    SimResult res;
    PolygonSample& out = res.sample;
    SectionState s;
    s.alpha1 = a1;
    s.alpha2 = a2;
    out.alpha1_birth = a1;
    out.alpha2_birth = a2;
    if (opt.record) {
        out.trajectory.push_back(s);
        out.events.push_back({0, EventKind::birth, 0, a1, a2});
    }
    int jumps = 0;
    for (std::size_t ev = 0;; ++ev) {
        if (ev > opt.max_events) throw NumericalError("section trajectory exceeded max_events");
        double r1 = g1(law, s.alpha1), r2 = g2(law, s.alpha2);
        double tau = exponential(eng, r1 + r2);
        double v = detail::cot(s.alpha1) + detail::cot(s.alpha2);
        double tc = (v < 0) ? -s.l / v : std::numeric_limits<double>::infinity();
        double step = std::min(tau, tc);
        if (opt.snapshot_at > 0 && !res.has_snapshot && s.t + step >= opt.snapshot_at) {
            SectionState q = s;
            detail::drift(q, opt.snapshot_at - s.t);
            res.snapshot = q;
            res.has_snapshot = true;
        }
        if (tc <= tau) {
            detail::drift(s, tc);
            s.l = 0;
            break;
        }
        detail::drift(s, tau);
        ++jumps;
        double u = uniform01(eng) * (r1 + r2);
        int end = u < r1 ? 1 : 2;
        double old = end == 1 ? s.alpha1 : s.alpha2;
        double nw = detail::guard_jump(sample_jump_angle(end == 1 ? law : refl, old, eng));
        (end == 1 ? s.alpha1 : s.alpha2) = nw;
        if (opt.record) {
            out.trajectory.push_back(s);
            out.events.push_back({s.t, EventKind::jump, end, old, nw});
        }
    }
    if (opt.record) {
        out.trajectory.push_back(s);
        out.events.push_back({s.t, EventKind::closure, 0, s.alpha1, s.alpha2});
    }
    out.area = s.S;
    out.perimeter = s.P;
    out.height = s.t;
    out.n_sides = 2 + jumps;
    return res;
}

/// Single chord end driven by its own random stream. The kernel law is F
/// for a right end and F(pi - .) for a left end.
class EndProcess {
public:
    EndProcess(const DirectionLaw& law, double alpha, Engine& eng) : law_(&law), eng_(&eng), alpha_(alpha) {
        require_open_angle(alpha, "alpha0");
        schedule(0.0);
    }

    double angle() const { return alpha_; }
    double next_jump() const { return next_; }
    int jumps() const { return jumps_; }

    /// Jump at next_jump(); returns the new angle.
    double jump() {
        alpha_ = detail::guard_jump(sample_jump_angle(*law_, alpha_, *eng_));
        ++jumps_;
        schedule(next_);
        return alpha_;
    }

    /// Pin the end at alpha from time now: the next jump is redrawn.
    void reset(double alpha, double now) {
        require_open_angle(alpha, "alpha");
        alpha_ = alpha;
        schedule(now);
    }

private:
    void schedule(double now) {
        double g = law_->is_zero() ? 0.0 : g1(*law_, alpha_);
        next_ = g > 0 ? now + exponential(*eng_, g) : std::numeric_limits<double>::infinity();
    }

    const DirectionLaw* law_;
    Engine* eng_;
    double alpha_;
    double next_ = 0;
    int jumps_ = 0;
};

struct EndRun {
    EndState state;
    std::vector<SectionEvent> events;
};

/// Single-end process from alpha0; states recorded at each requested time
/// (ascending).
inline std::vector<EndState> simulate_end_at(const DirectionLaw& law, double alpha0, const std::vector<double>& times,
                                             Engine& eng, std::size_t max_events = 10000,
                                             std::vector<SectionEvent>* log = nullptr) {
    require_open_angle(alpha0, "alpha0");
    EndProcess p(law, alpha0, eng);
    EndState s;
    s.alpha = alpha0;
    std::vector<EndState> out;
    auto advance = [&](double dt) {
        double c = detail::cot(s.alpha);
        s.S += s.l * dt + 0.5 * c * dt * dt;
        s.l += c * dt;
        s.P += dt / std::sin(s.alpha);
        s.t += dt;
    };
    std::size_t ev = 0;
    for (double T : times) {
        if (!(T >= s.t)) throw DomainError("snapshot times must be ascending and >= 0");
        while (p.next_jump() <= T) {
            if (++ev > max_events) throw NumericalError("end trajectory exceeded max_events");
            advance(p.next_jump() - s.t);
            double old = s.alpha;
            s.alpha = p.jump();
            if (log) log->push_back({s.t, EventKind::jump, 1, old, s.alpha});
        }
        advance(T - s.t);
        out.push_back(s);
    }
    return out;
}

inline EndRun simulate_end(const DirectionLaw& law, double alpha0, double t_max, std::uint64_t seed,
                           bool record = false) {
    if (!(t_max > 0)) throw DomainError("t_max must be > 0");
    Engine eng = make_engine(seed);
    EndRun r;
    r.state = simulate_end_at(law, alpha0, {t_max}, eng, 10000, record ? &r.events : nullptr).front();
    return r;
}

/// Concatenate two end legs: the second leg starts where the first ended,
/// so its swept area gains the shift l1 * t2.
inline EndState compose_legs(const EndState& a, const EndState& b) {
    EndState c;
    c.alpha = b.alpha;
    c.l = a.l + b.l;
    c.S = a.S + b.S + a.l * b.t;
    c.P = a.P + b.P;
    c.t = a.t + b.t;
    return c;
}

struct ComposeSamples {
    std::vector<EndState> direct;
    std::vector<EndState> composed;
};

/// Direct runs to t1 + t2 against chained runs t1 then t2 with fresh streams.
inline ComposeSamples compose_check(const DirectionLaw& law, double alpha0, double t1, double t2, std::size_t n,
                                    std::uint64_t seed) {
    if (!(t1 > 0 && t2 > 0)) throw DomainError("t1 and t2 must be > 0");
    ComposeSamples out;
    out.direct.reserve(n);
    out.composed.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Engine e1 = make_engine(replica_seed(seed, 3 * k));
        out.direct.push_back(simulate_end_at(law, alpha0, {t1 + t2}, e1).front());
        Engine e2 = make_engine(replica_seed(seed, 3 * k + 1));
        EndState a = simulate_end_at(law, alpha0, {t1}, e2).front();
        Engine e3 = make_engine(replica_seed(seed, 3 * k + 2));
        EndState b = simulate_end_at(law, a.alpha, {t2}, e3).front();
        out.composed.push_back(compose_legs(a, b));
    }
    return out;
}

struct ClosureResult {
    double area = 0;
    double perimeter = 0;
    double height = 0;
    int jumps = 0;
};

/// Run two independent end processes from a chord of length l0 until the
/// chord closes.
inline ClosureResult close_section(double l0, EndProcess& right, EndProcess& left, std::size_t max_events = 10000) {
    ClosureResult r;
    double l = l0, t = 0;
    for (std::size_t ev = 0;; ++ev) {
        if (ev > max_events) throw NumericalError("section trajectory exceeded max_events");
        double a1 = right.angle(), a2 = left.angle();
        double v = detail::cot(a1) + detail::cot(a2);
        double te = std::min(right.next_jump(), left.next_jump());
        double tc = v < 0 ? t - l / v : std::numeric_limits<double>::infinity();
        double t1 = std::min(te, tc);
        double dt = t1 - t;
        r.area += l * dt + 0.5 * v * dt * dt;
        r.perimeter += dt * (1 / std::sin(a1) + 1 / std::sin(a2));
        l += v * dt;
        t = t1;
        if (tc <= te) break;
        if (right.next_jump() <= left.next_jump()) right.jump();
        else left.jump();
        ++r.jumps;
    }
    r.height = t;
    return r;
}

} // namespace secant
