#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "kinetic_solver.hpp"
#include "laplace.hpp"
#include "line_process.hpp"
#include "section_sweep.hpp"
#include "stats.hpp"
#include "tessellation.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace secant {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// ---- numbers ----------------------------------------------------------------

/// Shortest-form is not used: 17 significant digits, '.' decimal, no locale.
inline std::string fmt17(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ') ++b;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw ContractError("not a number: '" + s + "'");
    return v;
}

// ---- files ------------------------------------------------------------------

inline constexpr const char* quarantine_suffix = ".partial";

/// Output file written under a quarantine name and renamed into place by
/// commit(). An uncommitted writer leaves only the quarantined file.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path path, bool binary = false) : path_(std::move(path)) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        tmp_ = path_;
        tmp_ += quarantine_suffix;
        out_.open(tmp_, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!out_) throw ContractError("cannot write " + tmp_.string());
    }
    ArtifactWriter(const ArtifactWriter&) = delete;
    ArtifactWriter& operator=(const ArtifactWriter&) = delete;

    std::ostream& stream() { return out_; }
    const std::filesystem::path& path() const { return path_; }

    void commit() {
        out_.flush();
        if (!out_) throw ContractError("write failed for " + tmp_.string());
        out_.close();
        std::filesystem::rename(tmp_, path_);
        committed_ = true;
    }

private:
    std::filesystem::path path_, tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    ArtifactWriter w(p);
    w.stream() << text;
    w.commit();
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ContractError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- JSON conversions -------------------------------------------------------

inline void to_json(json& j, const Vec2& v) { j = json{{"x", v.x}, {"y", v.y}}; }
inline void from_json(const json& j, Vec2& v) {
    v.x = j.at("x").get<double>();
    v.y = j.at("y").get<double>();
}

inline void to_json(json& j, const Line& l) { j = json{{"phi", l.phi}, {"p", l.p}}; }
inline void from_json(const json& j, Line& l) {
    l.phi = j.at("phi").get<double>();
    l.p = j.at("p").get<double>();
}

inline void to_json(json& j, const CellMetrics& m) {
    j = json{{"area", m.area},           {"perimeter", m.perimeter},         {"n_vertices", m.n_vertices},
             {"height", m.height},       {"bottom_vertex", m.bottom_vertex}, {"bottom_tie", m.bottom_tie}};
}
inline void from_json(const json& j, CellMetrics& m) {
    m.area = j.at("area").get<double>();
    m.perimeter = j.at("perimeter").get<double>();
    m.n_vertices = j.at("n_vertices").get<int>();
    m.height = j.at("height").get<double>();
    m.bottom_vertex = j.at("bottom_vertex").get<Vec2>();
    m.bottom_tie = j.at("bottom_tie").get<bool>();
}

inline void to_json(json& j, const ConvexCell& c) {
    std::vector<int> arc(c.arc.begin(), c.arc.end());
    j = json{{"vertices", c.vertices},
             {"arc", arc},
             {"window_radius", c.window_radius},
             {"full_window", c.full_window},
             {"boundary", c.boundary},
             {"degenerate", c.degenerate},
             {"metrics", c.metrics}};
    if (c.generator) j["generator"] = *c.generator;
}
inline void from_json(const json& j, ConvexCell& c) {
    c.vertices = j.at("vertices").get<std::vector<Vec2>>();
    auto arc = j.at("arc").get<std::vector<int>>();
    c.arc.assign(arc.begin(), arc.end());
    c.window_radius = j.at("window_radius").get<double>();
    c.full_window = j.at("full_window").get<bool>();
    c.boundary = j.at("boundary").get<bool>();
    c.degenerate = j.at("degenerate").get<bool>();
    c.metrics = j.at("metrics").get<CellMetrics>();
    if (j.contains("generator")) c.generator = j["generator"].get<Vec2>();
    else c.generator.reset();
}

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::birth: return "birth";
    case EventKind::closure: return "closure";
    default: return "jump";
    }
}

inline EventKind event_kind_from(const std::string& s) {
    if (s == "birth") return EventKind::birth;
    if (s == "closure") return EventKind::closure;
    if (s == "jump") return EventKind::jump;
    throw ContractError("unknown event kind '" + s + "'");
}

inline void to_json(json& j, const SectionEvent& e) {
    j = json{{"t", e.t}, {"kind", to_string(e.kind)}, {"end", e.end}, {"old_angle", e.old_angle}, {"new_angle", e.new_angle}};
}
inline void from_json(const json& j, SectionEvent& e) {
    e.t = j.at("t").get<double>();
    e.kind = event_kind_from(j.at("kind").get<std::string>());
    e.end = j.at("end").get<int>();
    e.old_angle = j.at("old_angle").get<double>();
    e.new_angle = j.at("new_angle").get<double>();
}

inline void to_json(json& j, const SectionState& s) {
    j = json{{"t", s.t}, {"l", s.l}, {"alpha1", s.alpha1}, {"alpha2", s.alpha2}, {"S", s.S}, {"P", s.P}};
}
inline void from_json(const json& j, SectionState& s) {
    s.t = j.at("t").get<double>();
    s.l = j.at("l").get<double>();
    s.alpha1 = j.at("alpha1").get<double>();
    s.alpha2 = j.at("alpha2").get<double>();
    s.S = j.at("S").get<double>();
    s.P = j.at("P").get<double>();
}

inline void to_json(json& j, const EndState& s) {
    j = json{{"alpha", s.alpha}, {"l", s.l}, {"S", s.S}, {"P", s.P}, {"t", s.t}};
}
inline void from_json(const json& j, EndState& s) {
    s.alpha = j.at("alpha").get<double>();
    s.l = j.at("l").get<double>();
    s.S = j.at("S").get<double>();
    s.P = j.at("P").get<double>();
    s.t = j.at("t").get<double>();
}

inline void to_json(json& j, const PolygonSample& p) {
    j = json{{"S_total", p.area},
             {"P_total", p.perimeter},
             {"t_height", p.height},
             {"n_sides", p.n_sides},
             {"alpha1_birth", p.alpha1_birth},
             {"alpha2_birth", p.alpha2_birth},
             {"degenerate", p.degenerate}};
    if (!p.trajectory.empty()) j["trajectory"] = p.trajectory;
    if (!p.events.empty()) j["events"] = p.events;
}
inline void from_json(const json& j, PolygonSample& p) {
    p.area = j.at("S_total").get<double>();
    p.perimeter = j.at("P_total").get<double>();
    p.height = j.at("t_height").get<double>();
    p.n_sides = j.at("n_sides").get<int>();
    p.alpha1_birth = j.at("alpha1_birth").get<double>();
    p.alpha2_birth = j.at("alpha2_birth").get<double>();
    p.degenerate = j.at("degenerate").get<bool>();
    p.trajectory = j.value("trajectory", std::vector<SectionState>{});
    p.events = j.value("events", std::vector<SectionEvent>{});
}

inline void to_json(json& j, const Axis& a) { j = json{{"name", a.name}, {"unit", a.unit}, {"edges", a.edges}}; }
inline void from_json(const json& j, Axis& a) {
    a.name = j.at("name").get<std::string>();
    a.unit = j.at("unit").get<std::string>();
    a.edges = j.at("edges").get<std::vector<double>>();
}

inline Weighting weighting_from(const std::string& s) {
    if (s == "counts") return Weighting::counts;
    if (s == "line-sampled") return Weighting::line_sampled;
    if (s == "height-unweighted") return Weighting::height_unweighted;
    throw ContractError("unknown weighting '" + s + "'");
}

inline void to_json(json& j, const Histogram& h) {
    j = json{{"schema_version", schema_version},
             {"axes", h.axes},
             {"values", h.values},
             {"outside", h.outside},
             {"sample_size", h.sample_size},
             {"weighting", to_string(h.weighting)},
             {"normalized", h.normalized}};
    if (!h.ci_lo.empty()) {
        j["ci_lo"] = h.ci_lo;
        j["ci_hi"] = h.ci_hi;
    }
}
inline void from_json(const json& j, Histogram& h) {
    h.axes = j.at("axes").get<std::vector<Axis>>();
    h.values = j.at("values").get<std::vector<double>>();
    h.outside = j.at("outside").get<double>();
    h.sample_size = j.at("sample_size").get<double>();
    h.weighting = weighting_from(j.at("weighting").get<std::string>());
    h.normalized = j.at("normalized").get<bool>();
    h.ci_lo = j.value("ci_lo", std::vector<double>{});
    h.ci_hi = j.value("ci_hi", std::vector<double>{});
}

inline void to_json(json& j, const TestReport& r) {
    j = json{{"schema_version", schema_version},
             {"name", r.name},
             {"statistic_name", r.statistic_name},
             {"statistic", r.statistic},
             {"threshold", r.threshold},
             {"upper_bound", r.upper_bound},
             {"verdict", r.pass() ? "pass" : "fail"},
             {"sample_sizes", r.sample_sizes},
             {"seeds", r.seeds},
             {"note", r.note}};
    j["p_value"] = r.p_value ? json(*r.p_value) : json(nullptr);
}
inline void from_json(const json& j, TestReport& r) {
    r.name = j.at("name").get<std::string>();
    r.statistic_name = j.at("statistic_name").get<std::string>();
    r.statistic = j.at("statistic").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.upper_bound = j.at("upper_bound").get<bool>();
    r.sample_sizes = j.at("sample_sizes").get<std::vector<double>>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.note = j.at("note").get<std::string>();
    if (j.contains("p_value") && !j["p_value"].is_null()) r.p_value = j["p_value"].get<double>();
    else r.p_value.reset();
}

inline void to_json(json& j, const TransformPoint& q) { j = json{{"s", q.s}, {"p", q.p}, {"l", q.l}, {"t", q.t}}; }
inline void from_json(const json& j, TransformPoint& q) {
    q.s = j.value("s", 0.0);
    q.p = j.value("p", 0.0);
    q.l = j.value("l", 0.0);
    q.t = j.value("t", 1.0);
}

inline void to_json(json& j, const EquationCheck& c) {
    j = json{{"bandwidth", c.bandwidth}, {"residual", c.residual}, {"nodes", c.nodes}, {"inconclusive", c.inconclusive}};
}

// ---- JSON lines -------------------------------------------------------------

template <class T>
void write_jsonl(const std::filesystem::path& p, const std::vector<T>& items) {
    ArtifactWriter w(p);
    for (const T& x : items) w.stream() << json(x).dump() << '\n';
    w.commit();
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ContractError("cannot open " + p.string());
    std::vector<T> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line).get<T>());
        } catch (const json::exception& e) {
            throw ContractError(p.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

// ---- CSV --------------------------------------------------------------------

inline void write_law_csv(const std::filesystem::path& p, const DirectionLaw& law) {
    if (law.is_isotropic()) throw ContractError("only tabulated laws have a table");
    ArtifactWriter w(p);
    w.stream() << "phi,F\n";
    for (std::size_t i = 0; i < law.nodes().size(); ++i)
        w.stream() << fmt17(law.nodes()[i]) << ',' << fmt17(law.values()[i]) << '\n';
    w.commit();
}

/// One-axis histogram as CSV: lo, hi, value, and CI columns when present.
inline std::string histogram_csv(const Histogram& h) {
    std::ostringstream s;
    if (h.axes.size() == 1) {
        const Axis& a = h.axes[0];
        s << a.name << "_lo," << a.name << "_hi,value";
        bool ci = !h.ci_lo.empty();
        if (ci) s << ",ci_lo,ci_hi";
        s << '\n';
        for (std::size_t i = 0; i < h.values.size(); ++i) {
            s << fmt17(a.edges[i]) << ',' << fmt17(a.edges[i + 1]) << ',' << fmt17(h.values[i]);
            if (ci) s << ',' << fmt17(h.ci_lo[i]) << ',' << fmt17(h.ci_hi[i]);
            s << '\n';
        }
    } else {
        const Axis &a = h.axes[0], &b = h.axes[1];
        s << a.name << "_lo," << a.name << "_hi," << b.name << "_lo," << b.name << "_hi,value\n";
        for (std::size_t i = 0; i < a.bins(); ++i)
            for (std::size_t k = 0; k < b.bins(); ++k)
                s << fmt17(a.edges[i]) << ',' << fmt17(a.edges[i + 1]) << ',' << fmt17(b.edges[k]) << ','
                  << fmt17(b.edges[k + 1]) << ',' << fmt17(h.values[i * b.bins() + k]) << '\n';
    }
    return s.str();
}

/// Columns of a CSV with a header line; every cell parsed as a double.
inline std::vector<std::vector<double>> read_csv_columns(const std::filesystem::path& p, std::vector<std::string>* header) {
    std::ifstream in(p);
    if (!in) throw ContractError("cannot open " + p.string());
    std::string line;
    std::vector<std::vector<double>> cols;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (n == 1) {
            if (header) *header = cells;
            cols.resize(cells.size());
            continue;
        }
        if (cells.size() != cols.size()) throw ContractError(p.string() + ":" + std::to_string(n) + ": wrong column count");
        for (std::size_t k = 0; k < cells.size(); ++k) cols[k].push_back(parse_double(cells[k]));
    }
    return cols;
}

// ---- kernel grids -----------------------------------------------------------

inline constexpr char grid_magic[8] = {'S', 'E', 'C', 'G', 'R', 'I', 'D', '1'};

inline const char* to_string(ThirdAxis a) {
    switch (a) {
    case ThirdAxis::area: return "S";
    case ThirdAxis::perimeter: return "P";
    default: return "none";
    }
}

inline ThirdAxis third_axis_from(const std::string& s) {
    if (s == "none") return ThirdAxis::none;
    if (s == "S" || s == "area") return ThirdAxis::area;
    if (s == "P" || s == "perimeter") return ThirdAxis::perimeter;
    throw ContractError("unknown third axis '" + s + "'");
}

inline json axis_json(const std::string& name, const UniformAxis& a, bool ghosts) {
    return json{{"name", name}, {"lo", a.lo}, {"hi", a.hi}, {"cells", a.n}, {"ghost_cells", ghosts}};
}

inline json grid_sidecar(const KernelGrid& g) {
    json axes = json::array();
    axes.push_back(axis_json("alpha", g.alpha, false));
    if (g.l.n) axes.push_back(axis_json("l", g.l, true));
    if (g.third != ThirdAxis::none) axes.push_back(axis_json(to_string(g.third), g.z, true));
    return json{{"schema_version", schema_version},
                {"layout", "row-major float64 little-endian, alpha slowest"},
                {"alpha0", g.alpha0},
                {"t", g.t},
                {"ballistic", g.ballistic},
                {"third", to_string(g.third)},
                {"axes", axes},
                {"values", "cell masses"}};
}

/// Binary layout: magic, uint64 count, then the cell masses.
inline void write_grid(const std::filesystem::path& bin, const KernelGrid& g) {
    ArtifactWriter w(bin, true);
    std::uint64_t n = g.mass.size();
    w.stream().write(grid_magic, 8);
    w.stream().write(reinterpret_cast<const char*>(&n), 8);
    w.stream().write(reinterpret_cast<const char*>(g.mass.data()), std::streamsize(n * sizeof(double)));
    w.commit();
    std::filesystem::path side = bin;
    side += ".json";
    write_text(side, grid_sidecar(g).dump(2) + "\n");
}

inline KernelGrid read_grid(const std::filesystem::path& bin) {
    std::filesystem::path side = bin;
    side += ".json";
    json j = json::parse(read_text(side));
    if (j.at("schema_version").get<int>() != schema_version) throw ContractError("unsupported grid schema version");
    KernelGrid g;
    g.alpha0 = j.at("alpha0").get<double>();
    g.t = j.at("t").get<double>();
    g.ballistic = j.at("ballistic").get<double>();
    g.third = third_axis_from(j.at("third").get<std::string>());
    for (const json& a : j.at("axes")) {
        UniformAxis u{a.at("lo").get<double>(), a.at("hi").get<double>(), a.at("cells").get<std::size_t>()};
        std::string name = a.at("name").get<std::string>();
        if (name == "alpha") g.alpha = u;
        else if (name == "l") g.l = u;
        else g.z = u;
    }
    std::ifstream in(bin, std::ios::binary);
    char magic[8];
    std::uint64_t n = 0;
    if (!in.read(magic, 8) || std::memcmp(magic, grid_magic, 8) != 0) throw ContractError("not a kernel grid: " + bin.string());
    in.read(reinterpret_cast<char*>(&n), 8);
    if (n != g.alpha.n * g.nl() * g.nz()) throw ContractError("grid size does not match its sidecar");
    g.mass.resize(n);
    if (!in.read(reinterpret_cast<char*>(g.mass.data()), std::streamsize(n * sizeof(double))))
        throw ContractError("truncated grid file " + bin.string());
    return g;
}

} // namespace secant
