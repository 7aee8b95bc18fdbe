#pragma once

#include "direction_law.hpp"
#include "errors.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace secant {

/// Line of every object key and array element in a JSON text, keyed by JSON
/// pointer. Assumes the text already parsed successfully.
inline std::map<std::string, int> json_key_lines(const std::string& text) {
    std::map<std::string, int> out;
    struct Frame {
        bool object;
        std::string base;
        std::size_t index;
        std::string key;
    };
    std::vector<Frame> stack;
    int line = 1;
    bool expect_key = false;
    auto escape = [](const std::string& k) {
        std::string r;
        for (char c : k) {
            if (c == '~') r += "~0";
            else if (c == '/') r += "~1";
            else r += c;
        }
        return r;
    };
    auto here = [&]() -> std::string {
        if (stack.empty()) return "";
        const Frame& f = stack.back();
        return f.object ? f.base + "/" + escape(f.key) : f.base + "/" + std::to_string(f.index);
    };
    auto value_start = [&] {
        if (!stack.empty() && !stack.back().object) out.emplace(here(), line);
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') {
            ++line;
            continue;
        }
        if (c == '"') {
            std::string s;
            for (++i; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\' && i + 1 < text.size()) s += text[++i];
                else s += text[i];
            }
            if (expect_key) {
                stack.back().key = s;
                out.emplace(here(), line);
                expect_key = false;
            } else {
                value_start();
            }
            continue;
        }
        switch (c) {
        case '{':
            value_start();
            stack.push_back({true, here(), 0, ""});
            expect_key = true;
            break;
        case '[':
            value_start();
            stack.push_back({false, here(), 0, ""});
            break;
        case '}':
        case ']':
            stack.pop_back();
            expect_key = false;
            break;
        case ',':
            if (stack.back().object) expect_key = true;
            else ++stack.back().index;
            break;
        case ' ':
        case '\t':
        case '\r':
        case ':':
            break;
        default:
            // first character of a number or literal
            value_start();
            while (i + 1 < text.size() && std::string(",]}\n \t\r").find(text[i + 1]) == std::string::npos) ++i;
        }
    }
    return out;
}

/// Parsed run configuration with the source line of every key. Command-line
/// overrides replace values and are reported as such in messages.
class RunConfig {
public:
    static RunConfig from_text(const std::string& text, const std::string& origin) {
        RunConfig c;
        c.origin_ = origin;
        try {
            c.root_ = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            std::size_t line = 1, col = 1;
            for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
                if (text[i] == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
            }
            std::string what = e.what();
            auto p = what.find("parse error");
            throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON: " +
                              (p == std::string::npos ? what : what.substr(p)));
        }
        if (!c.root_.is_object()) throw ConfigError(origin + ":1: configuration must be a JSON object");
        c.lines_ = json_key_lines(text);
        return c;
    }

    static RunConfig from_file(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw ConfigError("cannot open config " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        RunConfig c = from_text(ss.str(), p.string());
        c.dir_ = p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
        return c;
    }

    static RunConfig empty() {
        RunConfig c;
        c.origin_ = "<flags>";
        c.root_ = nlohmann::json::object();
        return c;
    }

    /// "a.b.c=value"; value is JSON when it parses as JSON, a string otherwise.
    void set(const std::string& assignment) {
        auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
        std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
        nlohmann::json v;
        try {
            v = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::parse_error&) {
            v = raw;
        }
        set(key, v);
    }

    void set(const std::string& dotted, const nlohmann::json& v) {
        std::string ptr;
        std::stringstream ss(dotted);
        std::string part;
        while (std::getline(ss, part, '.')) ptr += "/" + part;
        root_[nlohmann::json::json_pointer(ptr)] = v;
        overridden_.insert(ptr);
    }

    const nlohmann::json& root() const { return root_; }
    const std::filesystem::path& dir() const { return dir_; }

    /// "file:line" for a JSON pointer, or a flag marker for overridden keys.
    std::string where(const std::string& ptr) const {
        for (std::string p = ptr;; p = p.substr(0, p.rfind('/'))) {
            if (overridden_.count(p)) return "command line (" + dotted(ptr) + ")";
            if (p.empty()) break;
        }
        std::string p = ptr;
        while (!p.empty()) {
            auto it = lines_.find(p);
            if (it != lines_.end()) return origin_ + ":" + std::to_string(it->second);
            p = p.substr(0, p.rfind('/'));
        }
        return origin_ + ":1";
    }

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
        throw ConfigError(where(ptr) + ": " + dotted(ptr) + ": " + msg);
    }

    bool has(const std::string& ptr) const { return root_.contains(nlohmann::json::json_pointer(ptr)); }
    const nlohmann::json& at(const std::string& ptr) const { return root_.at(nlohmann::json::json_pointer(ptr)); }

    /// Reject keys of the object at ptr that are not listed.
    void allow_keys(const std::string& ptr, const std::set<std::string>& keys) const {
        const nlohmann::json& o = ptr.empty() ? root_ : at(ptr);
        if (!o.is_object()) fail(ptr, "must be an object");
        for (auto it = o.begin(); it != o.end(); ++it)
            if (!keys.count(it.key())) fail(ptr + "/" + it.key(), "unknown key");
    }

    double number(const std::string& ptr, double def, double lo, double hi, bool open_lo = false) const {
        if (!has(ptr)) return def;
        const auto& v = at(ptr);
        if (!v.is_number()) fail(ptr, "must be a number");
        double x = v.get<double>();
        if (!(open_lo ? x > lo : x >= lo) || !(x <= hi))
            fail(ptr, "must lie in " + std::string(open_lo ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + "], got " + fmt(x));
        return x;
    }

    double required_number(const std::string& ptr, double lo, double hi, bool open_lo = false) const {
        if (!has(ptr)) fail(ptr, "is required");
        return number(ptr, 0, lo, hi, open_lo);
    }

    std::int64_t integer(const std::string& ptr, std::int64_t def, std::int64_t lo, std::int64_t hi) const {
        if (!has(ptr)) return def;
        const auto& v = at(ptr);
        if (!v.is_number_integer()) fail(ptr, "must be an integer");
        std::int64_t x = v.is_number_unsigned() ? std::int64_t(v.get<std::uint64_t>()) : v.get<std::int64_t>();
        if (x < lo || x > hi) fail(ptr, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + std::to_string(x));
        return x;
    }

    std::uint64_t seed(const std::string& ptr, std::uint64_t def) const {
        if (!has(ptr)) return def;
        const auto& v = at(ptr);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            fail(ptr, "must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& ptr, bool def) const {
        if (!has(ptr)) return def;
        if (!at(ptr).is_boolean()) fail(ptr, "must be true or false");
        return at(ptr).get<bool>();
    }

    std::string string(const std::string& ptr, const std::string& def, const std::set<std::string>& choices = {}) const {
        if (!has(ptr)) return def;
        if (!at(ptr).is_string()) fail(ptr, "must be a string");
        std::string s = at(ptr).get<std::string>();
        if (!choices.empty() && !choices.count(s)) {
            std::string list;
            for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
            fail(ptr, "must be one of {" + list + "}, got '" + s + "'");
        }
        return s;
    }

    std::string required_string(const std::string& ptr) const {
        if (!has(ptr)) fail(ptr, "is required");
        return string(ptr, "");
    }

    std::vector<double> numbers(const std::string& ptr, std::vector<double> def) const {
        if (!has(ptr)) return def;
        const auto& v = at(ptr);
        if (!v.is_array() || v.empty()) fail(ptr, "must be a non-empty array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(ptr + "/" + std::to_string(i), "must be a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    /// Path relative to the config file's directory.
    std::filesystem::path path(const std::string& ptr) const {
        std::filesystem::path p = required_string(ptr);
        return (p.is_absolute() || overridden_.count(ptr)) ? p : dir_ / p;
    }

private:
    static std::string dotted(const std::string& ptr) {
        std::string s = ptr.empty() ? "(root)" : ptr.substr(1);
        for (char& c : s)
            if (c == '/') c = '.';
        return s;
    }
    static std::string fmt(double x) {
        std::ostringstream s;
        s << x;
        return s.str();
    }

    std::string origin_;
    std::filesystem::path dir_ = ".";
    nlohmann::json root_;
    std::map<std::string, int> lines_;
    std::set<std::string> overridden_;
};

/// Direction law from the "law" object: isotropic with an intensity, or
/// tabulated from inline arrays or a two-column CSV file.
inline DirectionLaw law_from_config(const RunConfig& c, const std::string& ptr = "/law") {
    if (!c.has(ptr)) return DirectionLaw::isotropic(1.0);
    c.allow_keys(ptr, {"kind", "intensity", "table", "phi", "F"});
    std::string kind = c.string(ptr + "/kind", "isotropic", {"isotropic", "tabulated"});
    try {
        if (kind == "isotropic") return DirectionLaw::isotropic(c.number(ptr + "/intensity", 1.0, 0, 1e6));
        if (c.has(ptr + "/table")) return DirectionLaw::from_csv(c.path(ptr + "/table").string());
        if (!c.has(ptr + "/phi") || !c.has(ptr + "/F")) c.fail(ptr, "tabulated law needs 'table' or both 'phi' and 'F'");
        return DirectionLaw::tabulated(c.numbers(ptr + "/phi", {}), c.numbers(ptr + "/F", {}));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        c.fail(ptr, e.what());
    }
}

inline nlohmann::json law_description(const DirectionLaw& law) {
    if (law.is_isotropic()) return {{"kind", "isotropic"}, {"intensity", law.intensity()}};
    return {{"kind", "tabulated"}, {"phi", law.nodes()}, {"F", law.values()}};
}

} // namespace secant
