#include "nestlab/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nestlab/error.hpp"

namespace nestlab::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

double parse_number(std::string_view key, std::string_view text) {
    const std::string s(trim(text));
    if (s.empty()) {
        throw Error(ErrorCode::ParseError, "empty value for '" + std::string(key) + "'");
    }
    // Underflow to a subnormal is accepted; overflow is not.
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    const bool overflow = errno == ERANGE && std::abs(v) > 1.0;
    if (end != s.c_str() + s.size() || overflow || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError,
                    "'" + std::string(key) + "' expects a finite number, got '" + s + "'");
    }
    return v;
}

// name=value pairs in parameter order; every name must appear exactly once.
std::vector<std::string> assign_by_name(const maps::MapFamily& family, std::string_view text) {
    const auto names = family.parameter_names();
    std::vector<std::string> values(names.size());
    std::vector<bool> seen(names.size(), false);
    for (auto item : split(text, ',')) {
        item = trim(item);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "expected name=value, got '" + std::string(item) + "'");
        }
        const std::string name(trim(item.substr(0, eq)));
        std::size_t i = 0;
        while (i < names.size() && names[i] != name) {
            ++i;
        }
        if (i == names.size()) {
            throw Error(ErrorCode::ParseError,
                        "unknown parameter '" + name + "' for family " + maps::to_string(family.id));
        }
        if (seen[i]) {
            throw Error(ErrorCode::ParseError, "parameter '" + name + "' given twice");
        }
        seen[i] = true;
        values[i] = std::string(trim(item.substr(eq + 1)));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!seen[i]) {
            throw Error(ErrorCode::ParseError, "missing parameter '" + names[i] + "'");
        }
    }
    return values;
}

} // namespace

KeyValues parse_key_values(std::string_view text, std::string_view origin) {
    KeyValues kv;
    int line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(line_no);
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, where + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw Error(ErrorCode::ParseError, where + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw Error(ErrorCode::ParseError, where + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IOFailure, "cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str(), path);
}

double to_double(const std::string& key, const std::string& value) { return parse_number(key, value); }

long to_long(const std::string& key, const std::string& value) {
    const std::string s(trim(value));
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw Error(ErrorCode::ParseError, "'" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (auto item : split(value, ',')) {
        out.push_back(parse_number(key, item));
    }
    return out;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

maps::MapInstance FamilySpec::instance() const { return maps::MapInstance(family, params); }

std::string FamilySpec::render() const {
    std::string out = maps::to_string(family.id) + ":";
    const auto names = family.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        out += (i ? "," : "") + names[i] + "=" + format_double(params[i]);
    }
    return out;
}

maps::MapFamily parse_family_name(std::string_view name) {
    name = trim(name);
    const auto colon = name.find(':');
    const std::string id(trim(name.substr(0, colon)));
    if (id == "quadratic") {
        return {maps::FamilyId::Quadratic, 0};
    }
    if (id == "nquadratic") {
        return {maps::FamilyId::NormalizedQuadratic, 0};
    }
    if (id == "pquadratic") {
        return {maps::FamilyId::PerturbedQuadratic, 0};
    }
    if (id == "poly") {
        // Degree from the highest c<k> present.
        int degree = 0;
        if (colon != std::string_view::npos) {
            for (auto item : split(name.substr(colon + 1), ',')) {
                item = trim(item);
                if (item.size() > 1 && item[0] == 'c') {
                    degree = std::max(degree, std::atoi(std::string(item.substr(1)).c_str()));
                }
            }
        }
        return {maps::FamilyId::Polynomial, degree};
    }
    throw Error(ErrorCode::ParseError,
                "unknown family '" + id + "' (expected quadratic, nquadratic, pquadratic or poly)");
}

FamilySpec parse_family(std::string_view spec) {
    spec = trim(spec);
    FamilySpec out;
    out.family = parse_family_name(spec);
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) {
        throw Error(ErrorCode::ParseError, "family '" + std::string(spec) + "' needs parameters");
    }
    if (out.family.id == maps::FamilyId::Polynomial && out.family.degree < 1) {
        throw Error(ErrorCode::ParseError, "poly needs coefficients c1=...");
    }
    for (const auto& v : assign_by_name(out.family, spec.substr(colon + 1))) {
        out.params.push_back(parse_number("family parameter", v));
    }
    return out;
}

std::vector<Range> parse_window(const maps::MapFamily& family, std::string_view text) {
    std::vector<Range> out;
    for (const auto& v : assign_by_name(family, text)) {
        const auto parts = split(v, ':');
        if (parts.size() == 1) {
            const double x = parse_number("window", parts[0]);
            out.push_back({x, x});
        } else if (parts.size() == 2) {
            Range r{parse_number("window", parts[0]), parse_number("window", parts[1])};
            if (!(r.lo <= r.hi)) {
                throw Error(ErrorCode::ParseError, "window range '" + v + "' has lo > hi");
            }
            out.push_back(r);
        } else {
            throw Error(ErrorCode::ParseError, "window range '" + v + "' must be lo:hi or a value");
        }
    }
    return out;
}

std::string render_window(const maps::MapFamily& family, const std::vector<Range>& ranges) {
    const auto names = family.parameter_names();
    std::string out;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        out += (i ? "," : "") + names[i] + "=" + format_double(ranges[i].lo);
        if (!ranges[i].degenerate()) {
            out += ":" + format_double(ranges[i].hi);
        }
    }
    return out;
}

std::vector<double> parse_point(const maps::MapFamily& family, std::string_view text) {
    std::vector<double> out;
    for (const auto& v : assign_by_name(family, text)) {
        out.push_back(parse_number("point", v));
    }
    return out;
}

} // namespace nestlab::config
