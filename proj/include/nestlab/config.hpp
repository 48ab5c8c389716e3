#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nestlab/maps.hpp"

namespace nestlab::config {

/// Parsed `key = value` lines. Blank lines and `#` comments are skipped.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text, std::string_view origin = "<string>");
KeyValues load_key_values(const std::string& path);

double to_double(const std::string& key, const std::string& value);
long to_long(const std::string& key, const std::string& value);
std::vector<double> to_double_list(const std::string& key, const std::string& value);

/// 17 significant digits; parses back to exactly x.
std::string format_double(double x);

/// `quadratic:a=2`, `nquadratic:t=1`, `pquadratic:a=1.8,eps=0.05`,
/// `poly:c1=2,c2=-0.1`.
struct FamilySpec {
    maps::MapFamily family;
    std::vector<double> params;

    [[nodiscard]] maps::MapInstance instance() const;
    [[nodiscard]] std::string render() const;
    bool operator==(const FamilySpec&) const = default;
};

/// Family name alone (`pquadratic`) or name with every parameter.
maps::MapFamily parse_family_name(std::string_view name);
FamilySpec parse_family(std::string_view spec);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] bool degenerate() const noexcept { return lo == hi; }
    bool operator==(const Range&) const = default;
};

/// `a=1.5:2,eps=0`: one entry per family parameter, `lo:hi` or a single value.
std::vector<Range> parse_window(const maps::MapFamily& family, std::string_view text);
std::string render_window(const maps::MapFamily& family, const std::vector<Range>& ranges);

/// `name=value,...` for every family parameter.
std::vector<double> parse_point(const maps::MapFamily& family, std::string_view text);

} // namespace nestlab::config
