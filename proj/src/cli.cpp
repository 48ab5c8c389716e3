#include "nestlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nestlab/kneading.hpp"
#include "nestlab/numerics.hpp"
#include "nestlab/scan.hpp"
#include "nestlab/transversality.hpp"

namespace nestlab::cli {

namespace {

using json = nlohmann::ordered_json;
using config::format_double;

struct OptionSpec {
    std::string name;
    std::string help;
    bool required = false;
};

struct CommandSpec {
    std::string name;
    std::string help;
    std::vector<OptionSpec> options;
    std::vector<OptionSpec> flags;
    bool budgets = false;
};

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

std::vector<std::string> budget_flag_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : scan::Budgets{}.to_key_values()) {
        if (k != "bits") {
            out.push_back(dashed(k));
        }
    }
    return out;
}

const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> table = [] {
        const std::vector<OptionSpec> common{
            {"family", "map family spec, e.g. quadratic:a=2", true},
            {"format", "json or csv (default json)"},
            {"out", "write data to this file instead of stdout"},
            {"config", "key = value file with budget defaults"},
            {"bits", "mantissa bits (default 53, or NESTLAB_BITS)"},
        };
        auto with = [&](std::vector<OptionSpec> extra) {
            auto all = common;
            all.insert(all.end(), extra.begin(), extra.end());
            return all;
        };
        return std::vector<CommandSpec>{
            {"nest", "principal nest with return branch tables",
             with({{"levels", "levels to build (default 4)"},
                   {"min-branch", "skip branches shorter than this fraction of |I_n| (default 1e-6)"},
                   {"budget", "longest return time followed (default 20000)"},
                   {"max-period", "longest renormalization period searched (default 64)"}}),
             {}},
            {"stats", "critical orbit statistics",
             with({{"ce", "critical orbit length for the CE series (default 2000)"},
                   {"bce", "depth of the backward tree (default 10)"},
                   {"recurrence", "orbit length for the recurrence fit (default 100000)"},
                   {"wr", "comma-separated deltas (default 0.5,0.1,0.01)"},
                   {"wr-n", "orbit length for the WR statistic (default 100000)"},
                   {"levels", "nest levels for e_n and the taxonomy (default 6)"},
                   {"tail-fraction", "liminf window start as a fraction of N (default 0.5)"},
                   {"consts", "classifier constants file"}}),
             {{"taxonomy", "label the enumerated branches"}}},
            {"transversality", "Tsujii sum along a parameter direction",
             with({{"direction", "comma-separated direction (default first parameter)"},
                   {"terms", "number of terms (default 60)"}}),
             {}},
            {"kneading", "kneading sequence",
             with({{"depth", "symbols (default 60)"},
                   {"compare", "second family spec to order against"}}),
             {}},
            {"straighten", "quadratic representative",
             with({{"depth", "kneading agreement depth (default 60)"},
                   {"tol", "bisection tolerance (default 1e-10)"}}),
             {}},
            {"classify", "verdict for one parameter", with({}), {}, true},
            {"scan", "classify sampled parameters",
             with({{"window", "one range or value per parameter, e.g. a=1.5:2,eps=0", true},
                   {"samples", "number of samples", true},
                   {"base", "point the random lines pass through (multi-parameter windows)"},
                   {"seed", "random seed (default 42)"},
                   {"jobs", "worker threads (default: OpenMP default)"},
                   {"sampling", "uniform or stratified (default uniform)"},
                   {"lines", "random lines for multi-parameter windows (default 16)"}}),
             {},
             true},
            {"window", "phase-parameter window J_n around a parameter",
             with({{"level", "nest level n (default 1)"},
                   {"tol", "endpoint tolerance (default 1e-9)"},
                   {"max-step", "largest probe step (default 2.5e-7)"},
                   {"param", "parameter to vary (default the first)"}}),
             {},
             true},
        };
    }();
    return table;
}

const CommandSpec& command(const std::string& name) {
    for (const auto& c : commands()) {
        if (c.name == name) {
            return c;
        }
    }
    throw UsageError("unknown subcommand '" + name + "'");
}

// ---------------------------------------------------------------------------
// Value access with flag-naming errors

struct Args {
    const Invocation& inv;

    [[nodiscard]] bool has(const std::string& k) const { return inv.options.count(k) > 0; }
    [[nodiscard]] std::string str(const std::string& k, const std::string& def = "") const {
        const auto it = inv.options.find(k);
        return it == inv.options.end() ? def : it->second;
    }
    template <class F>
    auto guarded(const std::string& k, F&& f) const {
        try {
            return f(inv.options.at(k));
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError("--" + k + ": " + e.what());
        }
    }
    [[nodiscard]] long integer(const std::string& k, long def, long min = 1) const {
        if (!has(k)) {
            return def;
        }
        const long v = guarded(k, [&](const std::string& s) { return config::to_long(k, s); });
        if (v < min) {
            throw UsageError("--" + k + ": must be >= " + std::to_string(min));
        }
        return v;
    }
    [[nodiscard]] double real(const std::string& k, double def) const {
        if (!has(k)) {
            return def;
        }
        return guarded(k, [&](const std::string& s) { return config::to_double(k, s); });
    }
    [[nodiscard]] double positive(const std::string& k, double def) const {
        const double v = real(k, def);
        if (!(v > 0)) {
            throw UsageError("--" + k + ": must be positive");
        }
        return v;
    }
    [[nodiscard]] std::vector<double> list(const std::string& k, std::vector<double> def) const {
        if (!has(k)) {
            return def;
        }
        return guarded(k, [&](const std::string& s) { return config::to_double_list(k, s); });
    }
};

enum class OutFormat { Json, Csv };

struct Context {
    Invocation inv;
    Args args{inv};
    OutFormat format = OutFormat::Json;
    int bits = numerics::Precision::kDefaultBits;
    scan::Budgets budgets;
    maps::MapFamily family;
    std::vector<double> params; ///< empty when the family was given by name only
    std::optional<maps::MapInstance> instance;
    std::string family_text;

    Context() = default;
    Context(const Context&) = delete;
    Context& operator=(const Context&) = delete;
};

int resolve_bits(const Args& a, const char* env_bits) {
    std::string text;
    std::string origin;
    if (a.has("bits")) {
        text = a.str("bits");
        origin = "--bits";
    } else if (env_bits != nullptr && *env_bits != '\0') {
        text = env_bits;
        origin = "NESTLAB_BITS";
    } else {
        return numerics::Precision::kDefaultBits;
    }
    try {
        const int bits = static_cast<int>(config::to_long(origin, text));
        (void)numerics::Precision(bits);
        return bits;
    } catch (const std::exception& e) {
        throw UsageError(origin + ": " + e.what());
    }
}

void resolve(Context& ctx, const Invocation& inv, const char* env_bits) {
    ctx.inv = inv;
    const Args& a = ctx.args;
    const CommandSpec& spec = command(inv.subcommand);

    const std::string fmt = a.str("format", "json");
    if (fmt == "json") {
        ctx.format = OutFormat::Json;
    } else if (fmt == "csv") {
        ctx.format = OutFormat::Csv;
    } else {
        throw UsageError("--format: expected json or csv, got '" + fmt + "'");
    }
    ctx.bits = resolve_bits(a, env_bits);

    if (a.has("config")) {
        try {
            ctx.budgets.apply(config::load_key_values(a.str("config")));
        } catch (const std::exception& e) {
            throw UsageError("--config: " + std::string(e.what()));
        }
    }
    if (spec.budgets) {
        config::KeyValues kv;
        for (const auto& name : budget_flag_names()) {
            if (a.has(name)) {
                std::string key = name;
                std::replace(key.begin(), key.end(), '-', '_');
                kv[key] = a.str(name);
            }
        }
        try {
            ctx.budgets.apply(kv);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    ctx.budgets.bits = ctx.bits;
    try {
        ctx.budgets.validate();
    } catch (const std::exception& e) {
        throw UsageError(std::string("budgets: ") + e.what());
    }

    ctx.family_text = a.str("family");
    const bool name_only = ctx.family_text.find(':') == std::string::npos;
    try {
        if (name_only && inv.subcommand == "scan") {
            ctx.family = config::parse_family_name(ctx.family_text);
        } else {
            const auto fs = config::parse_family(ctx.family_text);
            ctx.family = fs.family;
            ctx.params = fs.params;
        }
    } catch (const std::exception& e) {
        throw UsageError("--family: " + std::string(e.what()));
    }
    if (!ctx.params.empty() && inv.subcommand != "scan" && inv.subcommand != "classify" &&
        inv.subcommand != "window") {
        try {
            ctx.instance.emplace(ctx.family, ctx.params);
        } catch (const std::exception& e) {
            throw UsageError("--family: " + std::string(e.what()));
        }
    }
}

// ---------------------------------------------------------------------------
// Output helpers

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
template <class T>
json opt(const std::optional<T>& v) {
    if (!v) {
        return nullptr;
    }
    if constexpr (std::is_floating_point_v<T>) {
        return num(*v);
    } else {
        return json(*v);
    }
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char c : s) {
        q += c;
        if (c == '"') {
            q += '"';
        }
    }
    return q + "\"";
}

std::string csv_value(const json& v) {
    if (v.is_null()) {
        return "";
    }
    if (v.is_number_float()) {
        return format_double(v.get<double>());
    }
    if (v.is_string()) {
        return csv_cell(v.get<std::string>());
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_array()) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out += (i ? ";" : "") + csv_value(v[i]);
        }
        return csv_cell(out);
    }
    return csv_cell(v.dump());
}

/// Flat object as a header line and one row.
std::string csv_object(const json& j) {
    std::string head;
    std::string row;
    bool first = true;
    for (const auto& [k, v] : j.items()) {
        head += (first ? "" : ",") + k;
        row += (first ? "" : ",") + csv_value(v);
        first = false;
    }
    return head + "\n" + row + "\n";
}

/// Long format: quantity,index,value.
struct LongTable {
    std::string text = "quantity,index,value\n";
    void add(const std::string& q, const std::string& i, const json& v) {
        text += q + "," + i + "," + csv_value(v) + "\n";
    }
};

json family_json(const Context& ctx) {
    json p = json::object();
    const auto names = ctx.family.parameter_names();
    for (std::size_t i = 0; i < ctx.params.size(); ++i) {
        p[names[i]] = ctx.params[i];
    }
    return {{"family", maps::to_string(ctx.family.id)}, {"params", p}};
}

json start(const Context& ctx) {
    json j = family_json(ctx);
    j["version"] = NESTLAB_VERSION;
    return j;
}

// ---------------------------------------------------------------------------
// Subcommands

std::string cmd_nest(const Context& ctx) {
    const Args& a = ctx.args;
    nest::NestOptions no;
    no.max_levels = static_cast<int>(a.integer("levels", 4));
    no.max_period = static_cast<int>(a.integer("max-period", 64));
    no.limits = ctx.budgets.limits;
    no.limits.min_branch_fraction = a.positive("min-branch", ctx.budgets.limits.min_branch_fraction);
    no.limits.max_return_time = static_cast<int>(a.integer("budget", ctx.budgets.limits.max_return_time));
    if (!(no.limits.min_branch_fraction < 1)) {
        throw UsageError("--min-branch: must be < 1");
    }
    const auto& m = *ctx.instance;
    const nest::Nest nst = nest::build_nest(m, no);

    json levels = json::array();
    for (const auto& L : nst.levels) {
        json br = json::array();
        for (const auto& b : L.branches) {
            br.push_back({{"j", b.j},
                          {"lo", b.interval.lo},
                          {"hi", b.interval.hi},
                          {"r", b.return_time},
                          {"orientation", b.orientation}});
        }
        json tilde = nullptr;
        if (L.tilde_interval) {
            tilde = json::array({L.tilde_interval->lo, L.tilde_interval->hi});
        }
        levels.push_back({{"n", L.n},
                          {"period", L.period},
                          {"interval", json::array({-L.interval.half_width, L.interval.half_width})},
                          {"c_n", opt(L.c)},
                          {"v_n", opt(L.v)},
                          {"s_n", opt(L.s)},
                          {"tau_n", opt(L.tau)},
                          {"central", L.central},
                          {"reliability", nest::to_string(L.reliability)},
                          {"status", nest::to_string(L.status)},
                          {"landing_time", opt(L.landing_time)},
                          {"tilde_interval", tilde},
                          {"branches_truncated", L.branches_truncated},
                          {"branches", br}});
    }
    if (ctx.format == OutFormat::Csv) {
        std::string out = "n,lo,hi,c_n,v_n,s_n,tau_n,central,reliability,j,branch_lo,branch_hi,r\n";
        for (const auto& l : levels) {
            std::string head;
            for (const char* k : {"n"}) {
                head += csv_value(l[k]);
            }
            head += "," + csv_value(l["interval"][0]) + "," + csv_value(l["interval"][1]);
            for (const char* k : {"c_n", "v_n", "s_n", "tau_n", "central", "reliability"}) {
                head += "," + csv_value(l[k]);
            }
            if (l["branches"].empty()) {
                out += head + ",,,,\n";
            }
            for (const auto& b : l["branches"]) {
                out += head + "," + csv_value(b["j"]) + "," + csv_value(b["lo"]) + "," +
                       csv_value(b["hi"]) + "," + csv_value(b["r"]) + "\n";
            }
        }
        return out;
    }
    json j = start(ctx);
    j["status"] = nest::to_string(nst.status);
    j["detail"] = nst.detail;
    j["restrictive"] = {{"period", nst.restrictive.period},
                        {"tower", nst.restrictive.tower},
                        {"half_width", nst.restrictive.interval.half_width},
                        {"max_period_exceeded", nst.restrictive.max_period_exceeded}};
    j["levels"] = levels;
    return j.dump(2) + "\n";
}

std::string cmd_stats(const Context& ctx) {
    const Args& a = ctx.args;
    const auto& m = *ctx.instance;
    const int ce_n = static_cast<int>(a.integer("ce", ctx.budgets.ce_N, 2));
    const int bce_depth = static_cast<int>(a.integer("bce", ctx.budgets.bce_depth));
    const int rec_n = static_cast<int>(a.integer("recurrence", ctx.budgets.recurrence_N, 100));
    const int wr_n = static_cast<int>(a.integer("wr-n", ctx.budgets.wr_N, 1000));
    const auto deltas = a.list("wr", {0.5, 0.1, 0.01});
    const int levels = static_cast<int>(a.integer("levels", ctx.budgets.nest_levels));
    const double tail = a.real("tail-fraction", ctx.budgets.tail_fraction);
    if (bce_depth > 30) {
        throw UsageError("--bce: must be <= 30");
    }
    if (!(tail >= 0 && tail < 1)) {
        throw UsageError("--tail-fraction: must lie in [0, 1)");
    }
    for (double d : deltas) {
        if (!(d > 0)) {
            throw UsageError("--wr: deltas must be positive");
        }
    }
    stats::ClassifierConstants consts;
    if (a.has("consts")) {
        try {
            consts = constants_from(config::load_key_values(a.str("consts")));
        } catch (const std::exception& e) {
            throw UsageError("--consts: " + std::string(e.what()));
        }
    }

    nest::NestOptions no;
    no.max_levels = levels;
    no.limits = ctx.budgets.limits;
    const bool taxonomy = ctx.inv.flags.count("taxonomy") > 0;
    if (!taxonomy) {
        no.mode = nest::NestMode::CriticalOnly;
        no.compute_tilde = false;
    }
    const nest::Nest nst = nest::build_nest(m, no);

    json ce;
    try {
        const auto s = stats::ce_series(m, ce_n, &nst.levels, tail);
        json e = json::array();
        for (const auto& x : s.e) {
            e.push_back(opt(x));
        }
        json as = json::array();
        for (double x : s.a) {
            as.push_back(num(x));
        }
        ce = {{"N", ce_n}, {"periodic", false}, {"first_zero", nullptr},
              {"liminf", num(s.liminf_estimate)}, {"tail_start", s.tail_start},
              {"a", as}, {"e", e}};
    } catch (const stats::CriticalOrbitPeriodicError& err) {
        ce = {{"N", ce_n}, {"periodic", true}, {"first_zero", err.first_zero()},
              {"liminf", nullptr}, {"tail_start", nullptr}, {"a", json::array()}, {"e", json::array()}};
    }
    const auto rec = stats::recurrence_exponent(m, rec_n);
    json closest = json::array();
    for (const auto& [k, d] : rec.closest_returns) {
        closest.push_back(json::array({k, d}));
    }
    json wr = json::array();
    for (const auto& row : stats::wr_statistic(m, wr_n, deltas)) {
        wr.push_back({{"delta", row.delta}, {"value", num(row.value)}, {"returns", row.returns}});
    }
    json bce = json::array();
    for (const auto& row : stats::bce_min_exponent(m, bce_depth)) {
        bce.push_back({{"n", row.n}, {"min_exponent", num(row.min_exponent)},
                       {"argmin", row.argmin}, {"preimages", row.preimages}});
    }
    json tax = nullptr;
    if (taxonomy) {
        const auto t = stats::classify_branches(m, nst, {}, consts);
        json br = json::array();
        for (const auto& b : t.branches) {
            br.push_back({{"level", b.level}, {"j", b.j}, {"lambda", num(b.lambda)},
                          {"label", stats::to_string(b.label)}, {"good", b.good},
                          {"failed", b.failed}});
        }
        tax = {{"n0", t.n0}, {"lambda_n0", num(t.lambda_n0)}, {"branches", br}};
    }

    if (ctx.format == OutFormat::Csv) {
        LongTable t;
        t.add("ce_liminf", "", ce["liminf"]);
        for (std::size_t k = 0; k < ce["a"].size(); ++k) {
            t.add("ce_a", std::to_string(k + 1), ce["a"][k]);
        }
        for (std::size_t n = 0; n < ce["e"].size(); ++n) {
            t.add("ce_e", std::to_string(n + 1), ce["e"][n]);
        }
        t.add("recurrence_exponent", "", rec.periodic ? json(nullptr) : num(rec.fitted_exponent));
        for (const auto& row : wr) {
            t.add("wr", format_double(row["delta"].get<double>()), row["value"]);
        }
        for (const auto& row : bce) {
            t.add("bce", std::to_string(row["n"].get<int>()), row["min_exponent"]);
        }
        if (!tax.is_null()) {
            for (const auto& b : tax["branches"]) {
                t.add("label", std::to_string(b["level"].get<int>()) + ":" +
                                   std::to_string(b["j"].get<int>()),
                      b["label"]);
            }
        }
        return t.text;
    }
    json j = start(ctx);
    j["ce"] = ce;
    j["recurrence"] = {{"N", rec_n},
                       {"exponent", rec.periodic ? json(nullptr) : num(rec.fitted_exponent)},
                       {"fit_points", rec.fit_points},
                       {"non_recurrent", rec.non_recurrent},
                       {"periodic", rec.periodic},
                       {"closest_returns", closest}};
    j["wr"] = {{"N", wr_n}, {"rows", wr}};
    j["bce"] = bce;
    j["nest_levels"] = nst.levels.size();
    j["taxonomy"] = tax;
    j["constants"] = constants_to_key_values(consts);
    return j.dump(2) + "\n";
}

std::string cmd_transversality(const Context& ctx) {
    const Args& a = ctx.args;
    const auto dim = static_cast<std::size_t>(ctx.family.parameter_dim());
    std::vector<double> def(dim, 0.0);
    def[0] = 1.0;
    const auto dir = a.list("direction", def);
    if (dir.size() != dim) {
        throw UsageError("--direction: needs " + std::to_string(dim) + " components");
    }
    const int terms = static_cast<int>(a.integer("terms", 60));
    const auto ts = transversality::tsujii_sum(ctx.family, ctx.params, dir, terms);
    const auto sc = transversality::summability_check(*ctx.instance, terms);
    json partial = json::array();
    for (double x : ts.partial_sums) {
        partial.push_back(num(x));
    }
    json j = start(ctx);
    j["direction"] = dir;
    j["terms"] = terms;
    j["value"] = num(ts.value);
    j["tail_bound"] = num(ts.tail_bound);
    j["converged"] = ts.converged;
    j["transverse"] = ts.transverse;
    j["verdict"] = ts.transverse ? "Transverse" : "Inconclusive";
    j["partial_sums"] = partial;
    j["summability"] = {{"partial_sum", num(sc.partial_sum)},
                        {"decay_ratio", num(sc.decay_ratio)},
                        {"tail_bound", num(sc.tail_bound)},
                        {"geometric_tail", sc.geometric_tail}};
    if (ctx.format == OutFormat::Csv) {
        LongTable t;
        t.add("value", "", j["value"]);
        t.add("tail_bound", "", j["tail_bound"]);
        t.add("verdict", "", j["verdict"]);
        for (std::size_t k = 0; k < partial.size(); ++k) {
            t.add("partial_sum", std::to_string(k), partial[k]);
        }
        return t.text;
    }
    return j.dump(2) + "\n";
}

json kneading_json(const kneading::KneadingSequence& k) {
    json suffix = nullptr;
    if (k.periodic_suffix) {
        suffix = {{"start", k.periodic_suffix->first}, {"period", k.periodic_suffix->second}};
    }
    return {{"sequence", k.str()}, {"depth", k.depth}, {"truncated", k.truncated},
            {"periodic_suffix", suffix}};
}

std::string cmd_kneading(const Context& ctx) {
    const Args& a = ctx.args;
    const int depth = static_cast<int>(a.integer("depth", 60));
    const auto k = kneading::kneading_sequence(*ctx.instance, depth);
    json j = start(ctx);
    j["kneading"] = kneading_json(k);
    j["comparison"] = nullptr;
    if (a.has("compare")) {
        std::optional<maps::MapInstance> other;
        try {
            other.emplace(config::parse_family(a.str("compare")).instance());
        } catch (const std::exception& e) {
            throw UsageError("--compare: " + std::string(e.what()));
        }
        const auto k2 = kneading::kneading_sequence(*other, depth);
        const auto c = kneading::compare(k, k2);
        j["comparison"] = {{"other", a.str("compare")}, {"other_kneading", kneading_json(k2)},
                           {"order", c.order}, {"position", c.position}, {"both_c", c.both_c}};
    }
    if (ctx.format == OutFormat::Csv) {
        std::string out = "index,symbol\n";
        for (std::size_t i = 0; i < k.symbols.size(); ++i) {
            out += std::to_string(i + 1) + "," + static_cast<char>(k.symbols[i]) + "\n";
        }
        return out;
    }
    return j.dump(2) + "\n";
}

std::string cmd_straighten(const Context& ctx) {
    const Args& a = ctx.args;
    const int depth = static_cast<int>(a.integer("depth", 60));
    const double tol = a.positive("tol", 1e-10);
    const auto s = kneading::straighten(*ctx.instance, depth, tol);
    json conj = nullptr;
    try {
        const auto c = kneading::conjugacy_check(*ctx.instance, maps::MapInstance::quadratic(s.a), depth);
        conj = {{"agree", c.agree}, {"disagree_at", c.disagree_at}, {"depth", c.depth}};
    } catch (const Error& e) {
        conj = {{"error", std::string(to_string(e.code()))}};
    }
    json j = start(ctx);
    j["a"] = s.a;
    j["quadratic"] = "quadratic:a=" + format_double(s.a);
    j["agreement_depth"] = s.agreement_depth;
    j["bracket_width"] = num(s.bracket_width);
    j["truncated_by_c"] = s.truncated_by_c;
    j["multiplier_refined"] = s.multiplier_refined;
    j["period"] = opt(s.period);
    j["multiplier"] = opt(s.multiplier);
    j["conjugacy"] = conj;
    if (ctx.format == OutFormat::Csv) {
        json flat = j;
        flat.erase("params");
        flat.erase("conjugacy");
        return csv_object(flat);
    }
    return j.dump(2) + "\n";
}

scan::ScanRecord single_record(const Context& ctx) {
    scan::ScanRecord r;
    r.params = ctx.params;
    if (ctx.family.id == maps::FamilyId::Quadratic || ctx.family.id == maps::FamilyId::PerturbedQuadratic) {
        r.a = ctx.params[0];
        r.t = maps::t_from_a(ctx.params[0]);
    } else if (ctx.family.id == maps::FamilyId::NormalizedQuadratic) {
        r.t = ctx.params[0];
        r.a = maps::a_from_t(ctx.params[0]);
    }
    r.cls = scan::classify_parameter(ctx.family, ctx.params, ctx.budgets);
    return r;
}

std::string cmd_classify(const Context& ctx) {
    const auto r = single_record(ctx);
    if (ctx.format == OutFormat::Csv) {
        return scan::csv_header(ctx.family) + "\n" + scan::to_csv_row(r) + "\n";
    }
    json j = start(ctx);
    const json rec = json::parse(scan::to_json_line(r, ctx.family));
    for (const auto& [k, v] : rec.items()) {
        if (k != "params") {
            j[k] = v;
        }
    }
    return j.dump(2) + "\n";
}

json summary_json(const scan::ScanSummary& s) {
    using scan::Verdict;
    return {{"total", s.total},
            {"regular", s.regular},
            {"ce_candidate", s.ce_candidate},
            {"renormalizable", s.renormalizable},
            {"undetermined", s.undetermined},
            {"computed", s.computed},
            {"resumed", s.resumed},
            {"fractions",
             {{"regular", s.fraction(Verdict::Regular)},
              {"ce_candidate", s.fraction(Verdict::CECandidate)},
              {"renormalizable", s.fraction(Verdict::Renormalizable)},
              {"undetermined", s.fraction(Verdict::Undetermined)}}}};
}

std::string cmd_scan(const Context& ctx, std::ostream& err) {
    const Args& a = ctx.args;
    scan::ScanWindow w;
    try {
        w.ranges = config::parse_window(ctx.family, a.str("window"));
    } catch (const std::exception& e) {
        throw UsageError("--window: " + std::string(e.what()));
    }
    if (a.has("base")) {
        try {
            w.base = config::parse_point(ctx.family, a.str("base"));
        } catch (const std::exception& e) {
            throw UsageError("--base: " + std::string(e.what()));
        }
    } else if (!ctx.params.empty()) {
        w.base = ctx.params;
    }
    scan::ScanOptions opt;
    opt.samples = a.integer("samples", 1);
    opt.seed = static_cast<std::uint64_t>(a.integer("seed", 42, 0));
    opt.jobs = static_cast<int>(a.integer("jobs", 0, 0));
    opt.lines = static_cast<int>(a.integer("lines", 16));
    try {
        opt.sampling = scan::sampling_from_string(a.str("sampling", "uniform"));
    } catch (const std::exception& e) {
        throw UsageError("--sampling: " + std::string(e.what()));
    }

    if (a.has("out")) {
        const auto s = scan::scan_to_file(ctx.family, w, ctx.budgets, opt, a.str("out"));
        if (ctx.format == OutFormat::Csv) {
            json flat = summary_json(s);
            flat.erase("fractions");
            return csv_object(flat);
        }
        json j = family_json(ctx);
        j["version"] = NESTLAB_VERSION;
        j["window"] = config::render_window(ctx.family, w.ranges);
        j["samples"] = opt.samples;
        j["seed"] = opt.seed;
        j["out"] = a.str("out");
        j["summary"] = summary_json(s);
        return j.dump(2) + "\n";
    }
    const auto recs = scan::scan_range(ctx.family, w, ctx.budgets, opt);
    const auto s = scan::summarize(recs);
    err << "scan: " << s.total << " samples, " << s.regular << " Regular, " << s.ce_candidate
        << " CECandidate, " << s.renormalizable << " Renormalizable, " << s.undetermined
        << " Undetermined\n";
    std::string out;
    if (ctx.format == OutFormat::Csv) {
        out = scan::csv_header(ctx.family) + "\n";
        for (const auto& r : recs) {
            out += scan::to_csv_row(r) + "\n";
        }
    } else {
        for (const auto& r : recs) {
            out += scan::to_json_line(r, ctx.family) + "\n";
        }
    }
    return out;
}

std::string cmd_window(const Context& ctx) {
    const Args& a = ctx.args;
    const int level = static_cast<int>(a.integer("level", 1));
    const double tol = a.positive("tol", 1e-9);
    const double max_step = a.positive("max-step", std::max(2.5e-7, tol));
    int index = 0;
    if (a.has("param")) {
        const auto names = ctx.family.parameter_names();
        const auto it = std::find(names.begin(), names.end(), a.str("param"));
        if (it == names.end()) {
            throw UsageError("--param: unknown parameter '" + a.str("param") + "'");
        }
        index = static_cast<int>(it - names.begin());
    }
    if (max_step < tol) {
        throw UsageError("--max-step: must be >= --tol");
    }
    const auto w = scan::parameter_window(ctx.family, ctx.params, level, tol, index, ctx.budgets, max_step);
    json j = start(ctx);
    j["level"] = level;
    j["param"] = ctx.family.parameter_names()[static_cast<std::size_t>(index)];
    j["base"] = w.base;
    j["lo"] = w.lo;
    j["hi"] = w.hi;
    j["lo_out"] = w.lo_out;
    j["hi_out"] = w.hi_out;
    j["signature"] = w.signature;
    j["degenerate"] = w.degenerate;
    j["window_tol"] = tol;
    j["max_step"] = max_step;
    if (ctx.format == OutFormat::Csv) {
        json flat = j;
        flat.erase("params");
        return csv_object(flat);
    }
    return j.dump(2) + "\n";
}

std::string execute(const Context& ctx, std::ostream& err) {
    const std::string& c = ctx.inv.subcommand;
    if (c == "nest") {
        return cmd_nest(ctx);
    }
    if (c == "stats") {
        return cmd_stats(ctx);
    }
    if (c == "transversality") {
        return cmd_transversality(ctx);
    }
    if (c == "kneading") {
        return cmd_kneading(ctx);
    }
    if (c == "straighten") {
        return cmd_straighten(ctx);
    }
    if (c == "classify") {
        return cmd_classify(ctx);
    }
    if (c == "scan") {
        return cmd_scan(ctx, err);
    }
    return cmd_window(ctx);
}

// ---------------------------------------------------------------------------
// Grammar

struct Bound {
    CLI::App app{"nestlab: principal nests and parameter scans for unimodal maps", "nestlab"};
    std::map<std::string, std::map<std::string, std::string>> values;
    std::map<std::string, std::map<std::string, CLI::Option*>> handles;
    std::map<std::string, std::map<std::string, bool>> switches;
    std::map<std::string, CLI::App*> subs;

    Bound() {
        app.require_subcommand(1);
        app.set_version_flag("--version", NESTLAB_VERSION);
        for (const auto& c : commands()) {
            CLI::App* sub = app.add_subcommand(c.name, c.help);
            subs[c.name] = sub;
            auto add = [&](const OptionSpec& o) {
                auto* h = sub->add_option("--" + o.name, values[c.name][o.name], o.help);
                if (o.required) {
                    h->required();
                }
                handles[c.name][o.name] = h;
            };
            for (const auto& o : c.options) {
                add(o);
            }
            if (c.budgets) {
                for (const auto& name : budget_flag_names()) {
                    add({name, "budget override (see --version for the default)"});
                }
            }
            for (const auto& f : c.flags) {
                switches[c.name][f.name] = false;
                sub->add_flag("--" + f.name, switches[c.name][f.name], f.help);
            }
        }
    }
};

} // namespace

std::vector<std::string> subcommands() {
    std::vector<std::string> out;
    for (const auto& c : commands()) {
        out.push_back(c.name);
    }
    return out;
}

Invocation parse(const std::vector<std::string>& args) {
    Bound b;
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        b.app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    Invocation inv;
    for (const auto& [name, sub] : b.subs) {
        if (sub->parsed()) {
            inv.subcommand = name;
        }
    }
    for (const auto& [k, h] : b.handles[inv.subcommand]) {
        if (h->count() > 0) {
            inv.options[k] = b.values[inv.subcommand][k];
        }
    }
    for (const auto& [k, on] : b.switches[inv.subcommand]) {
        if (on) {
            inv.flags.insert(k);
        }
    }
    return inv;
}

std::vector<std::string> render(const Invocation& inv) {
    std::vector<std::string> out{inv.subcommand};
    for (const auto& [k, v] : inv.options) {
        out.push_back("--" + k);
        out.push_back(v);
    }
    for (const auto& f : inv.flags) {
        out.push_back("--" + f);
    }
    return out;
}

stats::ClassifierConstants constants_from(const config::KeyValues& kv) {
    stats::ClassifierConstants c;
    for (const auto& [k, v] : kv) {
        if (k == "gamma") {
            c.gamma = config::to_double(k, v);
        } else if (k == "b") {
            c.b = config::to_double(k, v);
        } else if (k == "b_tilde") {
            c.b_tilde = config::to_double(k, v);
        } else if (k == "a") {
            c.a = config::to_double(k, v);
        } else if (k == "a_tilde") {
            c.a_tilde = config::to_double(k, v);
        } else if (k == "n0") {
            if (v != "auto") {
                c.n0 = static_cast<int>(config::to_long(k, v));
            }
        } else if (k == "sparse_factor") {
            c.sparse_factor = config::to_double(k, v);
        } else if (k == "sparse_base") {
            c.sparse_base = config::to_double(k, v);
        } else {
            throw Error(ErrorCode::ParseError, "unknown constant '" + k + "'");
        }
    }
    // a and a_tilde follow b and b_tilde unless given.
    if (kv.count("a") == 0) {
        c.a = 1.0 / c.b;
    }
    if (kv.count("a_tilde") == 0) {
        c.a_tilde = 1.0 / c.b_tilde;
    }
    c.validate();
    return c;
}

config::KeyValues constants_to_key_values(const stats::ClassifierConstants& c) {
    return {{"gamma", format_double(c.gamma)},
            {"b", format_double(c.b)},
            {"b_tilde", format_double(c.b_tilde)},
            {"a", format_double(c.a)},
            {"a_tilde", format_double(c.a_tilde)},
            {"n0", c.n0 ? std::to_string(*c.n0) : "auto"},
            {"sparse_factor", format_double(c.sparse_factor)},
            {"sparse_base", format_double(c.sparse_base)}};
}

std::string version_text() {
    std::string out = std::string("nestlab ") + NESTLAB_VERSION + "\n";
    for (const auto& [k, v] : scan::Budgets{}.to_key_values()) {
        out += "budget." + k + " = " + v + "\n";
    }
    for (const auto& [k, v] : constants_to_key_values({})) {
        out += "consts." + k + " = " + v + "\n";
    }
    out += "kneading.c_tolerance = 1e3 eps half_width\n";
    out += "nest.unreliable_below = 1e3 eps half_width\n";
    out += "scan.seed = 42\n";
    out += "scan.lines = 16\n";
    out += "scan.schema_version = " + std::to_string(scan::kSchemaVersion) + "\n";
    out += "straighten.depth = 60\n";
    out += "straighten.tol = 1e-10\n";
    out += "window.tol = 1e-9\n";
    out += "window.max_step = 2.5e-07\n";
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const char* env_bits) {
    if (args.size() == 1 && args[0] == "--version") {
        out << version_text();
        return kExitOk;
    }
    for (const auto& a : args) {
        if (a == "--help" || a == "-h") {
            Bound b;
            const CLI::App* target = &b.app;
            if (!args.empty() && b.subs.count(args[0])) {
                target = b.subs[args[0]];
            }
            out << target->help();
            return kExitOk;
        }
    }
    Context ctx;
    try {
        resolve(ctx, parse(args), env_bits);
    } catch (const std::exception& e) {
        err << "nestlab: usage error: " << e.what() << "\n";
        if (args.empty()) {
            err << "subcommands:";
            for (const auto& s : subcommands()) {
                err << " " << s;
            }
            err << "\n";
        }
        return kExitUsage;
    }
    std::string data;
    try {
        data = execute(ctx, err);
    } catch (const UsageError& e) {
        err << "nestlab: usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "nestlab: " << ctx.inv.subcommand << " failed: " << e.what() << "\n";
        return kExitFailure;
    }
    if (ctx.args.has("out") && ctx.inv.subcommand != "scan") {
        std::ofstream f(ctx.args.str("out"), std::ios::binary | std::ios::trunc);
        f << data;
        if (!f) {
            err << "nestlab: cannot write " << ctx.args.str("out") << "\n";
            return kExitFailure;
        }
        return kExitOk;
    }
    out << data;
    return kExitOk;
}

} // namespace nestlab::cli
