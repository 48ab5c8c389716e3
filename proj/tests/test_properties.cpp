#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "nestlab/cli.hpp"
#include "nestlab/config.hpp"
#include "nestlab/kneading.hpp"
#include "nestlab/maps.hpp"
#include "nestlab/nest.hpp"
#include "nestlab/numerics.hpp"
#include "nestlab/scan.hpp"
#include "nestlab/stats.hpp"
#include "nestlab/transversality.hpp"

// Randomized invariant suites: 10^4 cases each from a fixed seed. Each
// property counts its failures and reports the first counterexample.

using namespace nestlab;

namespace {

constexpr int kCases = 10000;
constexpr std::uint64_t kSeed = 0x6e6573746c6162ULL;

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t salt) : rng(kSeed ^ (salt * 0x9e3779b97f4a7c15ULL)) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin() { return (rng() & 1) != 0; }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

    /// Instance from every built-in family.
    maps::MapInstance instance() {
        switch (integer(0, 3)) {
        case 0:
            return maps::MapInstance::quadratic(uniform(maps::kMinA, maps::kMaxA));
        case 1:
            return maps::MapInstance::normalized_quadratic_t(uniform(-1.0, 1.0));
        case 2:
            // Draws with f(0) > 1 leave the interval; redraw.
            for (;;) {
                try {
                    return maps::MapInstance::perturbed_quadratic(uniform(0.5, 2.0), uniform(-0.1, 0.1));
                } catch (const Error&) {
                }
            }
        default: {
            // -1 + c1 u + c2 u^2 with c1 + c2 = 2 keeps f(0) = 1.
            const double c2 = uniform(-0.2, 0.2);
            return maps::MapInstance::polynomial({2.0 - c2, c2});
        }
        }
    }
};

struct Tally {
    int checked = 0;
    int failed = 0;
    std::string first;

    void check(bool ok, const std::function<std::string()>& describe) {
        ++checked;
        if (!ok && failed++ == 0) {
            first = describe();
        }
    }
};

std::string fmt(std::initializer_list<std::pair<const char*, double>> kv) {
    std::ostringstream s;
    s.precision(17);
    for (const auto& [k, v] : kv) {
        s << k << '=' << v << ' ';
    }
    return s.str();
}

#define REPORT(t)                                                                                   \
    do {                                                                                            \
        INFO("first counterexample: " << (t).first);                                               \
        CHECK((t).failed == 0);                                                                     \
        CHECK((t).checked >= kCases);                                                               \
    } while (0)

} // namespace

TEST_CASE("property: bisection brackets shrink to tol around a sign change") {
    Gen g(1);
    Tally t;
    for (int i = 0; i < kCases; ++i) {
        const double lo = g.uniform(-10.0, 0.0);
        const double hi = lo + g.log_uniform(1e-6, 20.0);
        const double r = g.uniform(lo, hi);
        const double k = g.uniform(0.0, 5.0);
        const double s = g.coin() ? 1.0 : -1.0;
        auto fn = [=](double x) { return s * (x - r) * (1.0 + k * (x - r) * (x - r)); };
        const double tol = g.log_uniform(1e-13, 1e-3) * (hi - lo);
        const auto b = numerics::Bracket::certify(fn, lo, hi);
        const auto res = numerics::bisect(fn, b, tol);
        const bool exact = fn(res.root) == 0.0;
        const bool width = res.hi - res.lo <= tol;
        const bool change = numerics::sign_of(fn(res.lo)) != numerics::sign_of(fn(res.hi));
        t.check(exact || (width && change && res.lo <= res.root && res.root <= res.hi),
                [&] { return fmt({{"lo", lo}, {"hi", hi}, {"r", r}, {"tol", tol}}); });
    }
    REPORT(t);
}

TEST_CASE("property: log-derivative accumulation is additive") {
    Gen g(2);
    Tally t;
    auto draw = [&](std::vector<double>& v) {
        v.resize(static_cast<std::size_t>(g.integer(0, 60)));
        for (auto& f : v) {
            f = (g.coin() ? 1.0 : -1.0) * g.log_uniform(1e-4, 1e4);
            if (g.integer(0, 200) == 0) {
                f = 0.0;
            }
        }
    };
    std::vector<double> s1;
    std::vector<double> s2;
    for (int i = 0; i < kCases; ++i) {
        draw(s1);
        draw(s2);
        std::vector<double> both(s1);
        both.insert(both.end(), s2.begin(), s2.end());
        const auto p1 = numerics::accumulate_log_derivative(s1);
        const auto p2 = numerics::accumulate_log_derivative(s2);
        const auto p = numerics::accumulate_log_derivative(both);
        bool ok = p.term_count == p1.term_count + p2.term_count;
        if (p1.is_zero() || p2.is_zero()) {
            ok = ok && p.is_zero() && std::isinf(p.log_abs);
        } else {
            double mag = 0.0;
            for (double f : both) {
                mag += std::abs(std::log(std::abs(f)));
            }
            const double ulps = static_cast<double>(both.size() + 1) * 2.3e-16 * std::max(1.0, mag);
            ok = ok && std::abs(p.log_abs - (p1.log_abs + p2.log_abs)) <= ulps &&
                 static_cast<int>(p.sign) == static_cast<int>(p1.sign) * static_cast<int>(p2.sign);
        }
        t.check(ok, [&] { return fmt({{"n1", double(s1.size())}, {"n2", double(s2.size())}}); });
    }
    REPORT(t);
}

TEST_CASE("property: built-in maps are even") {
    Gen g(3);
    Tally t;
    const double eps = numerics::Precision().epsilon();
    for (int i = 0; i < kCases; ++i) {
        const auto m = g.instance();
        const double x = g.uniform(-1.0, 1.0) * m.half_width();
        const double d = std::abs(m.value(-x) - m.value(x));
        t.check(d <= 10.0 * eps * m.half_width(), [&] { return m.describe() + " " + fmt({{"x", x}, {"d", d}}); });
    }
    REPORT(t);
}

TEST_CASE("property: chain rule for log derivatives") {
    Gen g(4);
    Tally t;
    while (t.checked < kCases) {
        const auto m = g.instance();
        const double x = g.uniform(-1.0, 1.0) * m.half_width();
        const int a = g.integer(0, 30);
        const int b = g.integer(0, 30);
        // Orbits passing near the critical point have a vanishing factor.
        bool degenerate = false;
        double y = x;
        for (int k = 0; k < a + b; ++k, y = m.value(y)) {
            degenerate = degenerate || std::abs(y) < 1e-8 * m.half_width();
        }
        if (degenerate) {
            continue;
        }
        const auto whole = nest::log_derivative(m, x, a + b);
        const auto head = nest::log_derivative(m, x, a);
        const auto tail = nest::log_derivative(m, nest::iterate(m, x, a), b);
        const bool ok = std::abs(whole.log_abs - (head.log_abs + tail.log_abs)) <= 1e-9 &&
                        static_cast<int>(whole.sign) == static_cast<int>(head.sign) * static_cast<int>(tail.sign);
        t.check(ok, [&] { return m.describe() + " " + fmt({{"x", x}, {"m", a}, {"n", b}}); });
    }
    REPORT(t);
}

TEST_CASE("property: affine conjugacy preserves critical-orbit derivatives") {
    Gen g(5);
    Tally t;
    while (t.checked < kCases) {
        const double a = g.uniform(maps::kMinA, maps::kMaxA);
        const int k = g.integer(1, 30);
        const auto raw = maps::iterate_critical_orbit(maps::MapInstance::quadratic(a), k + 1);
        const auto nrm = maps::iterate_critical_orbit(maps::MapInstance::normalized_quadratic_a(a), k + 1);
        const auto& lr = raw.log_derivatives[static_cast<std::size_t>(k)];
        const auto& ln = nrm.log_derivatives[static_cast<std::size_t>(k)];
        if (lr.is_zero() || ln.is_zero()) {
            continue;
        }
        // Rounding differences between the two coordinate systems grow like
        // |Df^i| / |f^{i+1}(0)|; compare where that stays below the tolerance.
        double amp = 0.0;
        for (int i = 0; i <= k; ++i) {
            const double x = std::abs(raw.points[static_cast<std::size_t>(i + 1)]);
            const auto& d = raw.log_derivatives[static_cast<std::size_t>(i)];
            amp = std::max(amp, std::exp(d.log_abs) / std::max(x, 1e-300));
        }
        if (amp * 1e-16 * k > 1e-10) {
            continue;
        }
        t.check(std::abs(lr.log_abs - ln.log_abs) <= 1e-9 && lr.sign == ln.sign,
                [&] { return fmt({{"a", a}, {"k", k}, {"raw", lr.log_abs}, {"norm", ln.log_abs}}); });
    }
    REPORT(t);
}

TEST_CASE("property: CE averages reconstruct single-step derivatives") {
    Gen g(6);
    Tally t;
    while (t.checked < kCases) {
        const double a = g.uniform(1.0, maps::kMaxA);
        const auto m = maps::MapInstance::quadratic(a);
        stats::CESeries ce;
        try {
            ce = stats::ce_series(m, 200);
        } catch (const Error&) {
            continue;
        }
        for (int c = 0; c < 50; ++c) {
            const int k = g.integer(2, 200);
            const double y = nest::iterate(m, 0.0, k);
            const double lhs = k * ce.at(k) - (k - 1) * ce.at(k - 1);
            const double rhs = std::log(std::abs(m.derivative(y)));
            const double scale = 2.3e-16 * k * std::max(1.0, std::abs(ce.at(k)));
            t.check(std::abs(lhs - rhs) <= 1e-9 + 4 * scale, [&] { return fmt({{"a", a}, {"k", k}}); });
        }
    }
    REPORT(t);
}

TEST_CASE("property: kneading is monotone in the quadratic parameter") {
    Gen g(7);
    Tally t;
    while (t.checked < kCases) {
        double a1 = g.uniform(maps::kMinA, maps::kMaxA);
        double a2 = g.coin() ? g.uniform(maps::kMinA, maps::kMaxA)
                             : std::clamp(a1 + g.log_uniform(1e-6, 1e-1), maps::kMinA, maps::kMaxA);
        if (a1 > a2) {
            std::swap(a1, a2);
        }
        const auto k1 = kneading::kneading_sequence(maps::MapInstance::quadratic(a1), 24);
        const auto k2 = kneading::kneading_sequence(maps::MapInstance::quadratic(a2), 24);
        if (k1.truncated || k2.truncated) {
            continue;
        }
        const auto c = kneading::compare(k1, k2);
        t.check(c.order <= 0, [&] { return fmt({{"a1", a1}, {"a2", a2}}) + k1.str() + " " + k2.str(); });
    }
    REPORT(t);
}

TEST_CASE("property: branch taxonomy labels are nested") {
    Gen g(8);
    Tally words;
    Tally branches;
    for (double a : {1.8, 1.9, 1.95}) {
        const auto m = maps::MapInstance::normalized_quadratic_a(a);
        const auto nest = nest::build_nest(m, {.max_levels = 3});
        REQUIRE(nest.levels.size() >= 2);
        stats::ClassifierConstants k;
        k.n0 = 1;
        k.b = g.uniform(4.0, 12.0);
        k.b_tilde = g.uniform(1.5, 4.0);
        k.a = 1.0 / k.b;
        k.a_tilde = 1.0 / k.b_tilde;
        std::vector<std::pair<int, std::vector<int>>> ws;
        for (int i = 0; i < kCases / 3 + 1; ++i) {
            const int n = g.integer(1, static_cast<int>(nest.levels.size()) - 1);
            const auto& L = nest.levels[static_cast<std::size_t>(n - 1)];
            const int nb = std::min(40, static_cast<int>(L.branches.size() / 2));
            std::vector<int> w(static_cast<std::size_t>(g.integer(0, 40)));
            for (auto& j : w) {
                j = (g.coin() ? 1 : -1) * g.integer(1, std::max(1, nb));
            }
            if (!std::all_of(w.begin(), w.end(), [&](int j) { return L.find_branch(j) != nullptr; })) {
                w.clear();
            }
            ws.emplace_back(n, std::move(w));
        }
        const auto tax = stats::classify_branches(m, nest, ws, k);
        for (const auto& w : tax.words) {
            words.check((!w.cool || w.excellent) && (!w.excellent || w.standard),
                        [&] { return fmt({{"a", a}, {"level", w.level}, {"len", double(w.word.size())}}); });
        }
        for (const auto& b : tax.branches) {
            branches.check(!(b.very_good && b.bad),
                           [&] { return fmt({{"a", a}, {"level", b.level}, {"j", b.j}}); });
        }
    }
    REPORT(words);
    CHECK(branches.failed == 0);
}

TEST_CASE("property: distortion is at least one") {
    Gen g(9);
    Tally t;
    const auto m = maps::MapInstance::normalized_quadratic_a(1.9);
    const auto nest = nest::build_nest(m, {.max_levels = 2});
    while (t.checked < kCases) {
        const auto& L = nest.levels[static_cast<std::size_t>(g.integer(0, 1))];
        const int nb = std::min(30, static_cast<int>(L.branches.size() / 2));
        std::vector<int> w(static_cast<std::size_t>(g.integer(0, 3)));
        for (auto& j : w) {
            j = (g.coin() ? 1 : -1) * g.integer(1, nb);
        }
        if (!std::all_of(w.begin(), w.end(), [&](int j) { return L.find_branch(j) != nullptr; })) {
            w.clear();
        }
        stats::Distortion d;
        try {
            d = stats::distortion(m, L, w, 16);
        } catch (const Error&) {
            // Compositions whose domain falls below resolution.
            continue;
        }
        t.check(d.value >= 1.0 && (!w.empty() || d.value == 1.0),
                [&] { return fmt({{"level", L.n}, {"len", double(w.size())}, {"dist", d.value}}); });
    }
    REPORT(t);
}

TEST_CASE("property: capacity bound dominates the relative measure") {
    Gen g(10);
    Tally t;
    for (int i = 0; i < kCases; ++i) {
        std::vector<nest::Interval> X(static_cast<std::size_t>(g.integer(1, 5)));
        for (auto& x : X) {
            const double lo = g.uniform(-0.5, 1.5);
            x = {lo, lo + g.uniform(0.0, 0.5)};
        }
        // Relative measure of the union inside [0, 1].
        std::vector<nest::Interval> c;
        for (const auto& x : X) {
            const double lo = std::max(0.0, x.lo);
            const double hi = std::min(1.0, x.hi);
            if (lo < hi) {
                c.push_back({lo, hi});
            }
        }
        std::sort(c.begin(), c.end(), [](auto& p, auto& q) { return p.lo < q.lo; });
        double measure = 0.0;
        double reach = 0.0;
        for (const auto& x : c) {
            const double lo = std::max(x.lo, reach);
            if (x.hi > lo) {
                measure += x.hi - lo;
            }
            reach = std::max(reach, x.hi);
        }
        const double gamma = g.uniform(1.0, 4.0);
        const double cap = stats::capacity_lower_bound(X, {0.0, 1.0}, gamma, 16);
        t.check(cap >= measure - 1e-12, [&] { return fmt({{"gamma", gamma}, {"cap", cap}, {"measure", measure}}); });
    }
    REPORT(t);
}

TEST_CASE("property: WR rows at smaller radii use a subset of returns") {
    Gen g(11);
    Tally t;
    while (t.checked < kCases) {
        const auto m = maps::MapInstance::normalized_quadratic_a(g.uniform(1.5, 2.0));
        std::vector<double> deltas{g.log_uniform(1e-4, 0.5), g.log_uniform(1e-4, 0.5)};
        if (deltas[0] == deltas[1]) {
            continue;
        }
        std::sort(deltas.rbegin(), deltas.rend());
        std::vector<stats::WRRow> rows;
        try {
            rows = stats::wr_statistic(m, 1000, deltas);
        } catch (const Error&) {
            continue;
        }
        // Every term is ln|Df| < ln(2 delta a) which is negative once delta is small.
        const bool subset = rows[1].returns <= rows[0].returns;
        const bool sign = deltas[1] > 0.2 || rows[1].value <= 0.0;
        t.check(subset && sign, [&] { return fmt({{"d0", deltas[0]}, {"d1", deltas[1]}}); });
    }
    REPORT(t);
}

TEST_CASE("property: transversality sums reconstruct termwise") {
    Gen g(12);
    Tally t;
    while (t.checked < kCases) {
        const auto m = g.instance();
        transversality::PolynomialVectorField v{m.half_width(), {g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1)}};
        const int N = g.integer(10, 40);
        transversality::TransversalitySum r;
        try {
            r = transversality::nu_functional(m, v, N);
        } catch (const Error&) {
            // Periodic or non-summable critical orbits.
            continue;
        }
        double x = m.value(0.0);
        double D = 1.0;
        for (int j = 1; j <= N && t.checked < kCases; ++j) {
            D *= m.derivative(x);
            if (D == 0.0 || !std::isfinite(D)) {
                break;
            }
            const double term = v(x) / D;
            const double hi = r.partial_sums[static_cast<std::size_t>(j)];
            const double diff = hi - r.partial_sums[static_cast<std::size_t>(j - 1)];
            t.check(std::abs(diff - term) <= 1e-9 * std::abs(term) + 4e-16 * std::max(std::abs(hi), 1.0),
                    [&] { return m.describe() + " " + fmt({{"j", j}}); });
            x = m.value(x);
        }
    }
    REPORT(t);
}

TEST_CASE("property: scan records are independent of the worker count") {
    scan::Budgets b;
    b.max_iter = 4000;
    b.max_period = 200;
    b.ce_N = 400;
    b.recurrence_N = 2000;
    b.wr_N = 2000;
    b.bce_depth = 5;
    b.nest_levels = 3;
    scan::ScanWindow w{{{1.5, 2.0}, {0.0, 0.05}}, std::nullopt};
    const auto fam = config::parse_family_name("pquadratic");
    scan::ScanOptions serial{.samples = kCases, .seed = 7, .exec = Exec::Serial};
    scan::ScanOptions parallel = serial;
    parallel.exec = Exec::Parallel;
    parallel.jobs = 4;
    const auto rs = scan::scan_range(fam, w, b, serial);
    const auto rp = scan::scan_range(fam, w, b, parallel);
    REQUIRE(rs.size() == static_cast<std::size_t>(kCases));
    REQUIRE(rp.size() == rs.size());
    Tally t;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        t.check(rs[i] == rp[i] && rs[i].index == static_cast<long>(i),
                [&] { return fmt({{"index", double(i)}}); });
    }
    REPORT(t);
}

TEST_CASE("property: scan records survive CSV and JSON lines") {
    Gen g(13);
    Tally t;
    const auto fam = config::parse_family_name("pquadratic");
    auto opt = [&]() -> std::optional<double> {
        if (g.integer(0, 3) == 0) {
            return std::nullopt;
        }
        return g.uniform(-1e3, 1e3) * std::pow(10.0, g.integer(-12, 3));
    };
    for (int i = 0; i < kCases; ++i) {
        scan::ScanRecord r;
        r.index = g.integer(0, 1 << 30);
        r.params = {g.uniform(0.5, 2.0), g.uniform(-0.1, 0.1)};
        r.a = opt();
        r.t = opt();
        auto& c = r.cls;
        c.verdict = static_cast<scan::Verdict>(g.integer(0, 3));
        c.reason = static_cast<scan::Reason>(g.integer(0, 4));
        c.detail = g.coin() ? "" : "cycle \"p\", with, commas";
        if (g.coin()) {
            c.period = g.integer(1, 1000);
        }
        c.multiplier = opt();
        c.lambda_hat = opt();
        c.recurrence_exponent = opt();
        c.wr = opt();
        c.bce = opt();
        c.c_bound = opt();
        c.nest_depth = g.integer(0, 8);
        c.reliable_levels = g.integer(0, 8);
        c.c.resize(static_cast<std::size_t>(g.integer(0, 6)));
        for (auto& x : c.c) {
            x = g.uniform(0.0, 1.0);
        }
        c.e.resize(static_cast<std::size_t>(g.integer(0, 3)));
        for (auto& x : c.e) {
            x = g.uniform(-1.0, 2.0);
        }
        if (g.coin()) {
            c.flags = {"renormalizable", "borderline"};
        }
        const auto csv = scan::from_csv_row(fam, scan::to_csv_row(r));
        const auto jsl = scan::from_json_line(scan::to_json_line(r, fam));
        t.check(csv == r && jsl == r, [&] { return scan::to_csv_row(r); });
    }
    REPORT(t);
}

TEST_CASE("property: command lines round-trip through render") {
    Gen g(14);
    Tally t;
    const std::vector<std::pair<std::string, std::vector<std::string>>> opts{
        {"nest", {"levels", "min-branch", "budget", "max-period"}},
        {"kneading", {"depth", "compare"}},
        {"classify", {"max-iter", "ce-n", "cycle-tol", "nest-levels"}},
        {"window", {"level", "tol", "max-step", "param", "max-iter"}},
        {"transversality", {"direction", "terms"}},
    };
    const std::vector<std::string> values{"1", "2.5", "-3", "a=1,eps=0", "x y", "1e-7", "quadratic:a=2"};
    for (int i = 0; i < kCases; ++i) {
        const auto& [sub, names] = opts[static_cast<std::size_t>(g.integer(0, static_cast<int>(opts.size()) - 1))];
        cli::Invocation inv;
        inv.subcommand = sub;
        inv.options["family"] = values[static_cast<std::size_t>(g.integer(0, 6))];
        for (const auto& n : names) {
            if (g.coin()) {
                inv.options[n] = values[static_cast<std::size_t>(g.integer(0, 6))];
            }
        }
        if (g.coin()) {
            inv.options["format"] = g.coin() ? "json" : "csv";
        }
        bool ok = false;
        try {
            ok = cli::parse(cli::render(inv)) == inv;
        } catch (const Error&) {
        }
        t.check(ok, [&] {
            std::string s;
            for (const auto& a : cli::render(inv)) {
                s += a + ' ';
            }
            return s;
        });
    }
    REPORT(t);
}

TEST_CASE("property: numbers print in 17 digits and parse back exactly") {
    Gen g(15);
    Tally t;
    for (int i = 0; i < kCases; ++i) {
        double x = 0.0;
        do {
            const std::uint64_t bits = g.rng();
            std::memcpy(&x, &bits, sizeof x);
        } while (!std::isfinite(x));
        const auto s = config::format_double(x);
        const double y = config::to_double("x", s);
        t.check(y == x && std::signbit(x) == std::signbit(y), [&] { return s; });
    }
    REPORT(t);
}
