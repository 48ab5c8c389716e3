// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--unit-tests PATH] [--expect-fail N,...] [--only N,...]
//
// Exit status is the number of failing criteria not listed in --expect-fail.
// Runtimes of single calls are the median of five runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "nestlab/kneading.hpp"
#include "nestlab/maps.hpp"
#include "nestlab/nest.hpp"
#include "nestlab/oracle.hpp"
#include "nestlab/scan.hpp"
#include "nestlab/stats.hpp"
#include "nestlab/transversality.hpp"

using namespace nestlab;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Median wall time of five runs, and the last result.
template <typename F>
auto timed(F&& f, double& ms) {
    std::vector<double> t;
    auto r = f();
    for (int i = 0; i < 5; ++i) {
        const auto t0 = Clock::now();
        r = f();
        t.push_back(ms_since(t0));
    }
    std::sort(t.begin(), t.end());
    ms = t[2];
    return r;
}

std::string num(double x, int digits = 10) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

// 1 --------------------------------------------------------------------------
Outcome ulam_ce() {
    const auto m = maps::MapInstance::normalized_quadratic_a(2.0);
    double ms = 0;
    const auto ce = timed([&] { return stats::ce_series(m, 60); }, ms);
    double worst = 0.0;
    for (double a : ce.a) {
        worst = std::max(worst, std::abs(a - std::log(4.0)));
    }
    return {worst <= 1e-9 && ce.a.size() == 60 && ms < 10,
            "max |a_k - ln4| = " + num(worst, 3) + ", " + num(ms, 3) + " ms"};
}

// 2 --------------------------------------------------------------------------
Outcome tsujii() {
    double ms = 0;
    const auto r = timed([] { return transversality::tsujii_sum({maps::FamilyId::Quadratic}, {2.0}, {1.0}, 60); }, ms);
    const double err = std::abs(r.value - 2.0 / 3.0);
    return {err <= 1e-12 && r.transverse && ms < 10,
            "value " + num(r.value, 17) + ", " + (r.transverse ? "Transverse" : "Inconclusive") + ", " +
                num(ms, 3) + " ms"};
}

// 3 --------------------------------------------------------------------------
Outcome schwarzian() {
    double worst = 0.0;
    int points = 0;
    for (const auto& m : {maps::MapInstance::quadratic(2.0), maps::MapInstance::quadratic(1.3),
                          maps::MapInstance::quadratic(-0.2)}) {
        const double B = m.half_width();
        for (int i = 0; i < 1000; ++i) {
            // 500 points on each side of the hole.
            const double u = (i % 500) / 499.0;
            const double x = (i < 500 ? -1 : 1) * (0.01 + u * (B - 0.01));
            worst = std::max(worst, std::abs(maps::schwarzian(m, x) + 1.5 / (x * x)));
            ++points;
        }
    }
    return {worst <= 1e-9, num(points, 6) + " points, max residual " + num(worst, 3)};
}

// 4 --------------------------------------------------------------------------
Outcome regular() {
    double ms1 = 0;
    double ms0 = 0;
    const auto r1 = timed([] { return kneading::detect_regular(maps::MapInstance::quadratic(1.0)); }, ms1);
    const auto r0 = timed([] { return kneading::detect_regular(maps::MapInstance::quadratic(0.0)); }, ms0);
    const bool ok = r1 && r1->period == 2 && std::abs(r1->multiplier) <= 1e-9 && r0 && r0->period == 1 &&
                    r0->multiplier == 0.0 && ms1 < 10 && ms0 < 10;
    std::string d = "a=1: ";
    d += r1 ? "period " + std::to_string(r1->period) + " mult " + num(r1->multiplier, 3) : "none";
    d += " (" + num(ms1, 3) + " ms); a=0: ";
    d += r0 ? "period " + std::to_string(r0->period) + " mult " + num(r0->multiplier, 3) : "none";
    d += " (" + num(ms0, 3) + " ms)";
    return {ok, d};
}

// 5 --------------------------------------------------------------------------
Outcome ulam_branch() {
    const auto m = maps::MapInstance::normalized_quadratic_a(2.0);
    const auto nest = nest::build_nest(m);
    const auto& L = nest.levels.at(0);
    const auto* b = L.find_branch(1);
    if (b == nullptr) {
        return {false, "branch +1 missing"};
    }
    const double s15 = std::sin(M_PI / 12);
    const double lam_ref = std::log(8 * std::sqrt(3.0) * s15) / 2;
    const double dist_ref = (32 / (3 * std::sqrt(6.0))) / (8 * std::sqrt(3.0) * s15);
    const double lam = stats::branch_hyperbolicity(m, L, 1).lambda;
    const double dist = stats::distortion(m, L, {1}).value;
    const bool ok = std::abs(b->interval.lo - 0.25881905) <= 1e-7 && std::abs(b->interval.hi - 0.5) <= 1e-7 &&
                    b->return_time == 2 && std::abs(lam - lam_ref) <= 1e-5 && std::abs(dist - 1.21425) <= 1e-4;
    return {ok, "[" + num(b->interval.lo) + ", " + num(b->interval.hi) + "] r=" + std::to_string(b->return_time) +
                    " lambda " + num(lam) + " (closed form " + num(lam_ref) + ") Dist " + num(dist)};
}

// 6 --------------------------------------------------------------------------
Outcome grid_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(1.5, 2.0);
    int params = 0;
    int draws = 0;
    int mismatches = 0;
    std::string first;
    while (params < 20 && draws < 1000) {
        ++draws;
        const double a = U(rng);
        const auto m = maps::MapInstance::normalized_quadratic_a(a);
        try {
            if (kneading::detect_regular(m)) {
                continue;
            }
        } catch (const Error&) {
            continue;
        }
        nest::NestOptions opt;
        opt.max_levels = 2;
        const auto nest = nest::build_nest(m, opt);
        // Recurrent: the critical orbit returns to I_2.
        if (nest.levels.size() < 2 || !nest.levels[1].central_interval ||
            nest.levels[1].reliability != nest::Reliability::Reliable) {
            continue;
        }
        ++params;
        for (const auto& L : nest.levels) {
            const double min_len = 1e-5 * L.interval.length();
            const auto grid = oracle::grid_branches(m, L, 1000000, opt.limits.max_return_time, Exec::Parallel, min_len);
            int grid_count = 0;
            auto miss = [&](const std::string& what) {
                if (mismatches++ == 0) {
                    first = "a=" + num(a, 17) + " level " + std::to_string(L.n) + ": " + what;
                }
            };
            for (const auto& g : grid) {
                if (g.hi - g.lo < min_len) {
                    continue;
                }
                if (g.central) {
                    if (!L.central_interval || std::abs(g.hi - L.central_interval->half_width) > 1e-7 ||
                        g.return_time != *L.v) {
                        miss("central branch");
                    }
                    continue;
                }
                ++grid_count;
                const auto* b = L.branch_at(0.5 * (g.lo + g.hi));
                if (b == nullptr || b->return_time != g.return_time || b->orientation != g.orientation ||
                    std::abs(b->interval.lo - g.lo) > 1e-7 || std::abs(b->interval.hi - g.hi) > 1e-7) {
                    miss("branch near " + num(g.lo));
                }
            }
            // The oracle covers (0, p_n]; compare with the positive side.
            const auto table_count = std::count_if(L.branches.begin(), L.branches.end(), [&](const auto& b) {
                return b.j > 0 && b.interval.length() >= min_len;
            });
            if (table_count != grid_count) {
                miss("count " + std::to_string(table_count) + " vs oracle " + std::to_string(grid_count));
            }
        }
    }
    const double s = ms_since(t0) / 1000;
    return {params == 20 && mismatches == 0 && s < 120,
            std::to_string(params) + " parameters, " + std::to_string(mismatches) + " mismatches, " + num(s, 3) +
                " s" + (first.empty() ? "" : "; first: " + first)};
}

// 7 --------------------------------------------------------------------------
// Every preimage of 0 to depth n by explicit sign choices, in long double.
long double exhaustive_bce(int n) {
    long double best = INFINITY;
    for (long code = 0; code < (1L << n); ++code) {
        long double y = 0.0L;
        long double logd = 0.0L;
        bool ok = true;
        for (int k = 0; k < n && ok; ++k) {
            const long double u = (1.0L - y) / 2.0L; // f(x) = 1 - 2x^2
            if (u < 0) {
                ok = false;
                break;
            }
            y = ((code >> k) & 1 ? -1.0L : 1.0L) * std::sqrt(u);
            logd += std::log(std::fabs(4.0L * y));
        }
        if (ok) {
            best = std::min(best, logd / n);
        }
    }
    return best;
}

Outcome bce() {
    const auto m = maps::MapInstance::normalized_quadratic_a(2.0);
    const auto t0 = Clock::now();
    const auto tree = stats::bce_min_exponent(m, 12);
    const double s = ms_since(t0) / 1000;
    const double got = tree.at(11).min_exponent;
    const double target = std::log(2.0) - std::log(std::sqrt(2.0)) / 12;
    const double exhaustive = static_cast<double>(exhaustive_bce(12));
    const bool equal = std::abs(got - exhaustive) <= 1e-10;
    return {std::abs(got - target) <= 1e-6 && equal && s < 5,
            "depth 12 minimum " + num(got) + ", exhaustive " + num(exhaustive) + " (" +
                (equal ? "equal" : "differ") + "), target " + num(target) + ", " + num(s, 3) + " s"};
}

// 8, 9 -----------------------------------------------------------------------
struct ScanRun {
    bool ran = false;
    std::vector<scan::ScanRecord> records;
    bool identical = false;
    double seconds = 0;
    std::string error;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

ScanRun& scan_run() {
    static ScanRun run;
    if (run.ran) {
        return run;
    }
    run.ran = true;
    const auto dir = std::filesystem::temp_directory_path() / ("nestlab_accept_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const maps::MapFamily fam{maps::FamilyId::Quadratic};
    const scan::ScanWindow w{{{1.5, 2.0}}, std::nullopt};
    std::vector<std::string> bytes;
    const auto t0 = Clock::now();
    try {
        for (int jobs : {1, 4, 8}) {
            scan::ScanOptions opt{.samples = 1000, .seed = 42, .jobs = jobs};
            const auto path = dir / ("scan_" + std::to_string(jobs) + ".csv");
            scan::scan_to_file(fam, w, {}, opt, path.string());
            bytes.push_back(slurp(path));
            if (jobs == 1) {
                run.records = scan::read_records(fam, path.string());
            }
        }
        run.identical = bytes[0] == bytes[1] && bytes[0] == bytes[2] && !bytes[0].empty();
    } catch (const std::exception& e) {
        run.error = e.what();
    }
    run.seconds = ms_since(t0) / 1000;
    std::filesystem::remove_all(dir);
    return run;
}

Outcome dichotomy() {
    const auto& run = scan_run();
    if (!run.error.empty()) {
        return {false, run.error};
    }
    const auto s = scan::summarize(run.records);
    const double good = s.fraction(scan::Verdict::Regular) + s.fraction(scan::Verdict::CECandidate);
    const double und = s.fraction(scan::Verdict::Undetermined);
    return {s.total == 1000 && good >= 0.90 && und <= 0.10 && run.identical && run.seconds < 600,
            "Regular+CE " + num(good, 4) + ", Undetermined " + num(und, 4) + ", workers 1/4/8 " +
                (run.identical ? "byte-identical" : "DIFFER") + ", " + num(run.seconds, 3) + " s for 3 runs"};
}

Outcome decay() {
    const auto& run = scan_run();
    if (!run.error.empty()) {
        return {false, run.error};
    }
    int eligible = 0;
    int decays = 0;
    for (const auto& r : run.records) {
        if (r.cls.verdict != scan::Verdict::CECandidate || r.cls.reliable_levels < 3) {
            continue;
        }
        const auto d = scan::deepest_pair_decays(r.cls);
        if (!d) {
            continue;
        }
        ++eligible;
        decays += *d ? 1 : 0;
    }
    const double frac = eligible ? static_cast<double>(decays) / eligible : 0.0;
    return {eligible > 0 && frac >= 0.90,
            std::to_string(decays) + "/" + std::to_string(eligible) + " = " + num(frac, 4)};
}

// 10 -------------------------------------------------------------------------
Outcome wr_ulam() {
    const auto m = maps::MapInstance::normalized_quadratic_a(2.0);
    const auto rows = stats::wr_statistic(m, 100000, {0.5, 0.1, 0.01});
    bool ok = rows.size() == 3;
    std::string d;
    for (const auto& r : rows) {
        ok = ok && r.value == 0.0 && r.returns == 0;
        d += "delta " + num(r.delta) + ": " + num(r.value) + "; ";
    }
    return {ok, d};
}

// 11 -------------------------------------------------------------------------
Outcome straightening() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(maps::kMinA, maps::kMaxA);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double a = U(rng);
        worst = std::max(worst, std::abs(kneading::straighten(maps::MapInstance::quadratic(a)).a - a));
    }
    const auto f = maps::MapInstance::perturbed_quadratic(1.8, 0.05);
    const auto s = kneading::straighten(f);
    const auto q = maps::MapInstance::quadratic(s.a);
    int agreement = 0;
    try {
        const auto c = kneading::conjugacy_check(f, q, 200);
        agreement = c.agree ? c.depth : c.disagree_at - 1;
    } catch (const Error&) {
        agreement = 200;
    }
    return {worst <= 1e-8 && agreement >= 30, "idempotence max error " + num(worst, 3) + "; pquadratic(1.8, 0.05) -> a=" +
                                                  num(s.a, 15) + ", kneading agrees to depth " +
                                                  std::to_string(agreement)};
}

// 12 -------------------------------------------------------------------------
Outcome capacity() {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    bool monotone = true;
    for (int i = 0; i < 50; ++i) {
        std::vector<nest::Interval> X(1 + rng() % 6);
        for (auto& x : X) {
            const double lo = U(rng) * 1.4 - 0.2;
            x = {lo, lo + 0.3 * U(rng)};
        }
        std::vector<std::pair<double, double>> c;
        for (const auto& x : X) {
            if (std::min(1.0, x.hi) > std::max(0.0, x.lo)) {
                c.emplace_back(std::max(0.0, x.lo), std::min(1.0, x.hi));
            }
        }
        std::sort(c.begin(), c.end());
        double measure = 0.0;
        double reach = 0.0;
        for (const auto& [lo, hi] : c) {
            measure += std::max(0.0, hi - std::max(lo, reach));
            reach = std::max(reach, hi);
        }
        double prev = stats::capacity_lower_bound(X, {0.0, 1.0}, 1.0);
        worst = std::max(worst, std::abs(prev - measure));
        for (double g : {1.25, 1.5, 2.0, 3.0}) {
            const double v = stats::capacity_lower_bound(X, {0.0, 1.0}, g);
            monotone = monotone && v >= prev;
            prev = v;
        }
    }
    return {worst <= 1e-15 && monotone,
            "gamma=1 max |cap - ratio| " + num(worst, 3) + ", monotone " + (monotone ? "yes" : "no")};
}

// 13 -------------------------------------------------------------------------
// Walks outward at step h until the signature changes; midpoint of the step.
std::pair<double, double> walk(const maps::MapFamily& fam, double base, double h, int steps) {
    const auto s0 = scan::window_signature(fam, {base}, 1);
    double lo = NAN;
    double hi = NAN;
    for (int i = 1; i <= steps && std::isnan(lo); ++i) {
        if (scan::window_signature(fam, {base - i * h}, 1) != s0) {
            lo = base - (i - 0.5) * h;
        }
    }
    for (int i = 1; i <= steps && std::isnan(hi); ++i) {
        if (scan::window_signature(fam, {base + i * h}, 1) != s0) {
            hi = base + (i - 0.5) * h;
        }
    }
    return {lo, hi};
}

Outcome windows() {
    const maps::MapFamily fam{maps::FamilyId::Quadratic};
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> U(1.5, 2.0);
    double worst = 0.0;
    std::string d;
    bool ok = true;
    int bases = 0;
    while (bases < 5) {
        const double base = U(rng);
        if (!scan::window_signature(fam, {base}, 1)) {
            continue;
        }
        ++bases;
        const auto w = scan::parameter_window(fam, {base}, 1, 1e-9);
        const auto [lo, hi] = walk(fam, base, 2.5e-7, 40000);
        const double e = std::max(std::abs(w.lo - lo), std::abs(w.hi - hi));
        ok = ok && std::isfinite(e) && e <= 1e-6;
        worst = std::max(worst, std::isfinite(e) ? e : INFINITY);
        d += num(base, 6) + ": [" + num(w.lo, 10) + ", " + num(w.hi, 10) + "]; ";
    }
    return {ok, d + "max endpoint error " + num(worst, 3)};
}

// 14 -------------------------------------------------------------------------
std::string unit_tests_path;

Outcome properties() {
    if (unit_tests_path.empty()) {
        return {false, "no --unit-tests binary given"};
    }
    const auto t0 = Clock::now();
    const std::string cmd = "\"" + unit_tests_path + "\" --test-case='property*' --minimal > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return {rc == 0, std::string(rc == 0 ? "all property suites pass" : "property suites failed") + ", " +
                         num(ms_since(t0) / 1000, 3) + " s"};
}

std::set<int> int_set(const std::string& text) {
    std::set<int> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        if (!item.empty()) {
            out.insert(std::stoi(item));
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nestlab acceptance run"};
    std::string expect;
    std::string only;
    app.add_option("--unit-tests", unit_tests_path, "unit test binary for the property suites");
    app.add_option("--expect-fail", expect, "criteria known to fail, comma separated");
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);
    const auto expected = int_set(expect);
    const auto selected = int_set(only);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Ulam CE exponent", ulam_ce},
        {"Tsujii sum at the Ulam map", tsujii},
        {"quadratic Schwarzian closed form", schwarzian},
        {"regular detection at a=1 and a=0", regular},
        {"Ulam level-1 golden branch", ulam_branch},
        {"grid-oracle equivalence, levels 1-2", grid_oracle},
        {"BCE tree at depth 12", bce},
        {"dichotomy scan", dichotomy},
        {"scaling-factor decay", decay},
        {"WR at the Ulam map", wr_ulam},
        {"straightening", straightening},
        {"capacity lower bound", capacity},
        {"parameter windows J_1", windows},
        {"property suites", properties},
    };
    int unexpected = 0;
    int passed = 0;
    int run = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) {
            continue;
        }
        ++run;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        passed += o.pass ? 1 : 0;
        const bool known = !o.pass && expected.count(id);
        unexpected += (!o.pass && !known) ? 1 : 0;
        std::printf("%s %2d  %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                    known ? " [expected failure]" : "");
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria pass, %d unexpected failure(s)\n", passed, run, unexpected);
    return unexpected;
}
