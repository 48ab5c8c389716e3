#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "nestlab/scan.hpp"

using namespace nestlab;
using namespace nestlab::scan;

namespace {

const maps::MapFamily kQuadratic{maps::FamilyId::Quadratic, 0};
const maps::MapFamily kNormalized{maps::FamilyId::NormalizedQuadratic, 0};
const maps::MapFamily kPerturbed{maps::FamilyId::PerturbedQuadratic, 0};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

struct TempDir {
    std::filesystem::path dir;
    explicit TempDir(const std::string& tag) {
        dir = std::filesystem::temp_directory_path() /
              ("nestlab_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    [[nodiscard]] std::string file(const std::string& name) const { return (dir / name).string(); }
};

ScanWindow quadratic_window(double lo, double hi) { return {{{lo, hi}}, std::nullopt}; }

// Signature change points found by walking a grid of step h outward from base.
std::pair<double, double> grid_window(const maps::MapFamily& fam, double base, int n, double h,
                                      int steps) {
    const auto s0 = window_signature(fam, {base}, n);
    double lo = NAN;
    double hi = NAN;
    for (int i = 1; i <= steps && std::isnan(lo); ++i) {
        if (window_signature(fam, {base - i * h}, n) != s0) {
            lo = base - (i - 0.5) * h;
        }
    }
    for (int i = 1; i <= steps && std::isnan(hi); ++i) {
        if (window_signature(fam, {base + i * h}, n) != s0) {
            hi = base + (i - 0.5) * h;
        }
    }
    return {lo, hi};
}

// First return time of 0 to the fixed-point interval, in long double.
int direct_first_return(double a) {
    const long double p = (-1.0L + std::sqrt(1.0L + 4.0L * a)) / 2.0L;
    long double x = 0.0L;
    for (int k = 1; k < 100000; ++k) {
        x = a - x * x;
        if (std::fabs(x) < p) {
            return k;
        }
    }
    return -1;
}

} // namespace

TEST_CASE("golden classifications") {
    SUBCASE("Ulam map is a CE candidate") {
        const auto c = classify_parameter(kQuadratic, {2.0});
        CHECK(c.verdict == Verdict::CECandidate);
        REQUIRE(c.lambda_hat);
        CHECK(*c.lambda_hat == doctest::Approx(std::log(4.0)).epsilon(1e-6));
        REQUIRE(c.recurrence_exponent);
        CHECK(*c.recurrence_exponent == 0.0);
        CHECK(*c.wr == 0.0);
    }
    SUBCASE("superattracting period 2") {
        const auto c = classify_parameter(kQuadratic, {1.0});
        CHECK(c.verdict == Verdict::Regular);
        CHECK(c.period == 2);
        CHECK(std::abs(*c.multiplier) <= 1e-9);
    }
    SUBCASE("attracting fixed point") {
        const auto c = classify_parameter(kQuadratic, {0.0});
        CHECK(c.verdict == Verdict::Regular);
        CHECK(c.period == 1);
        CHECK(*c.multiplier == 0.0);
    }
    SUBCASE("Feigenbaum point is renormalizable") {
        const auto c = classify_parameter(kQuadratic, {1.4011551890920506});
        CHECK(c.verdict == Verdict::Renormalizable);
        CHECK(c.renorm_period == 2);
        CHECK(c.renorm_depth >= 4);
    }
    SUBCASE("near-neutral fixed point") {
        const auto c = classify_parameter(kQuadratic, {0.75});
        CHECK(c.verdict == Verdict::Undetermined);
        CHECK(c.reason == Reason::NeutralSuspected);
    }
    SUBCASE("outside the family") {
        const auto c = classify_parameter(kQuadratic, {2.5});
        CHECK(c.verdict == Verdict::Undetermined);
        CHECK(c.flags == std::vector<std::string>{"invalid_parameter"});
    }
    SUBCASE("normalized and raw agree") {
        for (double a : {1.0, 1.7951, 2.0}) {
            const auto raw = classify_parameter(kQuadratic, {a});
            const auto nrm = classify_parameter(kNormalized, {maps::t_from_a(a)});
            CHECK(raw.verdict == nrm.verdict);
            CHECK(raw.period == nrm.period);
        }
    }
}

TEST_CASE("refined budgets do not flip golden verdicts") {
    Budgets fine;
    fine.max_iter *= 4;
    fine.nest_levels = 8;
    fine.ce_N *= 2;
    fine.recurrence_N *= 2;
    fine.wr_N *= 2;
    fine.bce_depth = 12;
    for (double a : {0.0, 1.0, 2.0}) {
        const auto coarse = classify_parameter(kQuadratic, {a});
        const auto refined = classify_parameter(kQuadratic, {a}, fine);
        CAPTURE(a);
        CHECK(coarse.verdict != Verdict::Undetermined);
        CHECK(refined.verdict == coarse.verdict);
    }
}

TEST_CASE("budgets key/value schema") {
    const Budgets d;
    Budgets b;
    b.apply(d.to_key_values());
    CHECK(b == d);

    b.apply(config::parse_key_values("# tuned\nmax_iter = 5000\nwr_deltas = 0.2,0.02\n\nbits=53\n"));
    CHECK(b.max_iter == 5000);
    CHECK(b.wr_deltas == std::vector<double>{0.2, 0.02});
    Budgets back;
    back.apply(b.to_key_values());
    CHECK(back == b);

    CHECK_THROWS_AS(b.apply({{"max_itr", "1"}}), Error);
    b = d;
    b.wr_deltas = {0.01, 0.1};
    CHECK_THROWS_AS(b.validate(), Error);
    b = d;
    b.bits = 113;
    CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("deepest pair decay uses the resolution bound") {
    Classification c;
    CHECK_FALSE(deepest_pair_decays(c).has_value());
    c.c = {0.4, 0.3};
    CHECK(deepest_pair_decays(c) == false);
    c.c = {0.4, 0.1};
    CHECK(deepest_pair_decays(c) == true);
    c.c = {0.4, 0.3};
    c.c_bound = 1e-12;
    CHECK(deepest_pair_decays(c) == true);
}

TEST_CASE("one-parameter sampling") {
    ScanOptions opt;
    opt.samples = 200;
    const auto w = quadratic_window(1.5, 2.0);
    for (long i = 0; i < opt.samples; ++i) {
        const auto p = sample_parameters(kQuadratic, w, opt, i);
        REQUIRE(p.size() == 1);
        CHECK(p[0] >= 1.5);
        CHECK(p[0] < 2.0);
    }
    SUBCASE("stratified puts sample i in stratum i") {
        opt.sampling = Sampling::Stratified;
        for (long i = 0; i < opt.samples; ++i) {
            const double u = (sample_parameters(kQuadratic, w, opt, i)[0] - 1.5) / 0.5;
            CHECK(u >= static_cast<double>(i) / 200.0 - 1e-15);
            CHECK(u < static_cast<double>(i + 1) / 200.0 + 1e-15);
        }
    }
    SUBCASE("pinned second parameter reduces to the one-parameter formula") {
        const ScanWindow pw{{{1.5, 2.0}, {0.0, 0.0}}, std::nullopt};
        for (long i = 0; i < 50; ++i) {
            const auto p = sample_parameters(kPerturbed, pw, opt, i);
            CHECK(p[0] == sample_parameters(kQuadratic, w, opt, i)[0]);
            CHECK(p[1] == 0.0);
        }
    }
    SUBCASE("seed changes the draw") {
        ScanOptions other = opt;
        other.seed = 7;
        CHECK(sample_parameters(kQuadratic, w, opt, 3) != sample_parameters(kQuadratic, w, other, 3));
    }
}

TEST_CASE("multi-parameter sampling lies on lines through the base") {
    ScanOptions opt;
    opt.samples = 64;
    opt.lines = 4;
    const ScanWindow w{{{1.6, 2.0}, {-0.1, 0.1}}, std::vector<double>{1.8, 0.0}};
    for (long line = 0; line < opt.lines; ++line) {
        std::vector<std::vector<double>> pts;
        for (long i = line; i < opt.samples; i += opt.lines) {
            pts.push_back(sample_parameters(kPerturbed, w, opt, i));
        }
        for (const auto& p : pts) {
            CHECK(p[0] >= 1.6);
            CHECK(p[0] <= 2.0);
            CHECK(p[1] >= -0.1);
            CHECK(p[1] <= 0.1);
            // Cross product with the first sample's offset vanishes.
            const double cross = (p[0] - 1.8) * (pts[0][1] - 0.0) - (p[1] - 0.0) * (pts[0][0] - 1.8);
            CHECK(std::abs(cross) <= 1e-14);
        }
    }
}

TEST_CASE("scan determinism across execution modes") {
    ScanOptions opt;
    opt.samples = 24;
    const auto w = quadratic_window(1.5, 2.0);
    opt.exec = Exec::Serial;
    const auto serial = scan_range(kQuadratic, w, Budgets{}, opt);
    for (int jobs : {1, 4, 8}) {
        opt.exec = Exec::Parallel;
        opt.jobs = jobs;
        CHECK(scan_range(kQuadratic, w, Budgets{}, opt) == serial);
    }
    const auto tail = scan_range(kQuadratic, w, Budgets{}, opt, 20);
    REQUIRE(tail.size() == 4);
    CHECK(tail[0] == serial[20]);

    opt.samples = 0;
    CHECK_THROWS_AS(scan_range(kQuadratic, w, Budgets{}, opt), Error);
}

TEST_CASE("scan files are byte-identical across worker counts") {
    TempDir tmp("jobs");
    ScanOptions opt;
    opt.samples = 24;
    const auto w = quadratic_window(1.5, 2.0);
    std::string first;
    for (int jobs : {1, 4, 8}) {
        opt.jobs = jobs;
        const auto path = tmp.file("scan" + std::to_string(jobs) + ".csv");
        const auto s = scan_to_file(kQuadratic, w, Budgets{}, opt, path);
        CHECK(s.computed == 24);
        CHECK(s.total == 24);
        const auto text = slurp(path);
        if (first.empty()) {
            first = text;
        }
        CHECK(text == first);
        CHECK_FALSE(std::filesystem::exists(path + ".lock"));
    }
}

TEST_CASE("record formats round-trip") {
    ScanOptions opt;
    opt.samples = 3;
    const auto recs = scan_range(kQuadratic, quadratic_window(1.7, 2.0), Budgets{}, opt);
    TempDir tmp("fmt");

    const auto csv = tmp.file("r.csv");
    export_records(recs, kQuadratic, Format::Csv, csv);
    const auto text = slurp(csv);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.substr(0, text.find('\n')) == csv_header(kQuadratic));
    CHECK(read_records(kQuadratic, csv) == recs);

    const auto jl = tmp.file("r.jsonl");
    CHECK(format_for_path(jl) == Format::JsonLines);
    export_records(recs, kQuadratic, Format::JsonLines, jl);
    CHECK(read_records(kQuadratic, jl) == recs);

    for (const auto& r : recs) {
        CHECK(from_csv_row(kQuadratic, to_csv_row(r)) == r);
        CHECK(from_json_line(to_json_line(r, kQuadratic)) == r);
    }

    SUBCASE("fields needing quotes survive") {
        ScanRecord r = recs[0];
        r.cls.detail = "comma, \"quote\"\nnewline";
        r.cls.flags = {"a", "b"};
        CHECK(from_csv_row(kQuadratic, to_csv_row(r)) == r);
        CHECK(from_json_line(to_json_line(r, kQuadratic)) == r);
    }
    SUBCASE("malformed rows are parse errors") {
        CHECK_THROWS_AS(from_csv_row(kQuadratic, "1,2,3"), Error);
        CHECK_THROWS_AS(from_json_line("{\"index\": 1}"), Error);
        CHECK_THROWS_AS(from_json_line("not json"), Error);
    }
}

TEST_CASE("resume after interruption") {
    TempDir tmp("resume");
    ScanOptions opt;
    opt.samples = 10;
    const auto w = quadratic_window(1.5, 2.0);

    for (const char* name : {"s.csv", "s.jsonl"}) {
        CAPTURE(name);
        const auto path = tmp.file(name);
        scan_to_file(kQuadratic, w, Budgets{}, opt, path);
        const auto full = slurp(path);

        SUBCASE("missing last line") {
            const auto cut = full.rfind('\n', full.size() - 2);
            spit(path, full.substr(0, cut + 1));
        }
        SUBCASE("torn last line") {
            const auto cut = full.rfind('\n', full.size() - 2);
            spit(path, full.substr(0, cut + 1 + (full.size() - cut) / 2));
        }
        const auto s = scan_to_file(kQuadratic, w, Budgets{}, opt, path);
        CHECK(s.computed == 1);
        CHECK(s.resumed == 9);
        CHECK(s.total == 10);
        CHECK(slurp(path) == full);

        const auto again = scan_to_file(kQuadratic, w, Budgets{}, opt, path);
        CHECK(again.computed == 0);
        CHECK(again.resumed == 10);
    }
}

TEST_CASE("scan file guards") {
    TempDir tmp("guard");
    ScanOptions opt;
    opt.samples = 4;
    const auto w = quadratic_window(1.5, 2.0);
    const auto path = tmp.file("g.csv");

    spit(path + ".lock", "");
    CHECK_THROWS_AS(scan_to_file(kQuadratic, w, Budgets{}, opt, path), Error);
    CHECK_FALSE(std::filesystem::exists(path));
    std::filesystem::remove(path + ".lock");

    scan_to_file(kQuadratic, w, Budgets{}, opt, path);
    ScanOptions other = opt;
    other.seed = 43;
    try {
        scan_to_file(kQuadratic, w, Budgets{}, other, path);
        FAIL("manifest mismatch not detected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IOFailure);
    }
    Budgets b;
    b.ce_N = 3000;
    CHECK_THROWS_AS(scan_to_file(kQuadratic, w, b, opt, path), Error);

    std::filesystem::remove(path + ".manifest");
    CHECK_THROWS_AS(scan_to_file(kQuadratic, w, Budgets{}, opt, path), Error);
}

TEST_CASE("summary fractions") {
    std::vector<ScanRecord> recs(4);
    recs[0].cls.verdict = Verdict::Regular;
    recs[1].cls.verdict = Verdict::CECandidate;
    recs[2].cls.verdict = Verdict::CECandidate;
    const auto s = summarize(recs);
    CHECK(s.total == 4);
    CHECK(s.fraction(Verdict::CECandidate) == 0.5);
    CHECK(s.fraction(Verdict::Undetermined) == 0.25);
    CHECK(ScanSummary{}.fraction(Verdict::Regular) == 0.0);
}

TEST_CASE("level-1 signature follows the first return time") {
    for (double a : {1.55, 1.6, 1.65, 1.7, 1.9, 1.95}) {
        const auto s = window_signature(kQuadratic, {a}, 1);
        REQUIRE(s);
        CHECK(*s == "T:1|v" + std::to_string(direct_first_return(a)));
    }
    CHECK_FALSE(window_signature(kQuadratic, {2.5}, 1).has_value());
    CHECK_THROWS_AS(window_signature(kQuadratic, {1.8}, 0), Error);
}

TEST_CASE("parameter windows") {
    SUBCASE("level-1 endpoints match the grid walk") {
        for (double base : {1.55, 1.7}) {
            const auto w = parameter_window(kQuadratic, {base}, 1, 1e-9);
            const auto [lo, hi] = grid_window(kQuadratic, base, 1, 2.5e-7, 5000);
            CAPTURE(base);
            CHECK(std::abs(w.lo - lo) <= 1e-6);
            CHECK(std::abs(w.hi - hi) <= 1e-6);
            CHECK(w.lo <= base);
            CHECK(base <= w.hi);
            CHECK(w.hi_out - w.hi <= 1e-9);
            CHECK(w.lo - w.lo_out <= 1e-9);
            CHECK_FALSE(w.degenerate);
        }
    }
    SUBCASE("interior shares the signature, outer neighbours do not") {
        const auto w = parameter_window(kQuadratic, {1.7951}, 2, 1e-10);
        for (int i = 1; i <= 10; ++i) {
            const double x = w.lo + (w.hi - w.lo) * i / 11.0;
            CHECK(window_signature(kQuadratic, {x}, 2) == w.signature);
        }
        CHECK(window_signature(kQuadratic, {w.lo_out}, 2) != w.signature);
        CHECK(window_signature(kQuadratic, {w.hi_out}, 2) != w.signature);
    }
    SUBCASE("nested levels") {
        const auto j1 = parameter_window(kQuadratic, {1.7951}, 1, 1e-10);
        const auto j2 = parameter_window(kQuadratic, {1.7951}, 2, 1e-10);
        CHECK(j1.lo <= j2.lo);
        CHECK(j2.hi <= j1.hi);
        CHECK(j2.signature.rfind(j1.signature, 0) == 0);
    }
    SUBCASE("tolerance wider than the window") {
        const auto w = parameter_window(kQuadratic, {1.55}, 1, 1.0, 0, Budgets{}, 1.0);
        CHECK(w.degenerate);
        CHECK(w.lo == 1.55);
        CHECK(w.hi == 1.55);
    }
    SUBCASE("unstable base") {
        CHECK_THROWS_AS(parameter_window(kQuadratic, {2.5}, 1, 1e-9), Error);
        CHECK_THROWS_AS(parameter_window(kQuadratic, {1.8}, 1, 0.0), Error);
        CHECK_THROWS_AS(parameter_window(kQuadratic, {1.8}, 1, 1e-9, 1), Error);
    }
    SUBCASE("parameter bounds") {
        CHECK(parameter_bounds(kQuadratic, 0) == config::Range{-0.25, 2.0});
        CHECK(parameter_bounds(kNormalized, 0) == config::Range{-1.0, 1.0});
        CHECK(std::isinf(parameter_bounds(kPerturbed, 1).hi));
    }
}

TEST_CASE("family and window text forms") {
    const auto f = config::parse_family("pquadratic:a=1.8,eps=0.05");
    CHECK(f.family.id == maps::FamilyId::PerturbedQuadratic);
    CHECK(f.params == std::vector<double>{1.8, 0.05});
    CHECK(config::parse_family(f.render()) == f);
    const auto p = config::parse_family("poly:c1=2,c2=-0.1");
    CHECK(p.family.degree == 2);
    CHECK(config::parse_family(p.render()) == p);
    CHECK_THROWS_AS(config::parse_family("quadratic"), Error);
    CHECK_THROWS_AS(config::parse_family("quadratic:a=1,a=2"), Error);
    CHECK_THROWS_AS(config::parse_family("cubic:a=1"), Error);

    const auto r = config::parse_window(kPerturbed, "a=1.5:2,eps=0");
    REQUIRE(r.size() == 2);
    CHECK(r[0] == config::Range{1.5, 2.0});
    CHECK(r[1].degenerate());
    CHECK(config::parse_window(kPerturbed, config::render_window(kPerturbed, r)) == r);
    CHECK_THROWS_AS(config::parse_window(kPerturbed, "a=1.5:2"), Error);
    CHECK_THROWS_AS(config::parse_key_values("novalue\n"), Error);
    CHECK_THROWS_AS(config::parse_key_values("a=1\na=2\n"), Error);
}
