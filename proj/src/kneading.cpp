#include "nestlab/kneading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nestlab::kneading {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::optional<std::pair<int, int>> find_periodic_suffix(const std::vector<Symbol>& s) {
    const int n = static_cast<int>(s.size());
    for (int p = 1; 4 * p <= n; ++p) {
        int start = n - p;
        while (start > 0 && s[static_cast<std::size_t>(start - 1)] ==
                                s[static_cast<std::size_t>(start - 1 + p)]) {
            --start;
        }
        if (n - start >= std::max(3 * p, n / 2)) {
            return std::make_pair(start, p);
        }
    }
    return std::nullopt;
}

// f^p(x) and D f^p(x).
void iterate_with_derivative(const maps::MapInstance& m, double x, int p, double& y, double& d) {
    d = 1.0;
    y = x;
    for (int i = 0; i < p; ++i) {
        d *= m.derivative(y);
        y = m.value(y);
    }
}

// Newton on f^p(x) - x from x0. NaN on failure.
double polish_cycle(const maps::MapInstance& m, double x0, int p, double cycle_tol) {
    const double B = m.half_width();
    double x = x0;
    for (int it = 0; it < 200; ++it) {
        double y = 0.0;
        double d = 0.0;
        iterate_with_derivative(m, x, p, y, d);
        const double g = y - x;
        if (std::abs(g) <= 0.01 * cycle_tol) {
            return x;
        }
        const double dg = d - 1.0;
        if (dg == 0.0 || !std::isfinite(dg)) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        double step = g / dg;
        const double cap = 0.1 * B;
        step = std::clamp(step, -cap, cap);
        const double nx = x - step;
        if (std::abs(nx) > B) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        if (nx == x) {
            break;
        }
        x = nx;
    }
    double y = 0.0;
    double d = 0.0;
    iterate_with_derivative(m, x, p, y, d);
    return std::abs(y - x) <= cycle_tol ? x : std::numeric_limits<double>::quiet_NaN();
}

// Smallest d dividing p with f^d(x) close to x.
int minimal_period(const maps::MapInstance& m, double x, int p, double tol) {
    double y = x;
    for (int d = 1; d <= p; ++d) {
        y = m.value(y);
        if (p % d == 0 && std::abs(y - x) <= tol) {
            return d;
        }
    }
    return p;
}

double cycle_multiplier(const maps::MapInstance& m, double x, int p) {
    double y = 0.0;
    double d = 0.0;
    iterate_with_derivative(m, x, p, y, d);
    return d;
}

// Radius r with f^p([x-r, x+r]) inside itself and |Df^p| <= target on it; 0 if none.
double trap_radius(const maps::MapInstance& m, double x, int p, double target) {
    double r = 1e-2 * m.half_width();
    for (int h = 0; h < 60; ++h, r *= 0.5) {
        bool ok = true;
        for (int i = 0; i <= 32 && ok; ++i) {
            const double z = x - r + 2.0 * r * i / 32.0;
            double y = 0.0;
            double d = 0.0;
            iterate_with_derivative(m, z, p, y, d);
            ok = std::abs(d) <= target && std::abs(y - x) < r;
        }
        if (ok) {
            return r;
        }
    }
    return 0.0;
}

} // namespace

std::string KneadingSequence::str() const {
    std::string out;
    out.reserve(symbols.size());
    for (Symbol s : symbols) {
        out.push_back(static_cast<char>(s));
    }
    return out;
}

KneadingSequence kneading_sequence(const maps::MapInstance& m, int depth, double sym_scale) {
    if (depth < 1) {
        throw Error(ErrorCode::InvalidArgument, "kneading depth must be >= 1");
    }
    const double tol = sym_scale * kEps * m.half_width();
    KneadingSequence k;
    k.depth = depth;
    k.symbols.reserve(static_cast<std::size_t>(depth));
    double x = 0.0;
    for (int i = 0; i < depth; ++i) {
        x = m.value(x);
        if (x > tol) {
            k.symbols.push_back(Symbol::R);
        } else if (x < -tol) {
            k.symbols.push_back(Symbol::L);
        } else {
            k.symbols.push_back(Symbol::C);
            k.truncated = true;
            return k;
        }
    }
    k.periodic_suffix = find_periodic_suffix(k.symbols);
    return k;
}

Comparison compare(const KneadingSequence& a, const KneadingSequence& b) {
    auto rank = [](Symbol s) { return s == Symbol::L ? 0 : (s == Symbol::C ? 1 : 2); };
    const std::size_t n = std::min(a.symbols.size(), b.symbols.size());
    bool odd = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Symbol sa = a.symbols[i];
        const Symbol sb = b.symbols[i];
        if (sa != sb) {
            int o = rank(sa) < rank(sb) ? -1 : 1;
            if (odd) {
                o = -o;
            }
            return {o, static_cast<int>(i) + 1, false};
        }
        if (sa == Symbol::C) {
            return {0, 0, true};
        }
        if (sa == Symbol::R) {
            odd = !odd;
        }
    }
    return {};
}

std::optional<RegularReport> detect_regular(const maps::MapInstance& m, long max_iter,
                                            int max_period, RegularTolerances tol) {
    if (max_period < 1 || max_period > 1000) {
        throw Error(ErrorCode::InvalidArgument, "max_period must be in [1, 1000]");
    }
    if (max_iter < 2L * max_period + 2) {
        throw Error(ErrorCode::InvalidArgument, "max_iter too small for max_period");
    }
    const double B = m.half_width();
    const std::size_t keep = 2 * static_cast<std::size_t>(max_period) + 2;
    std::vector<double> tail(keep);
    double x = 0.0;
    for (long k = 0; k < max_iter; ++k) {
        x = m.value(x);
        tail[static_cast<std::size_t>(k) % keep] = x;
    }
    auto back = [&](long j) { // x_{N - j}
        return tail[static_cast<std::size_t>((max_iter - 1 - j) % static_cast<long>(keep))];
    };
    const double detect = 1e-4 * B;
    for (int p = 1; p <= max_period; ++p) {
        if (std::abs(back(0) - back(p)) > detect || std::abs(back(1) - back(p + 1)) > detect) {
            continue;
        }
        const double xs = polish_cycle(m, back(0), p, tol.cycle_tol);
        if (!std::isfinite(xs) || minimal_period(m, xs, p, 1e3 * tol.cycle_tol) < p) {
            continue;
        }
        const double mu = cycle_multiplier(m, xs, p);
        const double gap = std::abs(std::abs(mu) - 1.0);
        if (gap <= tol.mult_tol) {
            throw Error(ErrorCode::NeutralSuspected,
                        "cycle of period " + std::to_string(p) + " has multiplier " +
                            std::to_string(mu));
        }
        if (std::abs(mu) > 1.0) {
            continue;
        }
        RegularReport r;
        r.period = p;
        r.multiplier = mu;
        std::vector<double> cyc;
        double y = xs;
        std::size_t near = 0;
        for (int i = 0; i < p; ++i) {
            cyc.push_back(y);
            if (std::abs(y) < std::abs(cyc[near])) {
                near = cyc.size() - 1;
            }
            y = m.value(y);
        }
        std::rotate(cyc.begin(), cyc.begin() + static_cast<std::ptrdiff_t>(near), cyc.end());
        r.orbit = cyc;
        r.borderline = gap < 10.0 * tol.mult_tol;
        const double x0 = r.orbit.front();
        r.trap_radius = trap_radius(m, x0, p, 0.5 * (1.0 + std::abs(mu)));
        if (r.trap_radius > 0.0) {
            double z = 0.0;
            for (long k = 0; k <= max_iter; ++k) {
                if (std::abs(z - x0) < r.trap_radius) {
                    r.basin_witness = k;
                    break;
                }
                z = m.value(z);
            }
        }
        if (r.basin_witness < 0) {
            r.borderline = true;
        }
        return r;
    }
    return std::nullopt;
}

std::optional<Renormalization> detect_renormalization(const maps::MapInstance& m, int max_period) {
    const auto ri = nest::restrictive_interval(m, max_period);
    Renormalization r;
    int prev = 1;
    for (int p : ri.tower) {
        if (p > prev) {
            r.tower.push_back(p);
            r.relative_periods.push_back(p / prev);
            prev = p;
        }
    }
    if (r.tower.empty()) {
        return std::nullopt;
    }
    r.period = r.tower.front();
    r.interval = ri.interval;
    r.max_period_exceeded = ri.max_period_exceeded;
    return r;
}

Conjugacy conjugacy_check(const maps::MapInstance& f, const maps::MapInstance& g, int depth) {
    for (const auto* m : {&f, &g}) {
        const auto rep = maps::verify_s_unimodal(*m, 2001);
        if (!rep.pass()) {
            throw Error(ErrorCode::InvalidArgument,
                        m->describe() + " is not S-unimodal: " + rep.first_failure);
        }
    }
    const auto kf = kneading_sequence(f, depth);
    const auto kg = kneading_sequence(g, depth);
    const auto c = compare(kf, kg);
    if (c.both_c) {
        throw Error(ErrorCode::TruncatedByC, "both kneading sequences stop at the same C");
    }
    if (c.order != 0) {
        return {false, c.position, depth};
    }
    return {true, 0, depth};
}

double quadratic_cycle_multiplier(double a, int period) {
    const auto q = maps::MapInstance::quadratic(a);
    double x = 0.0;
    for (int k = 0; k < 20000; ++k) {
        x = q.value(x);
    }
    const double xs = polish_cycle(q, x, period, 1e-10);
    if (!std::isfinite(xs) || minimal_period(q, xs, period, 1e-7) < period) {
        return std::numeric_limits<double>::infinity();
    }
    return cycle_multiplier(q, xs, period);
}

Straightening straighten(const maps::MapInstance& f, int depth, double tol) {
    if (depth < 1 || !(tol > 0)) {
        throw Error(ErrorCode::InvalidArgument, "straighten needs depth >= 1 and tol > 0");
    }
    const auto rep = maps::verify_s_unimodal(f, 2001);
    if (!rep.pass()) {
        throw Error(ErrorCode::InvalidArgument, f.describe() + " is not S-unimodal: " + rep.first_failure);
    }
    const int D = std::max(depth, 200);
    const auto kf = kneading_sequence(f, D);
    auto knead_q = [&](double a) { return kneading_sequence(maps::MapInstance::quadratic(a), D, 0.0); };

    Straightening out;
    out.truncated_by_c = kf.truncated;
    double lo = maps::kMinA;
    double hi = maps::kMaxA;
    std::optional<double> equal_at;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const auto c = compare(knead_q(mid), kf);
        if (c.order < 0) {
            lo = mid;
        } else if (c.order > 0) {
            hi = mid;
        } else {
            equal_at = mid;
            break;
        }
    }
    out.a = equal_at.value_or(0.5 * (lo + hi));
    out.bracket_width = hi - lo;

    if (equal_at && !kf.truncated) {
        std::optional<RegularReport> reg;
        reg = detect_regular(f);
        if (reg) {
            out.period = reg->period;
            out.multiplier = reg->multiplier;
            auto same = [&](double a) { return compare(knead_q(a), kf).order == 0; };
            // Extent of the window of constant kneading around the hit.
            double l0 = lo;
            double l1 = *equal_at;
            while (l1 - l0 > tol) {
                const double mid = 0.5 * (l0 + l1);
                (same(mid) ? l1 : l0) = mid;
            }
            double h0 = *equal_at;
            double h1 = hi;
            while (h1 - h0 > tol) {
                const double mid = 0.5 * (h0 + h1);
                (same(mid) ? h0 : h1) = mid;
            }
            const int p = reg->period;
            const double target = reg->multiplier;
            double a0 = l1;
            double a1 = h0;
            // The multiplier of the period-p cycle decreases along the window.
            auto g = [&](double a) { return quadratic_cycle_multiplier(a, p) - target; };
            if (g(a0) >= 0 && g(a1) <= 0) {
                while (a1 - a0 > tol) {
                    const double mid = 0.5 * (a0 + a1);
                    (g(mid) >= 0 ? a0 : a1) = mid;
                }
                out.a = 0.5 * (a0 + a1);
                out.bracket_width = a1 - a0;
                out.multiplier_refined = true;
            } else {
                out.a = 0.5 * (l1 + h0);
                out.bracket_width = h0 - l1;
            }
        }
    }

    const auto kq = kneading_sequence(maps::MapInstance::quadratic(out.a), depth);
    const auto kd = kneading_sequence(f, depth);
    const auto c = compare(kq, kd);
    if (c.order == 0) {
        out.agreement_depth = static_cast<int>(std::min(kq.symbols.size(), kd.symbols.size()));
    } else {
        out.agreement_depth = c.position - 1;
    }
    return out;
}

} // namespace nestlab::kneading
