#include "nestlab/oracle.hpp"

#include <cmath>

namespace nestlab::oracle {

namespace {

struct Return {
    int time;
    signed char orientation;
};

Return first_return(const maps::MapInstance& m, double x, double p, int period, int cap) {
    int sign = 1;
    for (int t = 1; t * period <= cap; ++t) {
        for (int i = 0; i < period; ++i) {
            if (x > 0) {
                sign = -sign;
            }
            x = m.value(x);
        }
        if (std::abs(x) < p) {
            return {t * period, static_cast<signed char>(sign)};
        }
    }
    return {0, 0};
}

} // namespace

GridReturns first_return_grid(const maps::MapInstance& m, const nest::NestLevel& level, int points,
                              int max_return_time, Exec exec) {
    const double p = level.interval.half_width;
    GridReturns g;
    g.x.resize(static_cast<std::size_t>(points));
    g.time.resize(g.x.size());
    g.orientation.resize(g.x.size());
    auto body = [&](int i) {
        const double x = p * (i + 1) / points;
        const Return r = first_return(m, x, p, level.period, max_return_time);
        g.x[static_cast<std::size_t>(i)] = x;
        g.time[static_cast<std::size_t>(i)] = r.time;
        g.orientation[static_cast<std::size_t>(i)] = r.orientation;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 4096)
        for (int i = 0; i < points; ++i) {
            body(i);
        }
    } else {
        for (int i = 0; i < points; ++i) {
            body(i);
        }
    }
    return g;
}

std::vector<GridBranch> grid_branches(const maps::MapInstance& m, const nest::NestLevel& level,
                                      int points, int max_return_time, Exec exec, double min_length) {
    const auto g = first_return_grid(m, level, points, max_return_time, exec);
    const double p = level.interval.half_width;
    auto same = [&](double x, int t, int o) {
        const Return r = first_return(m, x, p, level.period, max_return_time);
        return r.time == t && r.orientation == o;
    };
    // Boundary between a (inside the run) and b (outside).
    auto refine = [&](double a, double b, int t, int o) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            if (mid == a || mid == b) {
                break;
            }
            (same(mid, t, o) ? a : b) = mid;
        }
        return 0.5 * (a + b);
    };
    struct Run {
        std::size_t i;
        std::size_t j;
    };
    std::vector<Run> runs;
    const std::size_t n = g.x.size();
    for (std::size_t i = 0; i < n;) {
        if (g.time[i] == 0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && g.time[j + 1] == g.time[i] && g.orientation[j + 1] == g.orientation[i]) {
            ++j;
        }
        runs.push_back({i, j});
        i = j + 1;
    }
    const double step = p / points;
    std::vector<GridBranch> out(runs.size());
    auto body = [&](std::size_t k) {
        const auto [i, j] = runs[k];
        const int t = g.time[i];
        const int o = g.orientation[i];
        const bool refine_ends = static_cast<double>(j - i + 2) * step >= min_length;
        double lo = i == 0 ? 0.0 : 0.5 * (g.x[i] + g.x[i - 1]);
        double hi = j + 1 == n ? p : 0.5 * (g.x[j] + g.x[j + 1]);
        if (refine_ends && i > 0) {
            lo = refine(g.x[i], g.x[i - 1], t, o);
        }
        if (refine_ends && j + 1 < n) {
            hi = refine(g.x[j], g.x[j + 1], t, o);
        }
        const bool central = i == 0 && same(p * 1e-15, t, o);
        out[k] = GridBranch{central ? 0.0 : lo, hi, t, o, central};
    };
    const long count = static_cast<long>(runs.size());
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
        for (long k = 0; k < count; ++k) {
            body(static_cast<std::size_t>(k));
        }
    } else {
        for (long k = 0; k < count; ++k) {
            body(static_cast<std::size_t>(k));
        }
    }
    return out;
}

} // namespace nestlab::oracle
