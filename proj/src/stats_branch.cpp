#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "nestlab/stats.hpp"

namespace nestlab::stats {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

// Golden-section minimum of g on [a, b].
std::pair<double, double> golden_min(const std::function<double(double)>& g, double a, double b) {
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double g1 = g(x1);
    double g2 = g(x2);
    for (int it = 0; it < 200 && b - a > 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a));
         ++it) {
        if (g1 < g2) {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - kInvPhi * (b - a);
            g1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + kInvPhi * (b - a);
            g2 = g(x2);
        }
    }
    return g1 < g2 ? std::pair{x1, g1} : std::pair{x2, g2};
}

// Minimum of g over a grid on [lo, hi] (endpoints included), refined around the best node.
std::pair<double, double> grid_min(const std::function<double(double)>& g, double lo, double hi, int grid) {
    grid = std::max(grid, 2);
    std::vector<double> xs(static_cast<std::size_t>(grid) + 1);
    std::vector<double> gs(xs.size());
    for (int i = 0; i <= grid; ++i) {
        xs[static_cast<std::size_t>(i)] = i == grid ? hi : lo + (hi - lo) * i / grid;
        gs[static_cast<std::size_t>(i)] = g(xs[static_cast<std::size_t>(i)]);
    }
    const auto best = static_cast<std::size_t>(std::min_element(gs.begin(), gs.end()) - gs.begin());
    std::pair<double, double> out{xs[best], gs[best]};
    const double a = xs[best == 0 ? 0 : best - 1];
    const double b = xs[std::min(best + 1, xs.size() - 1)];
    if (b > a) {
        const auto r = golden_min(g, a, b);
        if (r.second < out.second) {
            out = r;
        }
    }
    return out;
}

double log_abs_derivative(const maps::MapInstance& m, double x, int k) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
        s += std::log(std::abs(m.derivative(x)));
        x = m.value(x);
    }
    return s;
}

} // namespace

BranchHyperbolicity branch_hyperbolicity(const maps::MapInstance& m, const nest::NestLevel& level, int j,
                                         int grid) {
    const nest::Branch* b = level.find_branch(j);
    if (b == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "branch " + std::to_string(j) + " is not enumerated");
    }
    const int r = b->return_time;
    const auto best = grid_min([&](double x) { return log_abs_derivative(m, x, r) / r; }, b->interval.lo,
                               b->interval.hi, grid);
    return {best.second, best.first};
}

double level_hyperbolicity(const maps::MapInstance& m, const nest::NestLevel& level, int grid) {
    if (level.branches.empty()) {
        throw Error(ErrorCode::InsufficientBranches, "level has no enumerated branches");
    }
    double lam = std::numeric_limits<double>::infinity();
    for (const auto& b : level.branches) {
        if (b.j > 0) {
            lam = std::min(lam, branch_hyperbolicity(m, level, b.j, grid).lambda);
        }
    }
    return lam;
}

Distortion distortion(const maps::MapInstance& m, const nest::NestLevel& level, const std::vector<int>& word,
                      int grid) {
    const double p = level.interval.half_width;
    if (word.empty()) {
        return {1.0, 0.0, 0.0, nest::Interval{-p, p}, 0};
    }
    std::vector<nest::Branch> path;
    int time = 0;
    for (int j : word) {
        const nest::Branch* b = level.find_branch(j);
        if (b == nullptr) {
            throw Error(ErrorCode::InvalidArgument, "branch " + std::to_string(j) + " is not enumerated");
        }
        path.push_back(*b);
        time += b->return_time;
    }
    const nest::Interval dom = nest::pull_back(m, path, p, nest::Interval{-p, p});
    if (!(dom.hi > dom.lo)) {
        throw Error(ErrorCode::InvalidArgument, "composition domain is empty");
    }
    auto ld = [&](double x) { return log_abs_derivative(m, x, time); };
    const auto lo = grid_min(ld, dom.lo, dom.hi, grid);
    const auto hi = grid_min([&](double x) { return -ld(x); }, dom.lo, dom.hi, grid);
    const double log_sup = -hi.second;
    const double log_inf = lo.second;
    return {std::exp(log_sup - log_inf), log_sup, log_inf, dom, time};
}

namespace {

struct Orbit {
    std::vector<double> logs; ///< ln|Df(x_k)|
    std::vector<bool> outside;
};

Orbit orbit_of(const maps::MapInstance& m, double x, int N, double eps) {
    Orbit o;
    o.logs.resize(static_cast<std::size_t>(N));
    o.outside.resize(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        o.outside[static_cast<std::size_t>(k)] = std::abs(x) >= eps;
        o.logs[static_cast<std::size_t>(k)] = std::log(std::abs(m.derivative(x)));
        x = m.value(x);
    }
    return o;
}

// Calls visit(sum, len) for every window of consecutive outside points.
template <typename Visit>
void windows(const Orbit& o, Visit&& visit) {
    const std::size_t n = o.logs.size();
    std::size_t s = 0;
    while (s < n) {
        if (!o.outside[s]) {
            ++s;
            continue;
        }
        std::size_t e = s;
        while (e < n && o.outside[e]) {
            ++e;
        }
        for (std::size_t a = s; a < e; ++a) {
            double sum = 0.0;
            for (std::size_t b = a; b < e; ++b) {
                sum += o.logs[b];
                visit(sum, static_cast<int>(b - a + 1));
            }
        }
        s = e;
    }
}

} // namespace

OutsideHyperbolicity hyperbolicity_outside(const maps::MapInstance& m, double eps, int N, int grid,
                                           int min_window, Exec exec) {
    if (!(eps > 0)) {
        throw Error(ErrorCode::InvalidArgument, "eps must be positive");
    }
    if (N < 1 || grid < 1 || min_window < 1) {
        throw Error(ErrorCode::InvalidArgument, "N, grid and min_window must be positive");
    }
    const double B = m.half_width();
    auto point = [&](int i) { return -B + 2.0 * B * (i + 0.5) / grid; };

    double lam_log = std::numeric_limits<double>::infinity();
    long count = 0;
    auto first = [&](int i, double& lam, long& c) {
        const Orbit o = orbit_of(m, point(i), N, eps);
        windows(o, [&](double sum, int len) {
            if (len >= min_window) {
                lam = std::min(lam, sum / len);
                ++c;
            }
        });
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 8) reduction(min : lam_log) reduction(+ : count)
        for (int i = 0; i < grid; ++i) {
            first(i, lam_log, count);
        }
    } else {
        for (int i = 0; i < grid; ++i) {
            first(i, lam_log, count);
        }
    }
    if (count == 0) {
        throw Error(ErrorCode::NoSegments, "no orbit window of length " + std::to_string(min_window) +
                                               " stays outside (-eps, eps)");
    }
    // C from every window: |Df^len| >= C lambda^(len - 1).
    double c_log = std::numeric_limits<double>::infinity();
    auto second = [&](int i, double& c) {
        const Orbit o = orbit_of(m, point(i), N, eps);
        windows(o, [&](double sum, int len) { c = std::min(c, sum - (len - 1) * lam_log); });
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 8) reduction(min : c_log)
        for (int i = 0; i < grid; ++i) {
            second(i, c_log);
        }
    } else {
        for (int i = 0; i < grid; ++i) {
            second(i, c_log);
        }
    }
    return {std::exp(c_log), std::exp(lam_log), count};
}

} // namespace nestlab::stats
