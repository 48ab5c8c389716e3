#include <algorithm>
#include <cmath>
#include <limits>

#include "nestlab/stats.hpp"

namespace nestlab::stats {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double zero_tol(const maps::MapInstance& m) { return 1e3 * kEps * m.half_width(); }

} // namespace

std::optional<int> first_return_to_zero(const maps::MapInstance& m, int N) {
    const double tol = zero_tol(m);
    double x = 0.0;
    for (int k = 1; k <= N; ++k) {
        x = m.value(x);
        if (std::abs(x) <= tol) {
            return k;
        }
    }
    return std::nullopt;
}

CESeries ce_series(const maps::MapInstance& m, int N, const std::vector<nest::NestLevel>* levels,
                   double tail_fraction) {
    if (N < 2) {
        throw Error(ErrorCode::InvalidArgument, "ce_series needs N >= 2");
    }
    if (!(tail_fraction >= 0.0 && tail_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "tail fraction must lie in [0, 1)");
    }
    const double tol = zero_tol(m);
    CESeries out;
    out.a.reserve(static_cast<std::size_t>(N));
    double x = m.value(0.0);
    double log_sum = 0.0;
    for (int k = 1; k <= N; ++k) {
        if (std::abs(x) <= tol) {
            throw CriticalOrbitPeriodicError(
                k, "Df^" + std::to_string(k) + "(f(0)) vanishes: f^" + std::to_string(k) + "(0) = 0");
        }
        log_sum += std::log(std::abs(m.derivative(x)));
        out.a.push_back(log_sum / k);
        x = m.value(x);
    }
    out.tail_start = std::max(1, static_cast<int>(std::floor(tail_fraction * N)));
    out.liminf_estimate = *std::min_element(out.a.begin() + (out.tail_start - 1), out.a.end());
    if (levels != nullptr) {
        for (const auto& L : *levels) {
            if (L.v && *L.v - 1 >= 1 && *L.v - 1 <= N) {
                out.e.emplace_back(out.at(*L.v - 1));
            } else {
                out.e.emplace_back(std::nullopt);
            }
        }
    }
    return out;
}

RecurrenceRecord recurrence_exponent(const maps::MapInstance& m, int N) {
    if (N < 100) {
        throw Error(ErrorCode::InvalidArgument, "recurrence_exponent needs N >= 100");
    }
    const double tol = zero_tol(m);
    RecurrenceRecord out;
    double best = std::numeric_limits<double>::infinity();
    double x = 0.0;
    for (int k = 1; k <= N; ++k) {
        x = m.value(x);
        const double d = std::abs(x);
        if (d <= tol) {
            out.periodic = true;
            out.closest_returns.emplace_back(k, d);
            break;
        }
        if (d < best) {
            best = d;
            out.closest_returns.emplace_back(k, d);
        }
    }
    if (out.periodic) {
        return out;
    }
    auto fit = [&](double kmin) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (const auto& [k, d] : out.closest_returns) {
            if (k > kmin) {
                const double lx = std::log(static_cast<double>(k));
                const double ly = -std::log(d);
                sx += lx;
                sy += ly;
                sxx += lx * lx;
                sxy += lx * ly;
                ++n;
            }
        }
        out.fit_points = n;
        if (n >= 2) {
            out.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        }
        return n;
    };
    const bool late = std::any_of(out.closest_returns.begin(), out.closest_returns.end(),
                                  [](const auto& r) { return r.first > 10; });
    if (!late) {
        out.non_recurrent = true;
        return out;
    }
    if (fit(std::sqrt(static_cast<double>(N))) < 2 && fit(10.0) < 2) {
        const auto& [k, d] = out.closest_returns.back();
        out.fitted_exponent = -std::log(d) / std::log(static_cast<double>(k));
        out.fit_points = 1;
    }
    return out;
}

std::vector<WRRow> wr_statistic(const maps::MapInstance& m, int N, const std::vector<double>& deltas) {
    if (N < 1000) {
        throw Error(ErrorCode::InvalidArgument, "wr_statistic needs N >= 1000");
    }
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0) || (i > 0 && !(deltas[i] < deltas[i - 1]))) {
            throw Error(ErrorCode::InvalidArgument, "deltas must be positive and strictly decreasing");
        }
    }
    std::vector<WRRow> rows;
    for (double d : deltas) {
        rows.push_back({d, 0.0, 0});
    }
    double x = 0.0;
    for (int k = 1; k <= N; ++k) {
        x = m.value(x);
        const double ax = std::abs(x);
        if (rows.empty() || ax >= rows.front().delta) {
            continue;
        }
        const double term = std::log(std::abs(m.derivative(x)));
        for (auto& r : rows) {
            if (ax >= r.delta) {
                break;
            }
            r.value += term;
            ++r.returns;
        }
    }
    for (auto& r : rows) {
        r.value /= N;
    }
    return rows;
}

} // namespace nestlab::stats
