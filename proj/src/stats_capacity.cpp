#include <algorithm>
#include <cmath>

#include "nestlab/stats.hpp"

namespace nestlab::stats {

double capacity_lower_bound(const std::vector<nest::Interval>& X, nest::Interval I, double gamma, int family_size) {
    if (!(gamma >= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "gamma must be >= 1");
    }
    if (!(I.hi > I.lo)) {
        throw Error(ErrorCode::InvalidArgument, "reference interval must have positive length");
    }
    family_size = std::max(family_size, 2);
    // X clipped to I and merged.
    std::vector<nest::Interval> parts;
    for (const auto& x : X) {
        const double lo = std::max(x.lo, I.lo);
        const double hi = std::min(x.hi, I.hi);
        if (hi > lo) {
            parts.push_back({lo, hi});
        }
    }
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    std::vector<nest::Interval> merged;
    for (const auto& p : parts) {
        if (!merged.empty() && p.lo <= merged.back().hi) {
            merged.back().hi = std::max(merged.back().hi, p.hi);
        } else {
            merged.push_back(p);
        }
    }
    double best = 0.0;
    for (const auto& p : merged) {
        best += p.length();
    }
    best /= I.length();
    if (merged.empty()) {
        return 0.0;
    }

    // Exponent grid exp(i ln2 / 32), |ln s| <= ln gamma.
    const double step = std::log(2.0) / 32.0;
    const int smax = static_cast<int>(std::floor(std::log(gamma) / step + 1e-12));
    for (int si = -smax; si <= smax; ++si) {
        if (si == 0) {
            continue;
        }
        const double s = std::exp(si * step);
        for (int ci = 0; ci < family_size; ++ci) {
            const double c = I.lo + I.length() * ci / (family_size - 1);
            auto h = [&](double x) {
                const double d = x - c;
                return d < 0 ? -std::pow(-d, s) : std::pow(d, s);
            };
            const double hlo = h(I.lo);
            const double width = h(I.hi) - hlo;
            double total = 0.0;
            for (const auto& p : merged) {
                total += h(p.hi) - h(p.lo);
            }
            best = std::max(best, total / width);
        }
    }
    return best;
}

} // namespace nestlab::stats
