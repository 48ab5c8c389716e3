#include <cmath>
#include <limits>

#include "nestlab/scan.hpp"

namespace nestlab::scan {

namespace {
constexpr long kMaxProbes = 100000;
}

config::Range parameter_bounds(const maps::MapFamily& family, int i) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (family.id) {
    case maps::FamilyId::Quadratic: return {maps::kMinA, maps::kMaxA};
    case maps::FamilyId::NormalizedQuadratic: return {-1.0, 1.0};
    case maps::FamilyId::PerturbedQuadratic:
        return i == 0 ? config::Range{maps::kMinA, maps::kMaxA} : config::Range{-inf, inf};
    case maps::FamilyId::Polynomial: return {-inf, inf};
    }
    return {-inf, inf};
}

std::optional<std::string> window_signature(const maps::MapFamily& family,
                                            const std::vector<double>& params, int n,
                                            const Budgets& budgets) {
    if (n < 1) {
        throw Error(ErrorCode::InvalidArgument, "window level must be >= 1");
    }
    std::optional<maps::MapInstance> m;
    try {
        m.emplace(family, params);
    } catch (const Error&) {
        return std::nullopt;
    }
    nest::NestOptions no;
    no.max_levels = n;
    no.max_period = budgets.renorm_max_period;
    no.mode = nest::NestMode::CriticalOnly;
    no.compute_tilde = false;
    no.limits = budgets.limits;
    const auto nst = nest::build_nest(*m, no);
    if (nst.status == nest::NestStatus::NoFixedPoint || static_cast<int>(nst.levels.size()) < n) {
        return std::nullopt;
    }
    std::string sig = "T";
    for (int p : nst.restrictive.tower) {
        sig += ":" + std::to_string(p);
    }
    for (int k = 0; k < n; ++k) {
        const auto& L = nst.levels[static_cast<std::size_t>(k)];
        if (!L.v || L.reliability == nest::Reliability::Unreliable) {
            return std::nullopt;
        }
        sig += "|v" + std::to_string(*L.v);
        if (k + 1 < n) {
            if (L.central) {
                sig += ",central";
            } else if (L.critical_return_time && L.s) {
                const double y = nest::iterate(*m, 0.0, *L.v);
                sig += ",r" + std::to_string(*L.critical_return_time) + (y > 0 ? "+" : "-") +
                       ",s" + std::to_string(*L.s);
            } else {
                return std::nullopt;
            }
        }
    }
    return sig;
}

ParameterWindow parameter_window(const maps::MapFamily& family, const std::vector<double>& params,
                                 int n, double window_tol, int param_index, const Budgets& budgets,
                                 double max_step) {
    if (!(window_tol > 0) || !(max_step >= window_tol)) {
        throw Error(ErrorCode::InvalidArgument, "need 0 < window_tol <= max_step");
    }
    if (param_index < 0 || param_index >= family.parameter_dim() ||
        static_cast<int>(params.size()) != family.parameter_dim()) {
        throw Error(ErrorCode::InvalidArgument, "parameter index out of range");
    }
    const auto k = static_cast<std::size_t>(param_index);
    auto sig_at = [&](double x) {
        auto p = params;
        p[k] = x;
        return window_signature(family, p, n, budgets);
    };
    const double base = params[k];
    const auto s0 = sig_at(base);
    const double nudge = 1e-13 * std::max(1.0, std::abs(base));
    if (!s0 || sig_at(base - nudge) != s0 || sig_at(base + nudge) != s0) {
        throw Error(ErrorCode::SignatureUnstable,
                    "the level-" + std::to_string(n) + " signature at the base parameter is not stable");
    }
    const auto bounds = parameter_bounds(family, param_index);

    ParameterWindow w;
    w.n = n;
    w.param_index = param_index;
    w.base = base;
    w.signature = *s0;
    for (int side : {-1, 1}) {
        const double bound = side < 0 ? bounds.lo : bounds.hi;
        double in = base;
        double out = base;
        bool hit_bound = false;
        double h = 0.0;
        for (long probe = 0;; ++probe) {
            if (probe == kMaxProbes) {
                throw Error(ErrorCode::MaxIterations, "window search exceeded " +
                                                            std::to_string(kMaxProbes) + " probes");
            }
            h += probe == 0 ? window_tol : std::min(h, max_step);
            double x = base + side * h;
            if (side * (x - bound) >= 0) {
                x = bound;
            }
            if (sig_at(x) == s0) {
                in = x;
                if (x == bound) {
                    hit_bound = true;
                    break;
                }
            } else {
                out = x;
                break;
            }
        }
        if (hit_bound) {
            out = in;
        } else {
            while (std::abs(out - in) > window_tol) {
                const double mid = 0.5 * (in + out);
                (sig_at(mid) == s0 ? in : out) = mid;
            }
        }
        (side < 0 ? w.lo : w.hi) = in;
        (side < 0 ? w.lo_out : w.hi_out) = out;
    }
    w.degenerate = w.hi - w.lo < window_tol;
    return w;
}

} // namespace nestlab::scan
