#include <algorithm>
#include <cmath>
#include <limits>

#include "nestlab/numerics.hpp"
#include "nestlab/scan.hpp"
#include "nestlab/stats.hpp"

namespace nestlab::scan {

namespace {

using config::format_double;

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + format_double(v[i]);
    }
    return out;
}

} // namespace

config::KeyValues Budgets::to_key_values() const {
    return {
        {"max_iter", std::to_string(max_iter)},
        {"max_period", std::to_string(max_period)},
        {"cycle_tol", format_double(cycle_tol)},
        {"mult_tol", format_double(mult_tol)},
        {"renorm_max_period", std::to_string(renorm_max_period)},
        {"renorm_depth", std::to_string(renorm_depth)},
        {"nest_levels", std::to_string(nest_levels)},
        {"ce_n", std::to_string(ce_N)},
        {"tail_fraction", format_double(tail_fraction)},
        {"ce_threshold", format_double(ce_threshold)},
        {"recurrence_n", std::to_string(recurrence_N)},
        {"wr_n", std::to_string(wr_N)},
        {"wr_deltas", join_doubles(wr_deltas)},
        {"bce_depth", std::to_string(bce_depth)},
        {"bits", std::to_string(bits)},
        {"max_return_time", std::to_string(limits.max_return_time)},
        {"min_branch_fraction", format_double(limits.min_branch_fraction)},
        {"max_branches", std::to_string(limits.max_branches)},
        {"max_landing_steps", std::to_string(limits.max_landing_steps)},
    };
}

void Budgets::apply(const config::KeyValues& kv) {
    for (const auto& [k, v] : kv) {
        auto as_int = [&] { return static_cast<int>(config::to_long(k, v)); };
        if (k == "max_iter") {
            max_iter = config::to_long(k, v);
        } else if (k == "max_period") {
            max_period = as_int();
        } else if (k == "cycle_tol") {
            cycle_tol = config::to_double(k, v);
        } else if (k == "mult_tol") {
            mult_tol = config::to_double(k, v);
        } else if (k == "renorm_max_period") {
            renorm_max_period = as_int();
        } else if (k == "renorm_depth") {
            renorm_depth = as_int();
        } else if (k == "nest_levels") {
            nest_levels = as_int();
        } else if (k == "ce_n") {
            ce_N = as_int();
        } else if (k == "tail_fraction") {
            tail_fraction = config::to_double(k, v);
        } else if (k == "ce_threshold") {
            ce_threshold = config::to_double(k, v);
        } else if (k == "recurrence_n") {
            recurrence_N = as_int();
        } else if (k == "wr_n") {
            wr_N = as_int();
        } else if (k == "wr_deltas") {
            wr_deltas = config::to_double_list(k, v);
        } else if (k == "bce_depth") {
            bce_depth = as_int();
        } else if (k == "bits") {
            bits = as_int();
        } else if (k == "max_return_time") {
            limits.max_return_time = as_int();
        } else if (k == "min_branch_fraction") {
            limits.min_branch_fraction = config::to_double(k, v);
        } else if (k == "max_branches") {
            limits.max_branches = as_int();
        } else if (k == "max_landing_steps") {
            limits.max_landing_steps = as_int();
        } else {
            throw Error(ErrorCode::ParseError, "unknown budget key '" + k + "'");
        }
    }
}

void Budgets::validate() const {
    (void)numerics::Precision(bits);
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw Error(ErrorCode::InvalidArgument, what);
        }
    };
    require(max_period >= 1 && max_period <= 1000, "max_period must be in [1, 1000]");
    require(max_iter >= 2L * max_period + 2, "max_iter must be >= 2 max_period + 2");
    require(cycle_tol > 0 && mult_tol > 0 && mult_tol < 1, "cycle_tol and mult_tol must be positive");
    require(renorm_max_period >= 1 && renorm_depth >= 1, "renormalization budgets must be >= 1");
    require(nest_levels >= 1, "nest_levels must be >= 1");
    require(ce_N >= 2, "ce_n must be >= 2");
    require(tail_fraction >= 0 && tail_fraction < 1, "tail_fraction must lie in [0, 1)");
    require(recurrence_N >= 100, "recurrence_n must be >= 100");
    require(wr_N >= 1000, "wr_n must be >= 1000");
    require(!wr_deltas.empty(), "wr_deltas must not be empty");
    for (std::size_t i = 0; i < wr_deltas.size(); ++i) {
        require(wr_deltas[i] > 0 && (i == 0 || wr_deltas[i] < wr_deltas[i - 1]),
                "wr_deltas must be positive and strictly decreasing");
    }
    require(bce_depth >= 1 && bce_depth <= 30, "bce_depth must be in [1, 30]");
    require(limits.max_return_time >= 1 && limits.max_branches >= 1 && limits.max_landing_steps >= 1,
            "nest limits must be positive");
    require(limits.min_branch_fraction > 0 && limits.min_branch_fraction < 1,
            "min_branch_fraction must lie in (0, 1)");
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::Regular: return "Regular";
    case Verdict::CECandidate: return "CECandidate";
    case Verdict::Renormalizable: return "Renormalizable";
    case Verdict::Undetermined: return "Undetermined";
    }
    return "Undetermined";
}

std::string to_string(Reason r) {
    switch (r) {
    case Reason::None: return "";
    case Reason::BudgetExhausted: return "BudgetExhausted";
    case Reason::Unreliable: return "Unreliable";
    case Reason::NeutralSuspected: return "NeutralSuspected";
    case Reason::CriticalNonReturningCE: return "CriticalNonReturningCE";
    }
    return "";
}

Verdict verdict_from_string(const std::string& s) {
    for (Verdict v : {Verdict::Regular, Verdict::CECandidate, Verdict::Renormalizable,
                      Verdict::Undetermined}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw Error(ErrorCode::ParseError, "unknown verdict '" + s + "'");
}

Reason reason_from_string(const std::string& s) {
    for (Reason r : {Reason::None, Reason::BudgetExhausted, Reason::Unreliable,
                     Reason::NeutralSuspected, Reason::CriticalNonReturningCE}) {
        if (to_string(r) == s) {
            return r;
        }
    }
    throw Error(ErrorCode::ParseError, "unknown reason '" + s + "'");
}

std::optional<bool> deepest_pair_decays(const Classification& cls) {
    std::vector<double> c = cls.c;
    if (cls.c_bound) {
        c.push_back(*cls.c_bound);
    }
    if (c.size() < 2) {
        return std::nullopt;
    }
    return c[c.size() - 1] < 0.5 * c[c.size() - 2];
}

Classification classify_parameter(const maps::MapFamily& family, const std::vector<double>& params,
                                  const Budgets& budgets) {
    budgets.validate();
    Classification out;
    std::optional<maps::MapInstance> inst;
    try {
        inst.emplace(family, params);
    } catch (const Error& e) {
        out.flags.emplace_back("invalid_parameter");
        out.detail = e.what();
        return out;
    }
    const maps::MapInstance& m = *inst;

    try {
        const auto reg = kneading::detect_regular(m, budgets.max_iter, budgets.max_period,
                                                  {budgets.cycle_tol, budgets.mult_tol});
        if (reg) {
            out.verdict = Verdict::Regular;
            out.period = reg->period;
            out.multiplier = reg->multiplier;
            if (reg->borderline) {
                out.flags.emplace_back("borderline");
            }
            return out;
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NeutralSuspected) {
            throw;
        }
        out.reason = Reason::NeutralSuspected;
        out.detail = e.what();
        return out;
    }

    if (const auto ren = kneading::detect_renormalization(m, budgets.renorm_max_period)) {
        out.renorm_period = ren->period;
        out.renorm_depth = static_cast<int>(ren->tower.size());
        if (out.renorm_depth >= budgets.renorm_depth || ren->max_period_exceeded) {
            out.verdict = Verdict::Renormalizable;
            return out;
        }
        out.flags.emplace_back("renormalizable");
    }

    nest::NestOptions no;
    no.max_levels = budgets.nest_levels;
    no.max_period = budgets.renorm_max_period;
    no.mode = nest::NestMode::CriticalOnly;
    no.compute_tilde = false;
    no.limits = budgets.limits;
    const nest::Nest nst = nest::build_nest(m, no);
    out.nest_depth = static_cast<int>(nst.levels.size());
    for (const auto& L : nst.levels) {
        if (L.reliability == nest::Reliability::Reliable && L.c) {
            ++out.reliable_levels;
            out.c.push_back(*L.c);
        }
        if (L.central) {
            ++out.central_levels;
        }
    }
    if (nst.status == nest::NestStatus::Unreliable) {
        for (const auto& L : nst.levels) {
            if (L.reliability == nest::Reliability::Unreliable && L.central_interval) {
                const double resolution = 1e3 * std::numeric_limits<double>::epsilon() * m.half_width();
                out.c_bound = resolution / (2.0 * L.interval.half_width);
                break;
            }
        }
    }

    bool escaped = false;
    try {
        (void)maps::iterate_critical_orbit(m, budgets.ce_N);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EscapedDomain) {
            throw;
        }
        escaped = true;
        out.flags.emplace_back("escaped");
    }

    try {
        const auto ce = stats::ce_series(m, budgets.ce_N, &nst.levels, budgets.tail_fraction);
        out.lambda_hat = ce.liminf_estimate;
        for (const auto& e : ce.e) {
            if (e) {
                out.e.push_back(*e);
            }
        }
    } catch (const stats::CriticalOrbitPeriodicError& e) {
        out.flags.emplace_back("critical_orbit_periodic");
        out.reason = Reason::BudgetExhausted;
        out.detail = e.what();
        return out;
    }

    const auto rec = stats::recurrence_exponent(m, budgets.recurrence_N);
    if (!rec.periodic) {
        out.recurrence_exponent = rec.non_recurrent ? 0.0 : rec.fitted_exponent;
    }
    out.wr = stats::wr_statistic(m, budgets.wr_N, budgets.wr_deltas).back().value;
    out.bce = stats::bce_min_exponent(m, budgets.bce_depth, Exec::Serial).back().min_exponent;

    const bool ce_ok = *out.lambda_hat >= budgets.ce_threshold && !escaped;
    if (ce_ok && out.recurrence_exponent && std::isfinite(*out.recurrence_exponent)) {
        out.verdict = Verdict::CECandidate;
        return out;
    }
    if (nst.status == nest::NestStatus::Unreliable) {
        out.reason = Reason::Unreliable;
    } else if (nst.status == nest::NestStatus::CriticalNonReturning) {
        out.reason = Reason::CriticalNonReturningCE;
    } else {
        out.reason = Reason::BudgetExhausted;
    }
    out.detail = ce_ok ? "no finite recurrence exponent"
                       : "lambda_hat " + format_double(*out.lambda_hat) + " below ce_threshold " +
                             format_double(budgets.ce_threshold);
    return out;
}

} // namespace nestlab::scan
