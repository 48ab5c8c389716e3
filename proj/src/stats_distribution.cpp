#include <algorithm>
#include <cmath>

#include "nestlab/stats.hpp"

namespace nestlab::stats {

namespace {

std::vector<TailRow> tails(std::vector<int> values, double c, const ClassifierConstants& k, bool& consistent) {
    std::vector<TailRow> rows;
    consistent = true;
    if (values.empty()) {
        return rows;
    }
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    const int top = values.back();
    for (long t = 1; t <= std::max(top, 1); t *= 2) {
        const auto le = std::upper_bound(values.begin(), values.end(), static_cast<int>(t)) - values.begin();
        const auto ge = values.end() - std::lower_bound(values.begin(), values.end(), static_cast<int>(t));
        TailRow r;
        r.k = static_cast<double>(t);
        r.at_most = static_cast<double>(le) / n;
        r.at_least = static_cast<double>(ge) / n;
        r.lower_bound = r.k * std::pow(c, k.a_tilde);
        r.upper_bound = std::exp(-r.k * std::pow(c, k.b_tilde));
        consistent = consistent && r.at_most <= std::min(1.0, r.lower_bound) + 1e-12 &&
                     r.at_least <= r.upper_bound + 1e-12;
        rows.push_back(r);
    }
    return rows;
}

} // namespace

DistributionDiagnostics distribution_diagnostics(const maps::MapInstance& m, const nest::NestLevel& level,
                                                 int sample, const ClassifierConstants& consts) {
    if (sample < 1) {
        throw Error(ErrorCode::InvalidArgument, "sample must be positive");
    }
    DistributionDiagnostics out;
    out.level = level.n;
    out.sample = sample;
    if (!level.central_interval || !level.c) {
        out.critical_returns = false;
        return out;
    }
    if (!level.branches_enumerated || level.branches.empty()) {
        throw Error(ErrorCode::InsufficientBranches, "level has no branch table");
    }
    out.c = *level.c;
    const double p = level.interval.half_width;
    const double cw = level.central_interval->half_width;
    for (int i = 0; i < sample; ++i) {
        const double x = -p + 2.0 * p * (i + 0.5) / sample;
        if (std::abs(x) < cw) {
            out.return_times.push_back(*level.v);
        } else if (const nest::Branch* b = level.branch_at(x)) {
            out.return_times.push_back(b->return_time);
        }
        nest::LandingWord w;
        try {
            w = nest::landing_word(m, level, x, 10000, false);
        } catch (const Error&) {
            ++out.truncated;
            continue;
        }
        if (w.truncated) {
            ++out.truncated;
            continue;
        }
        ++out.landed;
        if (w.word.empty()) {
            ++out.already_in;
        }
        out.word_lengths.push_back(static_cast<int>(w.word.size()));
    }
    if (!out.word_lengths.empty()) {
        auto v = out.word_lengths;
        const auto mid = v.begin() + static_cast<long>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        double med = *mid;
        if (v.size() % 2 == 0) {
            med = 0.5 * (med + *std::max_element(v.begin(), mid));
        }
        out.median_word_length = med;
    }
    out.word_tail = tails(out.word_lengths, out.c, consts, out.word_tail_consistent);
    out.return_tail = tails(out.return_times, out.c, consts, out.return_tail_consistent);
    return out;
}

} // namespace nestlab::stats
