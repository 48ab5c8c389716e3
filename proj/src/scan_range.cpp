#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include <omp.h>

#include "nestlab/scan.hpp"

namespace nestlab::scan {

namespace {

constexpr std::uint32_t kLineSalt = 0x6c696e65;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Standard normal by Box-Muller on the 53-bit uniforms.
double normal(std::mt19937_64& g) {
    const double u1 = 1.0 - unit(g);
    const double u2 = unit(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace

std::string to_string(Sampling s) { return s == Sampling::Uniform ? "uniform" : "stratified"; }

Sampling sampling_from_string(const std::string& s) {
    if (s == "uniform") {
        return Sampling::Uniform;
    }
    if (s == "stratified") {
        return Sampling::Stratified;
    }
    throw Error(ErrorCode::ParseError, "sampling must be uniform or stratified, got '" + s + "'");
}

std::vector<double> sample_parameters(const maps::MapFamily& family, const ScanWindow& window,
                                      const ScanOptions& opt, long i) {
    const auto dim = static_cast<std::size_t>(family.parameter_dim());
    if (window.ranges.size() != dim) {
        throw Error(ErrorCode::InvalidArgument, "window needs one range per family parameter");
    }
    std::vector<std::size_t> free;
    std::vector<double> p(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        p[k] = window.ranges[k].lo;
        if (!window.ranges[k].degenerate()) {
            free.push_back(k);
        }
    }
    auto g = stream(opt.seed, 0, static_cast<std::uint64_t>(i));
    double u = unit(g);
    if (opt.sampling == Sampling::Stratified) {
        u = (static_cast<double>(i) + u) / static_cast<double>(opt.samples);
    }
    if (free.size() == 1) {
        const auto& r = window.ranges[free[0]];
        p[free[0]] = r.lo + u * (r.hi - r.lo);
        return p;
    }
    if (free.empty()) {
        return p;
    }

    std::vector<double> base(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        base[k] = window.base ? (*window.base)[k]
                              : 0.5 * (window.ranges[k].lo + window.ranges[k].hi);
    }
    const long line = i % std::max(1, opt.lines);
    auto gl = stream(opt.seed, kLineSalt, static_cast<std::uint64_t>(line));
    std::vector<double> d(dim, 0.0);
    double norm = 0.0;
    while (norm == 0.0) {
        for (std::size_t k : free) {
            d[k] = normal(gl);
            norm += d[k] * d[k];
        }
    }
    norm = std::sqrt(norm);
    double smin = -std::numeric_limits<double>::infinity();
    double smax = std::numeric_limits<double>::infinity();
    for (std::size_t k : free) {
        d[k] /= norm;
        if (d[k] == 0.0) {
            continue;
        }
        const double s1 = (window.ranges[k].lo - base[k]) / d[k];
        const double s2 = (window.ranges[k].hi - base[k]) / d[k];
        smin = std::max(smin, std::min(s1, s2));
        smax = std::min(smax, std::max(s1, s2));
    }
    const double s = smin + u * (smax - smin);
    for (std::size_t k : free) {
        p[k] = std::clamp(base[k] + s * d[k], window.ranges[k].lo, window.ranges[k].hi);
    }
    return p;
}

ScanRecord classify_sample(const maps::MapFamily& family, const ScanWindow& window,
                           const Budgets& budgets, const ScanOptions& opt, long i) {
    ScanRecord r;
    r.index = i;
    r.params = sample_parameters(family, window, opt, i);
    switch (family.id) {
    case maps::FamilyId::Quadratic:
    case maps::FamilyId::PerturbedQuadratic:
        r.a = r.params[0];
        r.t = maps::t_from_a(r.params[0]);
        break;
    case maps::FamilyId::NormalizedQuadratic:
        r.t = r.params[0];
        r.a = maps::a_from_t(r.params[0]);
        break;
    case maps::FamilyId::Polynomial:
        break;
    }
    r.cls = classify_parameter(family, r.params, budgets);
    return r;
}

std::vector<ScanRecord> scan_range(const maps::MapFamily& family, const ScanWindow& window,
                                   const Budgets& budgets, const ScanOptions& opt, long first) {
    if (opt.samples < 1) {
        throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
    }
    budgets.validate();
    const long n = opt.samples - first;
    std::vector<ScanRecord> out(static_cast<std::size_t>(std::max(0L, n)));
    if (opt.exec == Exec::Serial) {
        for (long i = first; i < opt.samples; ++i) {
            out[static_cast<std::size_t>(i - first)] = classify_sample(family, window, budgets, opt, i);
        }
        return out;
    }
    std::exception_ptr failure;
    const int threads = opt.jobs > 0 ? opt.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long i = first; i < opt.samples; ++i) {
        try {
            out[static_cast<std::size_t>(i - first)] = classify_sample(family, window, budgets, opt, i);
        } catch (...) {
#pragma omp critical(scan_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return out;
}

double ScanSummary::fraction(Verdict v) const {
    if (total == 0) {
        return 0.0;
    }
    long k = 0;
    switch (v) {
    case Verdict::Regular: k = regular; break;
    case Verdict::CECandidate: k = ce_candidate; break;
    case Verdict::Renormalizable: k = renormalizable; break;
    case Verdict::Undetermined: k = undetermined; break;
    }
    return static_cast<double>(k) / static_cast<double>(total);
}

ScanSummary summarize(const std::vector<ScanRecord>& records) {
    ScanSummary s;
    for (const auto& r : records) {
        ++s.total;
        switch (r.cls.verdict) {
        case Verdict::Regular: ++s.regular; break;
        case Verdict::CECandidate: ++s.ce_candidate; break;
        case Verdict::Renormalizable: ++s.renormalizable; break;
        case Verdict::Undetermined: ++s.undetermined; break;
        }
    }
    return s;
}

} // namespace nestlab::scan
