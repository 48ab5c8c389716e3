#include "nestlab/numerics.hpp"

#include <cstdlib>
#include <string>

namespace nestlab::numerics {

Precision::Precision(int mantissa_bits) : bits_(mantissa_bits) {
    if (mantissa_bits < kDefaultBits) {
        throw Error(ErrorCode::InvalidArgument,
                    "mantissa_bits must be >= 53, got " + std::to_string(mantissa_bits));
    }
    if (mantissa_bits > kMaxSupportedBits) {
        throw Error(ErrorCode::UnsupportedPrecision,
                    "only 53-bit arithmetic is built, got " + std::to_string(mantissa_bits));
    }
}

Precision Precision::from_environment() {
    const char* env = std::getenv("NESTLAB_BITS");
    if (env == nullptr || *env == '\0') {
        return Precision{};
    }
    char* end = nullptr;
    const long bits = std::strtol(env, &end, 10);
    if (end == env || *end != '\0') {
        throw Error(ErrorCode::ParseError, std::string("NESTLAB_BITS is not an integer: ") + env);
    }
    return Precision(static_cast<int>(bits));
}

Bracket Bracket::certify(const std::function<double(double)>& g, double lo, double hi) {
    if (!(lo < hi)) {
        throw Error(ErrorCode::NoSignChange, "bracket requires lo < hi");
    }
    const Sign slo = sign_of(g(lo));
    const Sign shi = sign_of(g(hi));
    if (slo == shi && slo != Sign::Zero) {
        throw Error(ErrorCode::NoSignChange,
                    "g has the same sign at " + std::to_string(lo) + " and " + std::to_string(hi));
    }
    return Bracket{lo, hi, slo, shi};
}

BisectionResult bisect(const std::function<double(double)>& g, const Bracket& b, double tol,
                       int max_iterations) {
    if (!(tol > 0)) {
        throw Error(ErrorCode::InvalidArgument, "bisection tolerance must be positive");
    }
    if (!(b.lo < b.hi) || (b.f_lo_sign == b.f_hi_sign && b.f_lo_sign != Sign::Zero)) {
        throw Error(ErrorCode::NoSignChange, "bracket does not certify a sign change");
    }
    if (b.f_lo_sign == Sign::Zero) {
        return {b.lo, b.lo, b.lo, 0};
    }
    if (b.f_hi_sign == Sign::Zero) {
        return {b.hi, b.hi, b.hi, 0};
    }
    double lo = b.lo;
    double hi = b.hi;
    int it = 0;
    while (hi - lo > tol) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) {
            throw Error(ErrorCode::MaxIterations,
                        "tolerance below the floating-point spacing at " + std::to_string(mid));
        }
        if (++it > max_iterations) {
            throw Error(ErrorCode::MaxIterations, "bisection iteration cap reached");
        }
        const Sign s = sign_of(g(mid));
        if (s == Sign::Zero) {
            return {mid, mid, mid, it};
        }
        if (s == b.f_lo_sign) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {lo + 0.5 * (hi - lo), lo, hi, it};
}

double bisect_root(const std::function<double(double)>& g, const Bracket& b, double tol) {
    return bisect(g, b, tol).root;
}

LogProduct accumulate_log_derivative(std::span<const double> factors) {
    LogProduct p;
    for (double x : factors) {
        p.multiply(x);
    }
    return p;
}

} // namespace nestlab::numerics
