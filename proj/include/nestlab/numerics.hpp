#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>

#include "nestlab/error.hpp"

namespace nestlab::numerics {

/// Working floating-point format. Only the hardware double format (53-bit
/// mantissa) is built; wider requests are rejected rather than silently
/// computed in double.
class Precision {
  public:
    static constexpr int kDefaultBits = 53;
    static constexpr int kMaxSupportedBits = 53;

    Precision() = default;
    explicit Precision(int mantissa_bits);

    [[nodiscard]] int mantissa_bits() const noexcept { return bits_; }
    /// Unit roundoff 2^(1-bits).
    [[nodiscard]] double epsilon() const noexcept { return std::ldexp(1.0, 1 - bits_); }

    /// Reads NESTLAB_BITS; unset means the default.
    static Precision from_environment();

  private:
    int bits_ = kDefaultBits;
};

enum class Sign : int { Negative = -1, Zero = 0, Positive = 1 };

inline Sign sign_of(double x) {
    return x > 0 ? Sign::Positive : (x < 0 ? Sign::Negative : Sign::Zero);
}

/// Interval [lo, hi] across which a function is known to change sign.
struct Bracket {
    double lo;
    double hi;
    Sign f_lo_sign;
    Sign f_hi_sign;

    /// Evaluates g at both ends; throws NoSignChange unless the signs differ.
    static Bracket certify(const std::function<double(double)>& g, double lo, double hi);
};

struct BisectionResult {
    double root;
    double lo;
    double hi;
    int iterations;
};

/// Bisection on a certified bracket down to width tol. The returned root is
/// the midpoint of the final bracket (or an exact zero if one is hit).
BisectionResult bisect(const std::function<double(double)>& g, const Bracket& b, double tol,
                       int max_iterations = 2000);

double bisect_root(const std::function<double(double)>& g, const Bracket& b, double tol);

/// Product of real factors kept as (ln|.|, sign). A zero factor is absorbing:
/// sign becomes Zero and log_abs becomes -infinity.
struct LogProduct {
    double log_abs = 0.0;
    Sign sign = Sign::Positive;
    long term_count = 0;

    void multiply(double factor) noexcept {
        ++term_count;
        if (sign == Sign::Zero) {
            return;
        }
        if (factor == 0.0) {
            sign = Sign::Zero;
            log_abs = -std::numeric_limits<double>::infinity();
            return;
        }
        log_abs += std::log(std::abs(factor));
        if (factor < 0) {
            sign = sign == Sign::Positive ? Sign::Negative : Sign::Positive;
        }
    }

    [[nodiscard]] bool is_zero() const noexcept { return sign == Sign::Zero; }
    /// exp(log_abs) with sign; overflows to +-inf for huge products.
    [[nodiscard]] double value() const noexcept {
        return static_cast<int>(sign) * std::exp(log_abs);
    }
};

LogProduct accumulate_log_derivative(std::span<const double> factors);

} // namespace nestlab::numerics
