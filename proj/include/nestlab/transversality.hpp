#pragma once

#include <functional>
#include <vector>

#include "nestlab/maps.hpp"

namespace nestlab::transversality {

struct Summability {
    double partial_sum = 0.0;  ///< sum over 1 <= k <= N of 1/|Df^k(f(0))|
    double decay_ratio = 0.0;  ///< geometric mean of t_{k+1}/t_k over the last N/2 terms
    double tail_bound = 0.0;   ///< geometric majorant of the remaining terms
    bool geometric_tail = false; ///< decay_ratio <= 1/2
    std::vector<double> terms;   ///< terms[k-1] = 1/|Df^k(f(0))|
};

Summability summability_check(const maps::MapInstance& m, int N);

struct TransversalitySum {
    std::vector<double> partial_sums; ///< [j] = sum over 0 <= k <= j of v(f^k(0)) / Df^k(f(0))
    double tail_bound = 0.0;
    bool converged = false;
    double value = 0.0;
    bool transverse = false; ///< |value| > tail_bound
};

/// v(x) = (1 - (x/B)^2) P((x/B)^2) with P in Chebyshev form on s = (x/B)^2 in [0, 1].
struct PolynomialVectorField {
    double half_width = 1.0;
    std::vector<double> chebyshev;

    [[nodiscard]] double operator()(double x) const;
    /// Coefficients of P in powers of s (for display; ill-conditioned at high degree).
    [[nodiscard]] std::vector<double> monomial() const;
};

using Field = std::function<double(double)>;

/// sup |v| on the map's interval, sampled on a dense grid.
double field_sup(const maps::MapInstance& m, const Field& v, int grid = 4097);

TransversalitySum nu_functional(const maps::MapInstance& m, const Field& v, int N);

TransversalitySum tsujii_sum(const maps::MapFamily& fam, const std::vector<double>& params,
                             std::vector<double> direction, int N);

struct TransversalField {
    PolynomialVectorField field;
    double eps = 0.0;          ///< half-width of the neighbourhood of 0 carrying the bump
    double S = 0.0;            ///< 1 + sum of 1/|Df^k(f(0))| + tail
    double near_sum = 0.0;     ///< terms with |f^k(0)| < eps, k >= 1, plus the tail
    double certified_lower = 0.0; ///< 1 - 2 near_sum - 1/10
    TransversalitySum check;   ///< nu_functional of the field
};

TransversalField construct_transversal_field(const maps::MapInstance& m, int N, int degree_cap = 64);

} // namespace nestlab::transversality
