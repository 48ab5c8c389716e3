#include "nestlab/transversality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace nestlab::transversality {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct CriticalTerms {
    std::vector<double> points; ///< [k] = f^k(0), k = 0..N
    std::vector<double> log_abs; ///< [k] = ln|Df^k(f(0))|, k = 0..N
    std::vector<int> sign;
};

CriticalTerms critical_terms(const maps::MapInstance& m, int N) {
    const double tol = 1e3 * kEps * m.half_width();
    CriticalTerms t;
    t.points.push_back(0.0);
    t.log_abs.push_back(0.0);
    t.sign.push_back(1);
    double x = m.value(0.0);
    for (int k = 1; k <= N; ++k) {
        if (std::abs(x) <= tol) {
            throw Error(ErrorCode::ZeroDerivative,
                        "Df(f^" + std::to_string(k) + "(0)) vanishes: the critical orbit returns to 0");
        }
        const double d = m.derivative(x);
        t.points.push_back(x);
        t.log_abs.push_back(t.log_abs.back() + std::log(std::abs(d)));
        t.sign.push_back(d < 0 ? -t.sign.back() : t.sign.back());
        x = m.value(x);
    }
    return t;
}

// Geometric majorant of sum over k > N of 1/|Df^k(f(0))| from the last half of the terms.
void tail_estimate(const CriticalTerms& t, int N, double& ratio, double& tail) {
    const int h = N / 2;
    ratio = std::exp((t.log_abs[static_cast<std::size_t>(h)] - t.log_abs[static_cast<std::size_t>(N)]) / (N - h));
    const double last = std::exp(-t.log_abs[static_cast<std::size_t>(N)]);
    tail = ratio < 1.0 ? last * ratio / (1.0 - ratio) : std::numeric_limits<double>::infinity();
}

// Chebyshev T_0..T_d at y in [-1, 1].
void chebyshev_row(double y, int d, double* out) {
    out[0] = 1.0;
    if (d >= 1) {
        out[1] = y;
    }
    for (int i = 2; i <= d; ++i) {
        out[i] = 2.0 * y * out[i - 1] - out[i - 2];
    }
}

// Smooth step: 1 for t <= 0, 0 for t >= 1.
double smooth_step(double t) {
    if (t <= 0.0) {
        return 1.0;
    }
    if (t >= 1.0) {
        return 0.0;
    }
    const double a = std::exp(-1.0 / (1.0 - t));
    const double b = std::exp(-1.0 / t);
    return a / (a + b);
}

} // namespace

Summability summability_check(const maps::MapInstance& m, int N) {
    if (N < 10) {
        throw Error(ErrorCode::InvalidArgument, "summability_check needs N >= 10");
    }
    const CriticalTerms t = critical_terms(m, N);
    Summability s;
    for (int k = 1; k <= N; ++k) {
        s.terms.push_back(std::exp(-t.log_abs[static_cast<std::size_t>(k)]));
        s.partial_sum += s.terms.back();
    }
    tail_estimate(t, N, s.decay_ratio, s.tail_bound);
    s.geometric_tail = s.decay_ratio <= 0.5;
    return s;
}

double PolynomialVectorField::operator()(double x) const {
    const double s = (x / half_width) * (x / half_width);
    const double y = 2.0 * s - 1.0;
    // Clenshaw.
    double b1 = 0.0;
    double b2 = 0.0;
    for (std::size_t i = chebyshev.size(); i-- > 1;) {
        const double b0 = 2.0 * y * b1 - b2 + chebyshev[i];
        b2 = b1;
        b1 = b0;
    }
    const double p = chebyshev.empty() ? 0.0 : y * b1 - b2 + chebyshev[0];
    return (1.0 - s) * p;
}

std::vector<double> PolynomialVectorField::monomial() const {
    // T_i(2s - 1) expanded in powers of s.
    const std::size_t n = chebyshev.size();
    std::vector<double> out(n, 0.0);
    std::vector<double> prev(n, 0.0);
    std::vector<double> cur(n, 0.0);
    if (n == 0) {
        return out;
    }
    prev[0] = 1.0; // T_0
    out[0] = chebyshev[0];
    if (n == 1) {
        return out;
    }
    cur[0] = -1.0; // T_1 = 2s - 1
    cur[1] = 2.0;
    for (std::size_t k = 0; k < n; ++k) {
        out[k] += chebyshev[1] * cur[k];
    }
    for (std::size_t i = 2; i < n; ++i) {
        std::vector<double> next(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            next[k] += -2.0 * cur[k] - prev[k];
            if (k + 1 < n) {
                next[k + 1] += 4.0 * cur[k];
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            out[k] += chebyshev[i] * next[k];
        }
        prev = std::move(cur);
        cur = std::move(next);
    }
    return out;
}

double field_sup(const maps::MapInstance& m, const Field& v, int grid) {
    const double B = m.half_width();
    double sup = 0.0;
    for (int i = 0; i < grid; ++i) {
        sup = std::max(sup, std::abs(v(-B + 2.0 * B * i / (grid - 1))));
    }
    return sup;
}

TransversalitySum nu_functional(const maps::MapInstance& m, const Field& v, int N) {
    if (N < 10) {
        throw Error(ErrorCode::InvalidArgument, "nu_functional needs N >= 10");
    }
    const CriticalTerms t = critical_terms(m, N);
    double ratio = 0.0;
    double tail = 0.0;
    tail_estimate(t, N, ratio, tail);
    if (!(ratio < 1.0)) {
        throw Error(ErrorCode::NotSummable, "1/|Df^k(f(0))| does not decay over the last N/2 terms");
    }
    TransversalitySum out;
    double sum = 0.0;
    for (int k = 0; k <= N; ++k) {
        const auto i = static_cast<std::size_t>(k);
        sum += t.sign[i] * v(t.points[i]) * std::exp(-t.log_abs[i]);
        out.partial_sums.push_back(sum);
    }
    out.value = sum;
    out.tail_bound = field_sup(m, v) * tail;
    out.converged = std::isfinite(out.tail_bound);
    out.transverse = out.converged && std::abs(out.value) > out.tail_bound;
    return out;
}

TransversalitySum tsujii_sum(const maps::MapFamily& fam, const std::vector<double>& params,
                             std::vector<double> direction, int N) {
    if (direction.size() != params.size()) {
        throw Error(ErrorCode::InvalidArgument, "direction and parameter vectors differ in length");
    }
    double norm = 0.0;
    for (double d : direction) {
        norm += d * d;
    }
    norm = std::sqrt(norm);
    if (!(norm > 0)) {
        throw Error(ErrorCode::InvalidArgument, "direction must be nonzero");
    }
    for (double& d : direction) {
        d /= norm;
    }
    const maps::MapInstance m(fam, params);
    return nu_functional(
        m, [&](double x) { return maps::family_velocity(fam, params, direction, x); }, N);
}

TransversalField construct_transversal_field(const maps::MapInstance& m, int N, int degree_cap) {
    if (degree_cap < 0) {
        throw Error(ErrorCode::InvalidArgument, "degree cap must be >= 0");
    }
    const Summability sum = summability_check(m, N);
    if (!(sum.decay_ratio < 1.0)) {
        throw Error(ErrorCode::NotSummable, "1/|Df^k(f(0))| does not decay over the last N/2 terms");
    }
    const CriticalTerms t = critical_terms(m, N);
    const double B = m.half_width();
    TransversalField out;
    out.S = 1.0 + sum.partial_sum + sum.tail_bound;

    // Largest eps = B 2^(-i/4) whose recurrent terms stay below 1/3.
    double eps = 0.0;
    for (int i = 4; i <= 160; ++i) {
        const double e = B * std::pow(2.0, -i / 4.0);
        double near = sum.tail_bound;
        for (int k = 1; k <= N; ++k) {
            if (std::abs(t.points[static_cast<std::size_t>(k)]) < e) {
                near += sum.terms[static_cast<std::size_t>(k - 1)];
            }
        }
        if (near < 1.0 / 3.0) {
            eps = e;
            out.near_sum = near;
            break;
        }
    }
    if (eps == 0.0) {
        throw Error(ErrorCode::BumpInfeasible, "no neighbourhood of 0 keeps the recurrent terms below 1/3");
    }
    out.eps = eps;
    out.certified_lower = 1.0 - 2.0 * out.near_sum - 0.1;

    const double far_bound = 1.0 / (10.0 * out.S);
    const int samples = 4000;
    const int check = 20001;
    auto target = [&](double x) { return 1.5 * smooth_step((std::abs(x) - eps / 2) / (eps / 2)); };
    for (int d = std::min(4, degree_cap);; d = std::min(degree_cap, 2 * d + 2)) {
        Eigen::MatrixXd A(samples, d + 1);
        Eigen::VectorXd rhs(samples);
        std::vector<double> row(static_cast<std::size_t>(d) + 1);
        for (int i = 0; i < samples; ++i) {
            // Denser sampling near 0 where the bump lives.
            const double u = (i + 0.5) / samples;
            const double x = B * u * u;
            const double s = (x / B) * (x / B);
            chebyshev_row(2.0 * s - 1.0, d, row.data());
            const double w = std::abs(x) >= eps ? 1.0 / far_bound : 1.0;
            for (int j = 0; j <= d; ++j) {
                A(i, j) = w * (1.0 - s) * row[static_cast<std::size_t>(j)];
            }
            rhs(i) = w * target(x);
        }
        const Eigen::VectorXd c = A.colPivHouseholderQr().solve(rhs);
        PolynomialVectorField v{B, std::vector<double>(c.data(), c.data() + c.size())};
        bool ok = true;
        for (int i = 0; i < check && ok; ++i) {
            const double x = B * i / (check - 1);
            const double y = v(x);
            ok = std::abs(y) < 2.0 && (x >= eps / 2 || y > 1.0) && (x < eps || std::abs(y) < far_bound);
        }
        if (ok) {
            out.field = v;
            out.check = nu_functional(m, v, N);
            if (!(out.check.value > out.check.tail_bound && out.check.value >= out.certified_lower)) {
                throw Error(ErrorCode::BumpInfeasible, "fitted field fails the nu_functional check");
            }
            return out;
        }
        if (d == degree_cap) {
            break;
        }
    }
    throw Error(ErrorCode::BumpInfeasible,
                "no polynomial of degree <= " + std::to_string(degree_cap) + " meets the bump bounds");
}

} // namespace nestlab::transversality
