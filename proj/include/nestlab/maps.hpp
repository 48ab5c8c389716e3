#pragma once

#include <span>
#include <string>
#include <vector>

#include "nestlab/numerics.hpp"

namespace nestlab::maps {

enum class FamilyId {
    Quadratic,           ///< raw a - x^2 on [-beta_a, beta_a], parameter a
    NormalizedQuadratic, ///< affine rescaling of Quadratic to [-1,1], parameter t
    PerturbedQuadratic,  ///< normalized quadratic + eps (1-x^2)^2, parameters (a, eps)
    Polynomial,          ///< -1 + sum_k c_k (1-x^2)^k, parameters (c_1..c_K)
};

std::string to_string(FamilyId id);

/// Raw-parameter bounds of the quadratic family.
inline constexpr double kMinA = -0.25;
inline constexpr double kMaxA = 2.0;

/// beta_a = (1 + sqrt(1 + 4a)) / 2, the half-width of the invariant interval of a - x^2.
double beta(double a);
/// t -> a = 7/8 + (9/8) t and its inverse.
double a_from_t(double t);
double t_from_a(double a);

struct MapFamily {
    FamilyId id = FamilyId::NormalizedQuadratic;
    /// Polynomial families carry their degree here; unused otherwise.
    int degree = 0;

    [[nodiscard]] int parameter_dim() const;
    [[nodiscard]] std::vector<std::string> parameter_names() const;
    bool operator==(const MapFamily&) const = default;
};

struct Jet {
    double value;
    double d1;
    double d2;
    double d3;
};

/// One even unimodal map with its critical point at 0. Immutable.
class MapInstance {
  public:
    MapInstance(MapFamily family, std::vector<double> params);

    static MapInstance quadratic(double a);
    static MapInstance normalized_quadratic_t(double t);
    static MapInstance normalized_quadratic_a(double a);
    static MapInstance perturbed_quadratic(double a, double eps);
    static MapInstance polynomial(std::vector<double> coefficients);

    [[nodiscard]] const MapFamily& family() const noexcept { return family_; }
    [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
    /// Dynamical interval is [-half_width, half_width].
    [[nodiscard]] double half_width() const noexcept { return half_width_; }
    /// Raw quadratic parameter when the instance belongs to a quadratic-based family.
    [[nodiscard]] double raw_a() const noexcept { return raw_a_; }
    /// Human-readable spec in the CLI grammar.
    [[nodiscard]] std::string describe() const;

    /// Unchecked fast paths used by the orbit kernels.
    [[nodiscard]] double value(double x) const noexcept {
        if (raw_) {
            return raw_a_ - x * x;
        }
        const double u = 1.0 - x * x;
        double g = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
            g = g * u + *it;
        }
        return -1.0 + g * u;
    }

    [[nodiscard]] double derivative(double x) const noexcept {
        if (raw_) {
            return -2.0 * x;
        }
        const double u = 1.0 - x * x;
        double gp = 0.0;
        for (std::size_t k = coeffs_.size(); k >= 1; --k) {
            gp = gp * u + static_cast<double>(k) * coeffs_[k - 1];
        }
        return -2.0 * x * gp;
    }

    /// Value and derivative in one pass.
    void value_and_derivative(double x, double& v, double& d) const noexcept {
        v = value(x);
        d = derivative(x);
    }

    /// Checked jet (value, D, D^2, D^3). Throws OutOfDomain outside the interval.
    [[nodiscard]] Jet jet(double x) const;

    /// The preimage x >= 0 with f(x) = y, or NaN when y is not in f([0, half_width]).
    [[nodiscard]] double positive_preimage(double y) const;

  private:
    MapFamily family_;
    std::vector<double> params_;
    bool raw_ = false;
    double raw_a_ = 0.0;
    double half_width_ = 1.0;
    std::vector<double> coeffs_; ///< c_1..c_K in powers of u = 1 - x^2
};

Jet evaluate_jet(const MapInstance& m, double x);

/// Sf = D^3 f / Df - 3/2 (D^2 f / Df)^2. Throws AtCriticalPoint near 0.
double schwarzian(const MapInstance& m, double x);

struct SUnimodalReport {
    bool even = true;
    bool boundary = true;
    bool maps_into_interval = true;
    bool unimodal = true;
    bool nondegenerate_critical_point = true;
    bool negative_schwarzian = true;
    double first_failure_x = 0.0;
    std::string first_failure;

    [[nodiscard]] bool pass() const noexcept {
        return even && boundary && maps_into_interval && unimodal && nondegenerate_critical_point &&
               negative_schwarzian;
    }
};

/// Grid check of the S-unimodal requirements; Sf is checked outside |x| < hole * half_width.
SUnimodalReport verify_s_unimodal(const MapInstance& m, int grid_size, double hole = 0.01);

struct OrbitSegment {
    std::vector<double> points;                        ///< 0, f(0), ..., f^N(0)
    std::vector<numerics::LogProduct> log_derivatives; ///< [k] = Df^k(f(0)), k = 0..N-1
};

/// Critical orbit of length N. Throws EscapedDomain when an iterate leaves
/// the interval by more than 10 eps (relative).
OrbitSegment iterate_critical_orbit(const MapInstance& m, int N);

/// Exact directional derivative d/ds f_{p + s*direction}(x) at s = 0.
double family_velocity(const MapFamily& fam, std::span<const double> params,
                       std::span<const double> direction, double x);

/// Central finite-difference version of family_velocity; step h <= 0 selects eps^(1/3).
double family_velocity_fd(const MapFamily& fam, std::span<const double> params,
                          std::span<const double> direction, double x, double h = 0.0);

} // namespace nestlab::maps
