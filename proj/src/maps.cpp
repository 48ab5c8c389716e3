#include "nestlab/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nestlab::maps {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double beta_prime(double a) { return 1.0 / std::sqrt(1.0 + 4.0 * a); }

void check_raw_a(double a) {
    if (!(a >= kMinA && a <= kMaxA)) {
        throw Error(ErrorCode::OutOfDomain,
                    "quadratic parameter a must lie in [-1/4, 2], got " + std::to_string(a));
    }
}

std::string format_number(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

} // namespace

std::string to_string(FamilyId id) {
    switch (id) {
    case FamilyId::Quadratic: return "quadratic";
    case FamilyId::NormalizedQuadratic: return "nquadratic";
    case FamilyId::PerturbedQuadratic: return "pquadratic";
    case FamilyId::Polynomial: return "poly";
    }
    return "unknown";
}

double beta(double a) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * a)); }
double a_from_t(double t) { return 0.875 + 1.125 * t; }
double t_from_a(double a) { return (a - 0.875) / 1.125; }

int MapFamily::parameter_dim() const {
    switch (id) {
    case FamilyId::Quadratic:
    case FamilyId::NormalizedQuadratic: return 1;
    case FamilyId::PerturbedQuadratic: return 2;
    case FamilyId::Polynomial: return degree;
    }
    return 0;
}

std::vector<std::string> MapFamily::parameter_names() const {
    switch (id) {
    case FamilyId::Quadratic: return {"a"};
    case FamilyId::NormalizedQuadratic: return {"t"};
    case FamilyId::PerturbedQuadratic: return {"a", "eps"};
    case FamilyId::Polynomial: {
        std::vector<std::string> names;
        for (int k = 1; k <= degree; ++k) {
            names.push_back("c" + std::to_string(k));
        }
        return names;
    }
    }
    return {};
}

MapInstance::MapInstance(MapFamily family, std::vector<double> params)
    : family_(family), params_(std::move(params)) {
    if (family_.id == FamilyId::Polynomial) {
        family_.degree = static_cast<int>(params_.size());
    }
    if (static_cast<int>(params_.size()) != family_.parameter_dim() || params_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "wrong parameter count for family " +
                                                    to_string(family_.id));
    }
    for (double p : params_) {
        if (!std::isfinite(p)) {
            throw Error(ErrorCode::InvalidArgument, "non-finite family parameter");
        }
    }
    switch (family_.id) {
    case FamilyId::Quadratic:
        check_raw_a(params_[0]);
        raw_ = true;
        raw_a_ = params_[0];
        half_width_ = beta(raw_a_);
        return;
    case FamilyId::NormalizedQuadratic:
        if (!(params_[0] >= -1.0 && params_[0] <= 1.0)) {
            throw Error(ErrorCode::OutOfDomain, "t must lie in [-1, 1]");
        }
        raw_a_ = a_from_t(params_[0]);
        coeffs_ = {beta(raw_a_)};
        break;
    case FamilyId::PerturbedQuadratic:
        check_raw_a(params_[0]);
        raw_a_ = params_[0];
        coeffs_ = {beta(raw_a_), params_[1]};
        break;
    case FamilyId::Polynomial:
        coeffs_ = params_;
        raw_a_ = std::numeric_limits<double>::quiet_NaN();
        break;
    }
    // Range check: f(I) must stay inside I.
    const int samples = 1025;
    for (int i = 0; i < samples; ++i) {
        const double x = static_cast<double>(i) / (samples - 1);
        const double v = value(x);
        if (std::abs(v) > 1.0 + 1e3 * kEps) {
            throw Error(ErrorCode::OutOfDomain,
                        describe() + " does not map [-1,1] into itself (f(" + format_number(x) +
                            ") = " + format_number(v) + ")");
        }
    }
}

MapInstance MapInstance::quadratic(double a) {
    return MapInstance(MapFamily{FamilyId::Quadratic}, {a});
}

MapInstance MapInstance::normalized_quadratic_t(double t) {
    return MapInstance(MapFamily{FamilyId::NormalizedQuadratic}, {t});
}

MapInstance MapInstance::normalized_quadratic_a(double a) {
    check_raw_a(a);
    MapInstance m = normalized_quadratic_t(t_from_a(a));
    // Keep the exact raw parameter rather than the round trip through t.
    m.raw_a_ = a;
    m.coeffs_ = {beta(a)};
    return m;
}

MapInstance MapInstance::perturbed_quadratic(double a, double eps) {
    return MapInstance(MapFamily{FamilyId::PerturbedQuadratic}, {a, eps});
}

MapInstance MapInstance::polynomial(std::vector<double> coefficients) {
    MapFamily fam{FamilyId::Polynomial, static_cast<int>(coefficients.size())};
    return MapInstance(fam, std::move(coefficients));
}

std::string MapInstance::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(family_.id) << ':';
    const auto names = family_.parameter_names();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        os << (i ? "," : "") << names[i] << '=' << params_[i];
    }
    return os.str();
}

Jet MapInstance::jet(double x) const {
    if (!(std::abs(x) <= half_width_ * (1.0 + 10.0 * kEps))) {
        throw Error(ErrorCode::OutOfDomain, "x = " + format_number(x) + " outside the interval");
    }
    if (raw_) {
        return Jet{raw_a_ - x * x, -2.0 * x, -2.0, 0.0};
    }
    // f = -1 + g(u), u = 1 - x^2:
    // f' = -2x g', f'' = 4x^2 g'' - 2 g', f''' = 12x g'' - 8x^3 g'''.
    const double u = 1.0 - x * x;
    double g = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const double k = static_cast<double>(i + 1);
        const double c = coeffs_[i];
        g += c * std::pow(u, k);
        g1 += k * c * std::pow(u, k - 1);
        if (k >= 2) {
            g2 += k * (k - 1) * c * std::pow(u, k - 2);
        }
        if (k >= 3) {
            g3 += k * (k - 1) * (k - 2) * c * std::pow(u, k - 3);
        }
    }
    const double x2 = x * x;
    return Jet{-1.0 + g, -2.0 * x * g1, 4.0 * x2 * g2 - 2.0 * g1,
               12.0 * x * g2 - 8.0 * x2 * x * g3};
}

double MapInstance::positive_preimage(double y) const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (raw_) {
        const double s = raw_a_ - y;
        if (s < 0.0 || s > half_width_ * half_width_ * (1.0 + 10.0 * kEps)) {
            return nan;
        }
        return std::min(std::sqrt(s), half_width_);
    }
    // Solve g(u) = y + 1 for u in [0, 1], g increasing there.
    const double target = y + 1.0;
    double u = nan;
    if (coeffs_.size() == 1) {
        u = target / coeffs_[0];
    } else if (coeffs_.size() == 2 && coeffs_[1] != 0.0) {
        const double b = coeffs_[0];
        const double c = coeffs_[1];
        const double disc = b * b + 4.0 * c * target;
        if (disc < 0.0) {
            return nan;
        }
        // Stable root of c u^2 + b u - target = 0 that is continuous in c -> 0.
        u = 2.0 * target / (b + std::sqrt(disc));
    } else if (coeffs_.size() == 2) {
        u = target / coeffs_[0];
    } else {
        auto g = [&](double uu) { return value(std::sqrt(std::max(0.0, 1.0 - uu))) - y; };
        const double g0 = g(0.0);
        const double g1v = g(1.0);
        if (g0 > 0.0 || g1v < 0.0) {
            return nan;
        }
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 200 && hi - lo > 4 * kEps; ++i) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) < 0.0 ? lo : hi) = mid;
        }
        u = 0.5 * (lo + hi);
    }
    if (!(u >= -10.0 * kEps && u <= 1.0 + 10.0 * kEps)) {
        return nan;
    }
    u = std::clamp(u, 0.0, 1.0);
    return std::sqrt(1.0 - u);
}

Jet evaluate_jet(const MapInstance& m, double x) { return m.jet(x); }

double schwarzian(const MapInstance& m, double x) {
    if (std::abs(x) < 1e3 * kEps * m.half_width()) {
        throw Error(ErrorCode::AtCriticalPoint, "Schwarzian undefined at the critical point");
    }
    const Jet j = m.jet(x);
    if (j.d1 == 0.0) {
        throw Error(ErrorCode::AtCriticalPoint, "Df vanishes at x = " + format_number(x));
    }
    const double r = j.d2 / j.d1;
    return j.d3 / j.d1 - 1.5 * r * r;
}

SUnimodalReport verify_s_unimodal(const MapInstance& m, int grid_size, double hole) {
    if (grid_size < 100) {
        throw Error(ErrorCode::InvalidArgument, "grid_size must be >= 100");
    }
    SUnimodalReport rep;
    const double B = m.half_width();
    const double tol = 10.0 * kEps * std::max(1.0, B);
    auto fail = [&](bool& flag, const char* what, double x) {
        if (flag) {
            flag = false;
            if (rep.first_failure.empty()) {
                rep.first_failure = what;
                rep.first_failure_x = x;
            }
        }
    };

    const Jet left = m.jet(-B);
    const Jet right = m.jet(B);
    if (std::abs(left.value + B) > tol || std::abs(right.value + B) > tol) {
        fail(rep.boundary, "boundary", B);
    }
    if (left.d1 < 1.0 || (left.d1 == 1.0 && !(left.d2 < 0.0))) {
        fail(rep.boundary, "boundary", -B);
    }
    const Jet center = m.jet(0.0);
    if (center.d1 != 0.0 || center.d2 == 0.0) {
        fail(rep.nondegenerate_critical_point, "nondegenerate_critical_point", 0.0);
    }
    // The critical point must be a maximum: f increasing left of 0.
    if (!(center.d2 < 0.0)) {
        fail(rep.unimodal, "unimodality", 0.0);
    }
    for (int i = 0; i < grid_size; ++i) {
        const double x = -B + 2.0 * B * i / (grid_size - 1);
        const Jet j = m.jet(x);
        if (std::abs(m.value(-x) - j.value) > tol) {
            fail(rep.even, "evenness", x);
        }
        if (std::abs(j.value) > B + tol) {
            fail(rep.maps_into_interval, "maps_into_interval", x);
        }
        if (x != 0.0) {
            const bool ok = x < 0 ? j.d1 > 0.0 : j.d1 < 0.0;
            if (!ok) {
                fail(rep.unimodal, "unimodality", x);
            }
        }
        if (std::abs(x) >= hole * B && j.d1 != 0.0) {
            const double r = j.d2 / j.d1;
            if (!(j.d3 / j.d1 - 1.5 * r * r < 0.0)) {
                fail(rep.negative_schwarzian, "schwarzian", x);
            }
        }
    }
    return rep;
}

OrbitSegment iterate_critical_orbit(const MapInstance& m, int N) {
    if (N < 1) {
        throw Error(ErrorCode::InvalidArgument, "orbit length N must be >= 1");
    }
    OrbitSegment seg;
    seg.points.reserve(static_cast<std::size_t>(N) + 1);
    seg.log_derivatives.reserve(static_cast<std::size_t>(N));
    const double bound = m.half_width() * (1.0 + 10.0 * kEps);
    double x = 0.0;
    seg.points.push_back(x);
    numerics::LogProduct acc;
    for (int k = 1; k <= N; ++k) {
        x = m.value(x);
        if (!(std::abs(x) <= bound)) {
            throw Error(ErrorCode::EscapedDomain,
                        "iterate " + std::to_string(k) + " left the interval: " + format_number(x));
        }
        seg.points.push_back(x);
        // log_derivatives[k-1] = Df^(k-1)(f(0)) uses points[1..k-1].
        seg.log_derivatives.push_back(acc);
        acc.multiply(m.derivative(x));
    }
    return seg;
}

namespace {

// Partial derivative of the family map in parameter i.
double partial(const MapFamily& fam, std::span<const double> p, std::size_t i, double x) {
    const double u = 1.0 - x * x;
    switch (fam.id) {
    case FamilyId::Quadratic: return 1.0;
    case FamilyId::NormalizedQuadratic: return 1.125 * beta_prime(a_from_t(p[0])) * u;
    case FamilyId::PerturbedQuadratic: return i == 0 ? beta_prime(p[0]) * u : u * u;
    case FamilyId::Polynomial: return std::pow(u, static_cast<double>(i + 1));
    }
    return 0.0;
}

void check_direction(const MapFamily& fam, std::span<const double> params,
                     std::span<const double> direction) {
    if (static_cast<int>(params.size()) != fam.parameter_dim() ||
        direction.size() != params.size()) {
        throw Error(ErrorCode::InvalidArgument, "direction/parameter dimension mismatch");
    }
    bool nonzero = false;
    for (double d : direction) {
        nonzero = nonzero || d != 0.0;
    }
    if (!nonzero) {
        throw Error(ErrorCode::InvalidArgument, "direction must be nonzero");
    }
}

} // namespace

double family_velocity(const MapFamily& fam, std::span<const double> params,
                       std::span<const double> direction, double x) {
    check_direction(fam, params, direction);
    const MapInstance m(fam, std::vector<double>(params.begin(), params.end()));
    if (!(std::abs(x) <= m.half_width() * (1.0 + 10.0 * kEps))) {
        throw Error(ErrorCode::OutOfDomain, "x outside the interval");
    }
    double v = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (direction[i] != 0.0) {
            v += direction[i] * partial(fam, params, i, x);
        }
    }
    return v;
}

double family_velocity_fd(const MapFamily& fam, std::span<const double> params,
                          std::span<const double> direction, double x, double h) {
    check_direction(fam, params, direction);
    if (h <= 0.0) {
        h = std::cbrt(kEps);
    }
    std::vector<double> plus(params.begin(), params.end());
    std::vector<double> minus(params.begin(), params.end());
    for (std::size_t i = 0; i < params.size(); ++i) {
        plus[i] += h * direction[i];
        minus[i] -= h * direction[i];
    }
    const MapInstance mp(fam, plus);
    const MapInstance mm(fam, minus);
    return (mp.value(x) - mm.value(x)) / (2.0 * h);
}

} // namespace nestlab::maps
