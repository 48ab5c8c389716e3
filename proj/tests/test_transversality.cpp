#include <doctest.h>

#include <cmath>
#include <random>

#include "nestlab/transversality.hpp"

using namespace nestlab;
using namespace nestlab::transversality;

namespace {

const auto raw_ulam = maps::MapInstance::quadratic(2.0);

} // namespace

TEST_CASE("summability") {
    const auto s = summability_check(raw_ulam, 30);
    CHECK(s.partial_sum == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(std::abs(s.partial_sum - 1.0 / 3.0) <= std::pow(4.0, -30));
    CHECK(s.geometric_tail);
    CHECK(s.decay_ratio == doctest::Approx(0.25));
    const auto s10 = summability_check(raw_ulam, 10);
    const auto s20 = summability_check(raw_ulam, 20);
    CHECK(std::abs(s20.partial_sum - s10.partial_sum) <= std::pow(4.0, -10) * 4.0 / 3.0);
    CHECK(s20.tail_bound <= s10.tail_bound);
    CHECK(std::abs(1.0 / 3.0 - s10.partial_sum) <= s10.tail_bound * (1 + 1e-9));
    try {
        (void)summability_check(maps::MapInstance::normalized_quadratic_a(0.0), 20);
        FAIL("expected ZeroDerivative");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroDerivative);
    }
    CHECK_THROWS_AS(summability_check(raw_ulam, 9), Error);
}

TEST_CASE("nu functional") {
    const auto one = nu_functional(raw_ulam, [](double) { return 1.0; }, 60);
    CHECK(one.value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(one.converged);
    CHECK(one.transverse);
    const auto zero = nu_functional(raw_ulam, [](double) { return 0.0; }, 60);
    CHECK(zero.value == 0.0);
    CHECK_FALSE(zero.transverse);

    const auto m = maps::MapInstance::normalized_quadratic_a(1.9);
    SUBCASE("termwise reconstruction") {
        auto v = [](double x) { return 1.0 - x * x + 0.3 * x * x * x * x; };
        const auto r = nu_functional(m, v, 80);
        double x = m.value(0.0);
        double D = 1.0;
        CHECK(r.partial_sums[0] == doctest::Approx(v(0.0)));
        for (int j = 1; j <= 80; ++j) {
            D *= m.derivative(x);
            const double term = v(x) / D;
            const double hi = r.partial_sums[static_cast<std::size_t>(j)];
            const double diff = hi - r.partial_sums[static_cast<std::size_t>(j - 1)];
            CHECK(std::abs(diff - term) <= 1e-9 * std::abs(term) + 4e-16 * std::abs(hi));
            x = m.value(x);
        }
    }
    SUBCASE("linearity") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            PolynomialVectorField v1{1.0, {U(rng), U(rng), U(rng)}};
            PolynomialVectorField v2{1.0, {U(rng), U(rng)}};
            const double alpha = 3 * U(rng);
            const auto a = nu_functional(m, v1, 100);
            const auto b = nu_functional(m, v2, 100);
            const auto c = nu_functional(m, [&](double x) { return alpha * v1(x) + v2(x); }, 100);
            const double tol = std::abs(alpha) * a.tail_bound + b.tail_bound + c.tail_bound + 1e-12;
            CHECK(std::abs(c.value - (alpha * a.value + b.value)) <= tol);
        }
    }
}

TEST_CASE("Tsujii sum along parameter lines") {
    const maps::MapFamily quad{maps::FamilyId::Quadratic, 0};
    const auto up = tsujii_sum(quad, {2.0}, {1.0}, 60);
    CHECK(up.value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(up.transverse);
    const auto down = tsujii_sum(quad, {2.0}, {-1.0}, 60);
    CHECK(down.value == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(down.transverse);
    const maps::MapFamily pq{maps::FamilyId::PerturbedQuadratic, 0};
    const auto p = tsujii_sum(pq, {2.0, 0.0}, {1.0, 0.0}, 60);
    // Normalized coordinates: velocity (1 - x^2)/3 at a = 2.
    CHECK(p.transverse);
    CHECK(p.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(tsujii_sum(quad, {2.0}, {0.0}, 60), Error);
}

TEST_CASE("transversal polynomial field") {
    const auto r = construct_transversal_field(raw_ulam, 60);
    CHECK(r.field(r.field.half_width) == doctest::Approx(0.0).scale(1.0));
    CHECK(r.field(-r.field.half_width) == doctest::Approx(0.0).scale(1.0));
    CHECK(r.field(0.3) == doctest::Approx(r.field(-0.3)));
    CHECK(r.field(0.0) > 1.0);
    CHECK(r.check.value > r.check.tail_bound);
    CHECK(r.check.value >= 0.9 - 1e-12);
    CHECK(r.certified_lower > 0.0);
    CHECK_THROWS_AS(construct_transversal_field(raw_ulam, 60, 0), Error);

    const auto m = maps::MapInstance::normalized_quadratic_a(1.9);
    const auto f = construct_transversal_field(m, 200);
    CHECK(f.check.value > f.check.tail_bound);
    CHECK(f.check.value >= f.certified_lower);
}
