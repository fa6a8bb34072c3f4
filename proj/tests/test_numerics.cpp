#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "treefuse/quadrature.hpp"
#include "treefuse/rng.hpp"
#include "treefuse/stats.hpp"

using namespace treefuse;

TEST_CASE("adaptive quadrature on smooth integrands") {
    CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0) ==
          Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(integrate([](double x) { return std::exp(-x); }, 0.0, 30.0) ==
          Catch::Approx(1.0).epsilon(1e-9));
    CHECK(integrate([](double x) { return gauss_pdf(x, 0.0, 1.0); }, -12.0, 12.0) ==
          Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("adaptive quadrature resolves step discontinuities") {
    // Indicator times a density whose scale matches the interval (call
    // sites window integrals to the distribution's support).
    const double v = integrate(
        [](double x) { return x > 0.3 ? gauss_pdf(x, 0.0, 1.0) : 0.0; }, -12.0, 12.0);
    CHECK(v == Catch::Approx(1.0 - normal_cdf(0.3)).margin(1e-8));

    const double w = integrate(
        [](double x) { return x > 0.3001 ? gauss_pdf(x, 0.3, 1e-3) : 0.0; },
        0.3 - 12e-3, 0.3 + 12e-3);
    CHECK(w == Catch::Approx(1.0 - normal_cdf(0.1)).margin(1e-7));
}

TEST_CASE("degenerate integration interval yields zero") {
    CHECK(integrate([](double) { return 1.0; }, 1.0, 1.0) == 0.0);
    CHECK(integrate([](double) { return 1.0; }, 2.0, 1.0) == 0.0);
}

TEST_CASE("splitmix64 streams are reproducible and order-independent") {
    SplitMix64 a(123), b(123);
    for (int i = 0; i < 100; ++i) REQUIRE(a() == b());

    const auto s1 = derive_seed(9, 1, 2, 3);
    const auto s2 = derive_seed(9, 1, 2, 3);
    CHECK(s1 == s2);
    CHECK(derive_seed(9, 1, 2, 3) != derive_seed(9, 1, 3, 2));
    CHECK(derive_seed(9, 0) != derive_seed(10, 0));
}

TEST_CASE("uniform01 and uniform_index stay in range") {
    SplitMix64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(rng);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(uniform_index(rng, 7) < 7);
    }
}

TEST_CASE("normal sampler hits the target moments") {
    SplitMix64 rng(17);
    const std::size_t n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = normal_sample(rng, 3.0, 2.0);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == Catch::Approx(3.0).margin(3.0 * 2.0 / std::sqrt(double(n))));
    CHECK(var == Catch::Approx(4.0).margin(0.15));
}

TEST_CASE("wilson interval brackets the point estimate") {
    const auto ci = wilson_ci(10, 100);
    CHECK(ci.low < 0.1);
    CHECK(ci.high > 0.1);
    CHECK(ci.low > 0.0);
    const auto zero = wilson_ci(0, 50);
    CHECK(zero.low < 1e-12);
    CHECK(zero.high > 0.0);
}

TEST_CASE("chi-square tail against known values") {
    // With 2 dof the tail is exp(-x/2).
    CHECK(chi_square_tail(2.0, 2) == Catch::Approx(std::exp(-1.0)).epsilon(1e-10));
    CHECK(chi_square_tail(5.99146, 2) == Catch::Approx(0.05).margin(1e-5));
    // 1 dof at z^2: tail = 2(1 - Phi(z)).
    CHECK(chi_square_tail(3.84146, 1) == Catch::Approx(0.05).margin(1e-5));
}
