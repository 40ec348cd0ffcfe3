#include <fastl21/quadrature.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace fastl21;

TEST(GaussLegendre, IntegratesPolynomialsExactly)
{
    const auto& r = gauss_legendre(8);
    // degree 15 is the highest exact degree for 8 points
    for (int p = 0; p <= 15; ++p) {
        wide sum = 0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i) sum += r.weights[i] * powq(r.nodes[i], p);
        const double exact = (p % 2 == 0) ? 2.0 / (p + 1) : 0.0;
        EXPECT_NEAR(static_cast<double>(sum), exact, 1e-30 + 1e-15) << "p=" << p;
    }
}

TEST(GaussLegendre, NodesAscendingAndWeightsPositive)
{
    const auto& r = gauss_legendre(40);
    for (std::size_t i = 1; i < r.nodes.size(); ++i) EXPECT_LT(r.nodes[i - 1], r.nodes[i]);
    wide total = 0;
    for (auto w : r.weights) {
        EXPECT_GT(w, 0);
        total += w;
    }
    EXPECT_LT(fabsq(total - 2), 1e-30);
}

TEST(GaussJacobi, WeightedMomentsMatchBeta)
{
    // int_{-1}^1 (1+x)^b x^0 dx = 2^{b+1}/(b+1)
    const double b = -0.7;
    const auto r = gauss_jacobi(12, 0.0, b);
    wide s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        s0 += r.weights[i];
        s1 += r.weights[i] * (1 + r.nodes[i]);
    }
    EXPECT_NEAR(static_cast<double>(s0), std::pow(2.0, b + 1) / (b + 1), 1e-14);
    EXPECT_NEAR(static_cast<double>(s1), std::pow(2.0, b + 2) / (b + 2), 1e-14);
}

TEST(GaussKronrod, SmoothAndEndpointSingularIntegrands)
{
    auto r = integrate_gk([](double x) { return std::sin(x); }, 0.0, M_PI);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 2.0, 1e-13);

    // x^{-1/2} on [1e-8, 1]
    auto s = integrate_gk([](double x) { return 1.0 / std::sqrt(x); }, 1e-8, 1.0);
    EXPECT_TRUE(s.converged);
    EXPECT_NEAR(s.value, 2.0 * (1.0 - 1e-4), 1e-12);
}

TEST(GaussKronrod, VectorComponentsShareSubdivision)
{
    auto r = integrate_gk<2>([](double x) { return std::array<double, 2>{x, x * x}; }, 0.0, 1.0);
    EXPECT_NEAR(r.value[0], 0.5, 1e-15);
    EXPECT_NEAR(r.value[1], 1.0 / 3.0, 1e-15);
}

TEST(GaussKronrod, ReportsNonConvergence)
{
    auto r = integrate_gk([](double x) { return std::sin(1.0 / x); }, 1e-6, 1.0, 1e-15, 1e-15, 3);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.subdivisions, 3);
}
