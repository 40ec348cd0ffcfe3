#include <fastl21/experiments.hpp>
#include <fastl21/reference.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fastl21;

TEST(Slope, ExactPowerLaw)
{
    const std::vector<double> x{1000, 2000, 4000, 8000};
    std::vector<double> y;
    for (double v : x) y.push_back(3e-7 * std::pow(v, 1.5));
    EXPECT_NEAR(loglog_slope(x, y), 1.5, 1e-12);
    EXPECT_THROW(loglog_slope({1.0}, {2.0}), std::invalid_argument);
}

TEST(Reference, Lookup)
{
    EXPECT_DOUBLE_EQ(*reference_error(0.3, 2 / 0.3, 100), 5.2619e-5);
    EXPECT_DOUBLE_EQ(*reference_order(0.3, 2 / 0.3, 200), 1.9782);
    EXPECT_DOUBLE_EQ(*reference_error(0.7, 1 / 0.7, 1600), 1.2262e-4);
    EXPECT_FALSE(reference_error(0.4, 5.0, 100));
    EXPECT_FALSE(reference_order(0.5, 4.0, 100));
}

TEST(Convergence, SmallTableMatchesReference)
{
    ConvergenceOptions opt;
    opt.space_n = 24;
    const auto t = convergence_study(0.5, {4.0}, {100, 200}, ConvergenceProblem::linear, opt);
    ASSERT_EQ(t.rows.size(), 2u);
    for (const auto& row : t.rows) {
        EXPECT_NEAR(row.err_l2, *reference_error(0.5, 4.0, row.N), 1e-3 * row.err_l2);
        EXPECT_TRUE(row.soe_cert.pass);
    }
    EXPECT_TRUE(std::isnan(t.rows[0].order_l2));
    EXPECT_NEAR(t.rows[1].order_l2, 1.9844, 2e-3);
    std::ostringstream os;
    t.write_table(os);
    EXPECT_EQ(os.str().rfind("row,N=100,N=200\nr=2/alpha,", 0), 0u);
    EXPECT_NE(os.str().find("order,--,1.98"), std::string::npos);
}

TEST(Convergence, FirstStepVariantsAtLowGrading)
{
    // r alpha = 1: the maximum error sits at the first step
    ConvergenceOptions opt;
    const auto l1 = convergence_study(0.5, {2.0}, {100}, ConvergenceProblem::linear, opt);
    EXPECT_NEAR(l1.rows[0].err_l2, 2.1627e-3, 1e-3 * 2.1627e-3);
    opt.first_step = FirstStep::l21;
    const auto l21 = convergence_study(0.5, {2.0}, {100}, ConvergenceProblem::linear, opt);
    EXPECT_LT(l21.rows[0].err_l2, 0.5 * l1.rows[0].err_l2);
}

TEST(Convergence, SemilinearPolynomialOrder)
{
    ConvergenceOptions opt;
    opt.space_n = 4;
    const auto t = convergence_study(0.5, {4.0}, {100, 200}, ConvergenceProblem::semilinear_poly, opt);
    EXPECT_NEAR(t.rows[1].order_l2, 2.0, 0.1);
    EXPECT_NEAR(t.rows[1].order_h1, 2.0, 0.1);
    EXPECT_THROW(parse_convergence_problem("cubic"), std::invalid_argument);
}

TEST(Timing, SmallProfile)
{
    TimingOptions opt;
    opt.repeats = 1;
    opt.eps_list = {1e-4, 1e-8, 1e-12};
    opt.dt_list = {1e-2, 1e-5, 1e-8};
    const auto p = timing_bench(0.5, {200, 400}, opt);
    ASSERT_EQ(p.rows.size(), 2u);
    for (const auto& r : p.rows) {
        EXPECT_GT(r.fast_seconds, 0.0);
        EXPECT_GT(r.standard_seconds, 0.0);
    }
    EXPECT_TRUE(p.nq_monotone_eps());
    EXPECT_TRUE(p.nq_monotone_dt());
    EXPECT_LT(p.nq_vs_eps.front().nq, p.nq_vs_eps.back().nq);
    for (const auto& r : p.nq_vs_eps) EXPECT_TRUE(r.cert.pass);
    std::ostringstream a, b;
    p.write_csv(a, b);
    EXPECT_EQ(a.str().rfind("N,fast_seconds,standard_seconds,nq\n", 0), 0u);
    EXPECT_EQ(b.str().rfind("sweep,eps,dt,nq,max_err,certified\n", 0), 0u);
}

TEST(Longtime, VerdictsOnShortHorizon)
{
    const auto zero = longtime_study(LongtimeSource::zero, 50.0);
    EXPECT_TRUE(zero.bounded);
    EXPECT_EQ(zero.verdict(), "bounded");
    EXPECT_TRUE(zero.psd.pass());
    EXPECT_LT(zero.second_half_max, 0.1 * zero.first_half_max);
    const auto f1 = longtime_study(LongtimeSource::f1, 400.0);
    EXPECT_FALSE(f1.bounded);
    EXPECT_EQ(f1.verdict(), "growing");
    EXPECT_GE(f1.series.back().t, 400.0);
    EXPECT_THROW(parse_longtime_source("f3"), std::invalid_argument);
}

TEST(Energy, SineReactionDecays)
{
    EnergyOptions opt;
    opt.horizon = 5;
    const auto st = energy_study(EnergyProblem::sine, {0.5}, opt);
    ASSERT_EQ(st.runs.size(), 1u);
    const auto& r = st.runs[0];
    EXPECT_TRUE(r.stable);
    EXPECT_LE(r.max_increase, 1e-10);
    ASSERT_TRUE(r.cond_tau.has_value());
    EXPECT_TRUE(r.cond_tau->pass());
    EXPECT_LT(r.series.back().energy, r.series.front().energy);
    EXPECT_FALSE(st.untruncated.has_value());
}

TEST(Energy, AllenCahnComparisonRun)
{
    EnergyOptions opt;
    opt.horizon = 3;
    opt.compare_alpha = 0.8;
    const auto st = energy_study(EnergyProblem::allen_cahn, {0.8}, opt);
    ASSERT_TRUE(st.untruncated.has_value());
    EXPECT_FALSE(st.untruncated->truncated);
    // the noise stays inside |u| <= 1 where both potentials agree
    EXPECT_LE(st.original_energy_gap, 1e-12);
    EXPECT_TRUE(st.runs[0].stable);
}
