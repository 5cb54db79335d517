#include "nht/thresholds.hpp"

#include "../support/scan.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace nht {
namespace {

const double kStep = 1e-4;

TEST(Closed, TorusConstantsUnconstrained) {
    auto r = closed_thresholds(ThresholdInput::constant(1, 1, 0, 1, 0, 1, 1));
    EXPECT_EQ(r.verdict, "unconstrained");
    EXPECT_TRUE(r.feasible);
    EXPECT_FALSE(r.s0.has_value());
}

TEST(Closed, LargeSubprincipalInfeasible) {
    auto r = closed_thresholds(ThresholdInput::constant(1, 1, 0, 1, 1, 2, 1));
    EXPECT_EQ(r.verdict, "infeasible");
    EXPECT_FALSE(r.feasible);
}

TEST(Closed, PositiveWeightBoundsSFromAbove) {
    const double nu = std::sqrt(2.0), g = 0.1;
    auto r = closed_thresholds(ThresholdInput::constant(nu, nu, g, 1, 0, 2, 1));
    // 2 nu - (2s + 1) g > 0 and nu - (2s - 1) g > 0
    const double hi = std::min((2 * nu / g - 1) / 2, (nu / g + 1) / 2);
    EXPECT_DOUBLE_EQ(r.s_range.hi, hi);
    EXPECT_FALSE(r.s0.has_value());
    auto neg = closed_thresholds(ThresholdInput::constant(nu, nu, -g, 1, 0, 2, 1));
    ASSERT_TRUE(neg.s0.has_value());
    EXPECT_DOUBLE_EQ(*neg.s0, std::max((-2 * nu / g - 1) / 2, (-nu / g + 1) / 2));
}

TEST(Closed, StrictAtEquality) {
    ThresholdInput in = ThresholdInput::constant(1, 1, 0, 1, 0.5, 2, 1);  // nu_s - 2 p1 = 0
    EXPECT_FALSE(closed_thresholds(in).feasible);
}

TEST(Closed, GRangeUsesWorstCase) {
    ThresholdInput in = ThresholdInput::constant(1, 1, 0, 1, 0, 2, 1);
    in.g_lo = -0.1;
    in.g_hi = 0.2;
    auto r = closed_thresholds(in);
    for (double g : {-0.1, 0.0, 0.05, 0.2}) {
        auto one = closed_thresholds(ThresholdInput::constant(1, 1, g, 1, 0, 2, 1));
        EXPECT_GE(r.s_range.lo, one.s_range.lo);
        EXPECT_LE(r.s_range.hi, one.s_range.hi);
    }
}

TEST(BThresholds, ScatteringFeasibleAndUnconstrained) {
    ThresholdInput in = ThresholdInput::constant(std::sqrt(2.0), std::sqrt(2.0), 0, 1, 0, 2, 1);
    in.l = 0.0;
    auto b = b_thresholds(in);
    EXPECT_EQ(b.with_tau.verdict, "unconstrained");
    EXPECT_EQ(b.stationary.verdict, "unconstrained");
    ASSERT_TRUE(b.l_sup_with_adjoint);
    EXPECT_DOUBLE_EQ(*b.l_sup_with_adjoint, std::sqrt(2.0) / 2);
}

TEST(BThresholds, EqualityIsInfeasible) {
    ThresholdInput in = ThresholdInput::constant(2, 2, 0, 1, 0, 2, 10);
    in.l = 1.0;  // nu_s - 2 l f = 0
    auto b = b_thresholds(in);
    EXPECT_FALSE(b.with_tau.feasible);
    in.l = 0.999;
    EXPECT_TRUE(b_thresholds(in).with_tau.feasible);
}

TEST(BThresholds, LScanMatchesDecayFormAtZeroG) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.2, 3.0), pp(-0.5, 0.5);
    for (int i = 0; i < 20; ++i) {
        ThresholdInput in = ThresholdInput::constant(u(rng), u(rng), 0, u(rng), pp(rng), 2, u(rng));
        auto feasible = [&](double l) {
            ThresholdInput a = in, b = in;
            a.l = b.l = l;
            std::swap(b.nu_u, b.nu_s);
            return b_thresholds(a).with_tau.feasible && b_thresholds(b).with_tau.feasible;
        };
        auto t = oracle::scan_transitions(feasible, -10, 10, 1e-2, 1e-6);
        ASSERT_EQ(t.size(), 1u);
        const double f = in.f_lo;
        // both adjoint pairs at g = 0: l < min(nu/(2f), mu) - p1/f
        const double closed = std::min(in.nu() / (2 * f), in.mu) - in.p1_lo / f;
        EXPECT_NEAR(t[0], closed, 1e-6);
        EXPECT_NEAR(*b_thresholds(in).l_sup_with_adjoint, closed, 1e-12);
    }
}

TEST(Decay, ScatteringValue) {
    for (double mu : {0.5, 1.0, 2.0}) {
        auto d = decay_threshold(ThresholdInput::constant(std::sqrt(2.0), std::sqrt(2.0), 0, 1, 0, 2, mu));
        EXPECT_EQ(d.theorem_form, std::min(mu, std::sqrt(0.5)));
        EXPECT_FALSE(d.disagree);
    }
}

TEST(Decay, FormsDisagreeForNonUnitF) {
    auto d = decay_threshold(ThresholdInput::constant(2, 2, 0, 2, 0, 2, 10));
    EXPECT_DOUBLE_EQ(d.theorem_form, 1.0);
    EXPECT_DOUBLE_EQ(d.remark_form, 0.5);
    EXPECT_DOUBLE_EQ(d.kerr_text_form, 0.5);
    EXPECT_TRUE(d.disagree);
}

TEST(Decay, SubprincipalAtBoundGivesZero) {
    auto d = decay_threshold(ThresholdInput::constant(2, 2, 0, 1, 1, 2, 10));
    EXPECT_EQ(d.theorem_form, 0.0);
}

TEST(Radial, ControlAndSaddleBounds) {
    auto r = radial_threshold(1, 1, 0, 2, 0, RadialKind::Source, 1);
    EXPECT_DOUBLE_EQ(r.bound, 0.5);
    EXPECT_TRUE(r.lower);
    auto s = radial_threshold(1, 1, 0, 2, 1, RadialKind::Saddle, 1, 2.0);
    EXPECT_DOUBLE_EQ(s.bound, 1.5);
    EXPECT_TRUE(*s.control_at_s);
    EXPECT_FALSE(*s.control_at_s_minus_2);
    EXPECT_THROW(radial_threshold(0, 1, 0, 2, 0, RadialKind::Sink, -1), std::invalid_argument);
}

TEST(KerrSaddle, SchwarzschildValues) {
    auto r = kerr_saddle_condition({1, 0, 0}, 0, 0, 1.0);
    ASSERT_EQ(r.sides.size(), 2u);
    for (const auto& s : r.sides) EXPECT_DOUBLE_EQ(s.bound, 2.5);
    auto l1 = kerr_saddle_condition({1, 0, 0}, 1, 0, 1.0);
    EXPECT_DOUBLE_EQ(l1.sides[1].bound, 6.5);
    EXPECT_DOUBLE_EQ(l1.sides[1].r, 2.0);
    EXPECT_THROW(kerr_saddle_condition({1, 1.2, 0}, 0, 0, 1.0), ModelError);
}

TEST(KerrSaddle, IncreasingInL) {
    double prev = -kInf;
    for (double l = 0.1; l < 2; l += 0.1) {
        double w = kerr_saddle_condition({1, 0.5, 0.01}, l, 0.1, 0.7).worst;
        EXPECT_GT(w, prev);
        prev = w;
    }
}

TEST(ClosedFredholm, Slacks) {
    auto c = closed_fredholm_conditions(ThresholdInput::constant(std::sqrt(2.0), std::sqrt(2.0), 0.1, 1, 0, 2, 1), 5);
    EXPECT_NEAR(c.slack1, std::sqrt(2.0) / 2 - 0.45, 1e-15);
    EXPECT_NEAR(c.slack2, std::sqrt(2.0) - 0.55, 1e-15);
    EXPECT_TRUE(c.holds);
    auto flip = closed_fredholm_conditions(ThresholdInput::constant(std::sqrt(2.0), std::sqrt(2.0), 0.1, 1, 0, 2, 1), 8);
    EXPECT_LT(flip.slack1, 0);
    EXPECT_FALSE(flip.holds);
    auto z = closed_fredholm_conditions(ThresholdInput::constant(0.3, 0.3, 0, 1, 0, 2, 1), 1e6);
    EXPECT_TRUE(z.holds);
}

TEST(Validation, RejectsBadInputs) {
    EXPECT_THROW(closed_thresholds(ThresholdInput::constant(0, 1, 0, 1, 0, 2, 1)), std::invalid_argument);
    EXPECT_THROW(b_thresholds(ThresholdInput::constant(1, 1, 0, 0, 0, 2, 1)), std::invalid_argument);
    EXPECT_THROW(decay_threshold(ThresholdInput::constant(1, 1, 0, 1, 0, 2, -1)), std::invalid_argument);
}

// closed-form bounds against a scan of the defining inequality written out here
TEST(ScanOracle, ClosedAndFredholm) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> nu(0.1, 3), gg(0.05, 0.5), pp(-1, 1);
    std::uniform_int_distribution<int> mm(1, 3);
    for (int i = 0; i < 25; ++i) {
        const double nu_u = nu(rng), nu_s = nu(rng), p1 = pp(rng);
        const double g = (rng() % 2 ? 1 : -1) * gg(rng);
        const int m = mm(rng);
        auto in = ThresholdInput::constant(nu_u, nu_s, g, 1, p1, m, 1);
        auto pred = [&](double s) {
            return 2 * nu_u - 2 * p1 - (2 * s - m + 3) * g > 0 &&
                   nu_s - 2 * p1 - (2 * s - m + 1) * g > 0;
        };
        auto t = oracle::scan_transitions(pred, -200, 200);
        auto r = closed_thresholds(in);
        ASSERT_EQ(t.size(), 1u);
        const double edge = g > 0 ? r.s_range.hi : r.s_range.lo;
        EXPECT_LE(std::fabs(t[0] - edge), kStep + 1e-9);

        const double nmin = std::min(nu_u, nu_s);
        auto fr = [&](double s) {
            return p1 + (s - (m - 1) / 2.0) * g < nmin / 2 && p1 + (s - (m - 3) / 2.0) * g < nmin;
        };
        auto tf = oracle::scan_transitions(fr, -200, 200);
        auto c = closed_fredholm_conditions(in, 0);
        ASSERT_EQ(tf.size(), 1u);
        EXPECT_LE(std::fabs(tf[0] - (g > 0 ? c.s_range.hi : c.s_range.lo)), kStep + 1e-9);
    }
}

}  // namespace
}  // namespace nht
