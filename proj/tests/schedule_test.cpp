#include "prisampler/schedule.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

TEST(VpDiscrete, SignalCoeffBoundaryValues) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  EXPECT_DOUBLE_EQ(s.signal_coeff(0.0), 1.0);
  EXPECT_LT(s.signal_coeff(1000.0), 1e-4);
}

TEST(VpDiscrete, SignalCoeffStrictlyDecreasing) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  double prev = s.signal_coeff(0.0);
  for (int t = 1; t <= 1000; ++t) {
    const double cur = s.signal_coeff(t);
    ASSERT_LT(cur, prev) << "t=" << t;
    ASSERT_GE(cur, 0.0);
    prev = cur;
  }
}

TEST(VpDiscrete, RejectsOutOfRangeAndFractionalSteps) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(100);
  EXPECT_THROW(s.signal_coeff(-1.0), InputError);
  EXPECT_THROW(s.signal_coeff(101.0), InputError);
  EXPECT_THROW(s.signal_coeff(3.5), InputError);
}

TEST(VpDiscrete, PerStepBetasMatchConventionalRange) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(1000);
  EXPECT_NEAR(s.beta_step(1), 1e-4, 5e-5);
  EXPECT_NEAR(s.beta_step(1000), 0.02, 2e-3);
  for (int i = 1; i <= 1000; ++i) {
    ASSERT_GT(s.beta_step(i), 0.0);
    ASSERT_LT(s.beta_step(i), 1.0);
  }
  EXPECT_THROW(s.beta_step(0), InputError);
  EXPECT_THROW(s.beta_step(1001), InputError);
}

TEST(VpDiscrete, CumulativeProductOfStepAlphasMatchesSignalCoeff) {
  const NoiseSchedule s = NoiseSchedule::vp_discrete(500);
  double prod = 1.0;
  for (int i = 1; i <= 500; ++i) {
    prod *= s.alpha_step(i);
    ASSERT_NEAR(prod, s.signal_coeff(i), 1e-12 + 1e-9 * prod);
  }
}

TEST(VpSchedules, DiscreteMatchesContinuousOnTheGrid) {
  const int T = 1000;
  const NoiseSchedule d = NoiseSchedule::vp_discrete(T);
  const NoiseSchedule c = NoiseSchedule::vp_continuous();
  for (int i = 0; i <= T; i += 25) {
    const double ad = d.signal_coeff(i);
    const double ac = c.signal_coeff(static_cast<double>(i) / T);
    ASSERT_NEAR(ad, ac, 1e-3);
    ASSERT_NEAR(ad, ac, 1e-12);
    ASSERT_NEAR(std::sqrt(1.0 - ad), std::sqrt(1.0 - ac), 1e-3);
  }
}

TEST(VeDiscrete, NoiseLevelsStartAtZeroAndGrowToSigmaMax) {
  const NoiseSchedule s = NoiseSchedule::ve_discrete(1000, 0.01, 10.0);
  EXPECT_DOUBLE_EQ(s.sigma(0.0), 0.0);
  EXPECT_DOUBLE_EQ(s.sigma(1.0), 0.01);
  EXPECT_DOUBLE_EQ(s.sigma(1000.0), 10.0);
  double prev = 0.0;
  for (int t = 1; t <= 1000; ++t) {
    const double cur = s.sigma(t);
    ASSERT_GT(cur, prev) << "t=" << t;
    prev = cur;
  }
}

TEST(VeContinuous, SigmaIsGeometricInTime) {
  const NoiseSchedule s = NoiseSchedule::ve_continuous(0.01, 10.0);
  EXPECT_DOUBLE_EQ(s.sigma(0.0), 0.01);
  EXPECT_DOUBLE_EQ(s.sigma(1.0), 10.0);
  EXPECT_NEAR(s.sigma(0.5), std::sqrt(0.01 * 10.0), 1e-12);
}

TEST(SdeCoefficients, VpDriftAndDiffusionMatchTheRate) {
  const NoiseSchedule s = NoiseSchedule::vp_continuous(0.1, 20.0);
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    const double beta = 0.1 + (20.0 - 0.1) * t;
    EXPECT_NEAR(s.beta_rate(t), beta, 1e-12);
    EXPECT_NEAR(s.drift_coeff(t), -0.5 * beta, 1e-12);
    EXPECT_NEAR(s.diffusion_coeff(t) * s.diffusion_coeff(t), beta, 1e-12);
  }
}

TEST(SdeCoefficients, VeDiffusionSquaredIsSigmaSquaredDerivative) {
  const NoiseSchedule s = NoiseSchedule::ve_continuous(0.01, 10.0);
  const double h = 1e-6;
  for (double t : {0.1, 0.5, 0.9}) {
    const double up = s.sigma(t + h);
    const double down = s.sigma(t - h);
    const double dsigma2_dt = (up * up - down * down) / (2.0 * h);
    const double g = s.diffusion_coeff(t);
    EXPECT_NEAR(g * g, dsigma2_dt, 1e-5 * dsigma2_dt);
  }
  EXPECT_DOUBLE_EQ(s.drift_coeff(0.5), 0.0);
}

TEST(NoiseSchedule, ValidationRejectsBadConstants) {
  EXPECT_THROW(NoiseSchedule::vp_discrete(0), ConfigError);
  EXPECT_THROW(NoiseSchedule::vp_discrete(100, 0.0, 20.0), ConfigError);
  EXPECT_THROW(NoiseSchedule::vp_discrete(100, 5.0, 5.0), ConfigError);
  EXPECT_THROW(NoiseSchedule::ve_discrete(100, 0.0, 10.0), ConfigError);
  EXPECT_THROW(NoiseSchedule::ve_continuous(1.0, 0.5), ConfigError);
}

TEST(NoiseSchedule, VeSigmaUndefinedForVpAndViceVersa) {
  const NoiseSchedule vp = NoiseSchedule::vp_discrete(10);
  const NoiseSchedule ve = NoiseSchedule::ve_discrete(10);
  EXPECT_THROW(vp.sigma(1.0), ConfigError);
  EXPECT_THROW(ve.beta_step(1), ConfigError);
  EXPECT_DOUBLE_EQ(ve.signal_coeff(5.0), 1.0);
}

TEST(NoiseSchedule, MarginalStdCoversBothFamilies) {
  const NoiseSchedule vp = NoiseSchedule::vp_discrete(1000);
  const NoiseSchedule ve = NoiseSchedule::ve_discrete(1000);
  EXPECT_DOUBLE_EQ(vp.marginal_std(0.0), 0.0);
  EXPECT_NEAR(vp.marginal_std(1000.0), 1.0, 1e-4);
  EXPECT_DOUBLE_EQ(ve.marginal_std(0.0), 0.0);
  EXPECT_DOUBLE_EQ(ve.marginal_std(1000.0), 10.0);
}

}  // namespace
}  // namespace prisampler
