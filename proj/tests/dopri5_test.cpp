#include "prisampler/dopri5.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

TEST(Dopri5, ZeroRhsLeavesStateUntouched) {
  const OdeRhs zero = [](double, const Eigen::VectorXd& y) {
    return Eigen::VectorXd::Zero(y.size()).eval();
  };
  Eigen::VectorXd y0(3);
  y0 << 1.0, -2.0, 0.5;
  const Dopri5Result r = integrate_dopri5(zero, y0, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(r.t, 2.0);
  EXPECT_NEAR((r.y - y0).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Dopri5, ExponentialDecayMatchesClosedForm) {
  const OdeRhs decay = [](double, const Eigen::VectorXd& y) {
    return (-y).eval();
  };
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  const Dopri5Result r = integrate_dopri5(decay, y0, 0.0, 2.0);
  EXPECT_NEAR(r.y[0], std::exp(-2.0), 1e-5);
  EXPECT_GT(r.accepted_steps, 0);
}

TEST(Dopri5, IntegratesBackwardInTime) {
  const OdeRhs growth = [](double, const Eigen::VectorXd& y) {
    return y.eval();
  };
  Eigen::VectorXd y0(1);
  y0 << std::exp(1.0);
  const Dopri5Result r = integrate_dopri5(growth, y0, 1.0, 0.0);
  EXPECT_NEAR(r.y[0], 1.0, 1e-5);
}

TEST(Dopri5, HarmonicOscillatorStaysOnCircle) {
  const OdeRhs osc = [](double, const Eigen::VectorXd& y) {
    Eigen::VectorXd dy(2);
    dy << y[1], -y[0];
    return dy;
  };
  Eigen::VectorXd y0(2);
  y0 << 1.0, 0.0;
  const double t1 = 2.0 * M_PI;
  const Dopri5Result r = integrate_dopri5(osc, y0, 0.0, t1);
  EXPECT_NEAR(r.y[0], 1.0, 1e-4);
  EXPECT_NEAR(r.y[1], 0.0, 1e-4);
}

TEST(Dopri5, TighterTolerancesReduceError) {
  const OdeRhs decay = [](double t, const Eigen::VectorXd& y) {
    return (-std::sin(t) * y).eval();
  };
  Eigen::VectorXd y0(1);
  y0 << 2.0;
  Dopri5Options loose;
  loose.rtol = loose.atol = 1e-4;
  Dopri5Options tight;
  tight.rtol = tight.atol = 1e-9;
  const double exact = 2.0 * std::exp(std::cos(3.0) - 1.0);
  const double err_loose =
      std::abs(integrate_dopri5(decay, y0, 0.0, 3.0, loose).y[0] - exact);
  const double err_tight =
      std::abs(integrate_dopri5(decay, y0, 0.0, 3.0, tight).y[0] - exact);
  EXPECT_LT(err_tight, err_loose);
  EXPECT_LT(err_tight, 1e-8);
}

TEST(Dopri5, PostStepHookCanModifyState) {
  const OdeRhs zero = [](double, const Eigen::VectorXd& y) {
    return Eigen::VectorXd::Zero(y.size()).eval();
  };
  Eigen::VectorXd y0(1);
  y0 << 0.0;
  bool fired = false;
  const PostStepHook hook = [&](double, double t_new, Eigen::VectorXd& y) {
    if (!fired && t_new >= 0.5) {
      y[0] = 7.0;
      fired = true;
      return true;
    }
    return false;
  };
  const Dopri5Result r = integrate_dopri5(zero, y0, 0.0, 1.0, {}, hook);
  EXPECT_TRUE(fired);
  EXPECT_DOUBLE_EQ(r.y[0], 7.0);
}

TEST(Dopri5, DivergentProblemRaisesSolverError) {
  const OdeRhs bad = [](double, const Eigen::VectorXd& y) {
    return (y.array() * std::nan("")).matrix().eval();
  };
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  EXPECT_THROW(integrate_dopri5(bad, y0, 0.0, 1.0), SolverError);
}

TEST(Dopri5, StepBudgetExhaustionRaisesSolverError) {
  const OdeRhs stiff = [](double, const Eigen::VectorXd& y) {
    return (-1e8 * y).eval();
  };
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  Dopri5Options options;
  options.max_steps = 5;
  EXPECT_THROW(integrate_dopri5(stiff, y0, 0.0, 10.0, options), SolverError);
}

TEST(Dopri5, RejectsNonPositiveTolerances) {
  const OdeRhs zero = [](double, const Eigen::VectorXd& y) {
    return Eigen::VectorXd::Zero(y.size()).eval();
  };
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  Dopri5Options options;
  options.rtol = 0.0;
  EXPECT_THROW(integrate_dopri5(zero, y0, 0.0, 1.0, options), ConfigError);
}

}  // namespace
}  // namespace prisampler
