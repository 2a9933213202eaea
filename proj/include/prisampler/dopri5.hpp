#ifndef PRISAMPLER_DOPRI5_HPP
#define PRISAMPLER_DOPRI5_HPP

#include <Eigen/Dense>
#include <functional>

namespace prisampler {

struct Dopri5Options {
  double rtol = 1e-5;
  double atol = 1e-5;
  double initial_step = 0.0;  // 0 picks a fraction of the interval
  long max_steps = 200000;
};

struct Dopri5Result {
  Eigen::VectorXd y;
  double t = 0.0;
  long accepted_steps = 0;
  long rejected_steps = 0;
};

using OdeRhs =
    std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& y)>;

// Called after every accepted step; may modify y in place (return true if it
// did, so the integrator refreshes its cached derivative).
using PostStepHook =
    std::function<bool(double t_prev, double t_new, Eigen::VectorXd& y)>;

// Adaptive Dormand-Prince 4(5) from t0 to t1 (either direction). Throws
// SolverError on step-size underflow or step-budget exhaustion, carrying the
// failure time in the message.
Dopri5Result integrate_dopri5(const OdeRhs& f, Eigen::VectorXd y0, double t0,
                              double t1, const Dopri5Options& options = {},
                              const PostStepHook& post_step = nullptr);

}  // namespace prisampler

#endif  // PRISAMPLER_DOPRI5_HPP
