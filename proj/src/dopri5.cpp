#include "prisampler/dopri5.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prisampler/errors.hpp"

namespace prisampler {

namespace {

// Dormand-Prince 4(5) tableau.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0,
                 kB4 = 125.0 / 192.0, kB5 = -2187.0 / 6784.0,
                 kB6 = 11.0 / 84.0;
constexpr double kE1 = kB1 - 5179.0 / 57600.0;
constexpr double kE3 = kB3 - 7571.0 / 16695.0;
constexpr double kE4 = kB4 - 393.0 / 640.0;
constexpr double kE5 = kB5 + 92097.0 / 339200.0;
constexpr double kE6 = kB6 - 187.0 / 2100.0;
constexpr double kE7 = -1.0 / 40.0;
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0,
                 kC5 = 8.0 / 9.0;

}  // namespace

Dopri5Result integrate_dopri5(const OdeRhs& f, Eigen::VectorXd y0, double t0,
                              double t1, const Dopri5Options& options,
                              const PostStepHook& post_step) {
  if (options.rtol <= 0.0 || options.atol <= 0.0) {
    throw ConfigError("ODE tolerances must be positive");
  }
  Dopri5Result result;
  result.y = std::move(y0);
  result.t = t0;
  if (t0 == t1) {
    return result;
  }

  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double h = options.initial_step != 0.0
                 ? std::abs(options.initial_step) * direction
                 : 0.01 * span * direction;

  Eigen::VectorXd k1 = f(result.t, result.y);
  bool k1_fresh = true;

  for (long iter = 0; iter < options.max_steps; ++iter) {
    if (result.t == t1 ||
        std::abs(t1 - result.t) < 1e-14 * std::max(1.0, std::abs(t1))) {
      result.t = t1;
      return result;
    }
    if (std::abs(h) > std::abs(t1 - result.t)) {
      h = t1 - result.t;
    }
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(result.t))) {
      throw SolverError("ODE step size underflow at t = " +
                        std::to_string(result.t));
    }

    if (!k1_fresh) {
      k1 = f(result.t, result.y);
      k1_fresh = true;
    }
    const double t = result.t;
    const Eigen::VectorXd& y = result.y;
    const Eigen::VectorXd k2 = f(t + kC2 * h, y + h * (kA21 * k1));
    const Eigen::VectorXd k3 = f(t + kC3 * h, y + h * (kA31 * k1 + kA32 * k2));
    const Eigen::VectorXd k4 =
        f(t + kC4 * h, y + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
    const Eigen::VectorXd k5 = f(
        t + kC5 * h, y + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
    const Eigen::VectorXd k6 =
        f(t + h,
          y + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
    const Eigen::VectorXd y_new =
        y + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
    const Eigen::VectorXd k7 = f(t + h, y_new);

    const Eigen::VectorXd err_vec =
        h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);
    double err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double scale =
          options.atol +
          options.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      const double e = err_vec[i] / scale;
      err += e * e;
    }
    err = std::sqrt(err / static_cast<double>(y.size()));
    if (!std::isfinite(err)) {
      throw SolverError("ODE error estimate diverged at t = " +
                        std::to_string(t));
    }

    const double factor =
        std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
    if (err <= 1.0) {
      const double t_prev = result.t;
      result.t = t + h;
      result.y = y_new;
      ++result.accepted_steps;
      k1 = k7;
      k1_fresh = true;
      if (post_step && post_step(t_prev, result.t, result.y)) {
        k1_fresh = false;
      }
    } else {
      ++result.rejected_steps;
    }
    h *= factor;
  }
  throw SolverError("ODE step budget exhausted at t = " +
                    std::to_string(result.t));
}

}  // namespace prisampler
