#include "prisampler/schedule.hpp"

#include <cmath>
#include <string>

#include "prisampler/errors.hpp"

namespace prisampler {

NoiseSchedule NoiseSchedule::vp_discrete(int steps, double beta_min,
                                         double beta_max) {
  NoiseSchedule s;
  s.kind = ScheduleKind::kVpDiscrete;
  s.steps = steps;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.validate();
  return s;
}

NoiseSchedule NoiseSchedule::ve_discrete(int steps, double sigma_min,
                                         double sigma_max) {
  NoiseSchedule s;
  s.kind = ScheduleKind::kVeDiscrete;
  s.steps = steps;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.validate();
  return s;
}

NoiseSchedule NoiseSchedule::vp_continuous(double beta_min, double beta_max) {
  NoiseSchedule s;
  s.kind = ScheduleKind::kVpContinuous;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.validate();
  return s;
}

NoiseSchedule NoiseSchedule::ve_continuous(double sigma_min, double sigma_max) {
  NoiseSchedule s;
  s.kind = ScheduleKind::kVeContinuous;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (is_discrete() && steps < 1) {
    throw ConfigError("schedule needs at least one step");
  }
  if (is_vp()) {
    if (beta_min <= 0.0 || beta_max <= beta_min) {
      throw ConfigError("VP schedule requires 0 < beta_min < beta_max");
    }
  } else {
    if (sigma_min <= 0.0 || sigma_max <= sigma_min) {
      throw ConfigError("VE schedule requires 0 < sigma_min < sigma_max");
    }
  }
}

void NoiseSchedule::check_time(double t) const {
  if (t < 0.0 || t > horizon()) {
    throw InputError("schedule time " + std::to_string(t) +
                     " outside [0, " + std::to_string(horizon()) + "]");
  }
  if (is_discrete() && t != std::floor(t)) {
    throw InputError("discrete schedule needs an integer step, got " +
                     std::to_string(t));
  }
}

double NoiseSchedule::beta_integral(double t) const {
  return beta_min * t + 0.5 * (beta_max - beta_min) * t * t;
}

double NoiseSchedule::signal_coeff(double t) const {
  check_time(t);
  if (!is_vp()) {
    return 1.0;
  }
  const double u = is_discrete() ? t / static_cast<double>(steps) : t;
  return std::exp(-beta_integral(u));
}

double NoiseSchedule::sigma(double t) const {
  check_time(t);
  if (is_vp()) {
    throw ConfigError("sigma is defined for VE schedules only");
  }
  if (kind == ScheduleKind::kVeDiscrete) {
    const int i = static_cast<int>(t);
    if (i == 0) {
      return 0.0;
    }
    if (steps == 1) {
      return sigma_max;
    }
    const double exponent =
        static_cast<double>(i - 1) / static_cast<double>(steps - 1);
    return sigma_min * std::pow(sigma_max / sigma_min, exponent);
  }
  return sigma_min * std::pow(sigma_max / sigma_min, t);
}

double NoiseSchedule::marginal_std(double t) const {
  if (is_vp()) {
    return std::sqrt(1.0 - signal_coeff(t));
  }
  return sigma(t);
}

double NoiseSchedule::beta_step(int i) const {
  if (kind != ScheduleKind::kVpDiscrete) {
    throw ConfigError("beta_step is defined for discrete VP schedules only");
  }
  if (i < 1 || i > steps) {
    throw InputError("beta_step index " + std::to_string(i) +
                     " outside 1.." + std::to_string(steps));
  }
  const double t1 = static_cast<double>(i) / steps;
  const double t0 = static_cast<double>(i - 1) / steps;
  return 1.0 - std::exp(-(beta_integral(t1) - beta_integral(t0)));
}

double NoiseSchedule::beta_rate(double t) const {
  if (!is_vp()) {
    throw ConfigError("beta_rate is defined for VP schedules only");
  }
  const double u = is_discrete() ? t / static_cast<double>(steps) : t;
  if (u < 0.0 || u > 1.0) {
    throw InputError("beta_rate time outside range");
  }
  return beta_min + (beta_max - beta_min) * u;
}

double NoiseSchedule::drift_coeff(double t) const {
  if (is_vp()) {
    return -0.5 * beta_rate(t);
  }
  return 0.0;
}

double signal_coeff_ext(const NoiseSchedule& s, double t) {
  if (t < 0.0 || t > s.horizon()) {
    throw InputError("schedule time outside range");
  }
  if (!s.is_vp()) {
    return 1.0;
  }
  const double u = s.is_discrete() ? t / static_cast<double>(s.steps) : t;
  return std::exp(-s.beta_integral(u));
}

double sigma_ext(const NoiseSchedule& s, double t) {
  if (s.is_vp()) {
    throw ConfigError("sigma is defined for VE schedules only");
  }
  if (t < 0.0 || t > s.horizon()) {
    throw InputError("schedule time outside range");
  }
  if (s.kind == ScheduleKind::kVeContinuous) {
    return s.sigma_min * std::pow(s.sigma_max / s.sigma_min, t);
  }
  if (t < 1.0) {
    return t * s.sigma_min;
  }
  if (s.steps == 1) {
    return s.sigma_max;
  }
  const double exponent = (t - 1.0) / static_cast<double>(s.steps - 1);
  return s.sigma_min * std::pow(s.sigma_max / s.sigma_min, exponent);
}

double marginal_std_ext(const NoiseSchedule& s, double t) {
  if (s.is_vp()) {
    return std::sqrt(1.0 - signal_coeff_ext(s, t));
  }
  return sigma_ext(s, t);
}

double NoiseSchedule::diffusion_coeff(double t) const {
  if (is_vp()) {
    return std::sqrt(beta_rate(t));
  }
  if (kind == ScheduleKind::kVeContinuous) {
    return sigma(t) * std::sqrt(2.0 * std::log(sigma_max / sigma_min));
  }
  throw ConfigError("diffusion_coeff is defined for continuous kinds and VP");
}

}  // namespace prisampler
