#ifndef PRISAMPLER_SCHEDULE_HPP
#define PRISAMPLER_SCHEDULE_HPP

namespace prisampler {

enum class ScheduleKind { kVpDiscrete, kVeDiscrete, kVpContinuous, kVeContinuous };

inline constexpr double kContinuousTimeFloor = 1e-5;

// Noise schedule for the four diffusion formulations. Discrete kinds index
// steps t = 0..steps (t = 0 is clean data); continuous kinds use t in [0, 1].
//
// The VP discrete per-step betas are taken from the exact integral of the
// linear rate beta(t) = beta_min + (beta_max - beta_min) t, so the discrete
// cumulative signal coefficient agrees with the continuous one on the grid.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kVpDiscrete;
  int steps = 1000;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double sigma_min = 0.01;
  double sigma_max = 10.0;

  static NoiseSchedule vp_discrete(int steps = 1000, double beta_min = 0.1,
                                   double beta_max = 20.0);
  static NoiseSchedule ve_discrete(int steps = 1000, double sigma_min = 0.01,
                                   double sigma_max = 10.0);
  static NoiseSchedule vp_continuous(double beta_min = 0.1,
                                     double beta_max = 20.0);
  static NoiseSchedule ve_continuous(double sigma_min = 0.01,
                                     double sigma_max = 10.0);

  bool is_discrete() const {
    return kind == ScheduleKind::kVpDiscrete || kind == ScheduleKind::kVeDiscrete;
  }
  bool is_vp() const {
    return kind == ScheduleKind::kVpDiscrete || kind == ScheduleKind::kVpContinuous;
  }
  // Largest valid time: `steps` for discrete kinds, 1.0 for continuous.
  double horizon() const { return is_discrete() ? steps : 1.0; }

  // Cumulative signal coefficient alpha_t: 1 at t = 0, near 0 at the horizon
  // for VP kinds. VE kinds keep the signal untouched, so this is 1.
  double signal_coeff(double t) const;

  // VE noise magnitude sigma_t (0 at t = 0 for the discrete kind).
  double sigma(double t) const;

  // Standard deviation of x_t given x0: sqrt(1 - alpha_t) for VP, sigma_t
  // for VE.
  double marginal_std(double t) const;

  // VP discrete per-step quantities, i in 1..steps.
  double beta_step(int i) const;
  double alpha_step(int i) const { return 1.0 - beta_step(i); }

  // Continuous-time SDE coefficients: dx = drift_coeff(t) x dt + g(t) dw.
  double beta_rate(double t) const;
  double drift_coeff(double t) const;
  double diffusion_coeff(double t) const;

  void validate() const;

 private:
  double beta_integral(double t) const;
  void check_time(double t) const;

  friend double signal_coeff_ext(const NoiseSchedule& s, double t);
  friend double sigma_ext(const NoiseSchedule& s, double t);
};

// Real-time extensions used by the continuous-time samplers: they agree with
// the grid methods at integer steps of discrete schedules and accept
// fractional times in between (still in the schedule's native units).
double signal_coeff_ext(const NoiseSchedule& s, double t);
double sigma_ext(const NoiseSchedule& s, double t);
double marginal_std_ext(const NoiseSchedule& s, double t);

}  // namespace prisampler

#endif  // PRISAMPLER_SCHEDULE_HPP
