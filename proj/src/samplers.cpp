#include "prisampler/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "prisampler/dopri5.hpp"
#include "prisampler/errors.hpp"

namespace prisampler {

namespace {

// Deterministic solvers stop slightly short of t = 0 (normalized), where the
// score blows up; the leftover noise there is negligible.
constexpr double kTerminalTime = 1e-3;
// Continuous schedules address interceptor steps on this reference grid, the
// same one the stochastic sampler uses by default.
constexpr int kContinuousInterceptorGrid = 1000;

std::vector<RngStream> make_chain_streams(RngStream& rng, int m) {
  std::vector<RngStream> chains;
  chains.reserve(m);
  for (int i = 0; i < m; ++i) {
    chains.push_back(rng.split(static_cast<std::uint64_t>(i)));
  }
  return chains;
}

Eigen::MatrixXd draw_prior(const NoiseSchedule& schedule, int m, int d,
                           std::vector<RngStream>& chains) {
  const double scale = schedule.is_vp() ? 1.0 : schedule.sigma_max;
  Eigen::MatrixXd x(m, d);
  for (int i = 0; i < m; ++i) {
    x.row(i) = scale * chains[i].normal_vector(d).transpose();
  }
  return x;
}

void apply_interceptor(Eigen::MatrixXd& x, int step,
                       const StepInterceptor* interceptor) {
  if (interceptor == nullptr || interceptor->target_steps.count(step) == 0) {
    return;
  }
  if (!interceptor->transform) {
    throw ConfigError("interceptor has target steps but no transform");
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd out = interceptor->transform(
        x.row(i).transpose(), step, static_cast<int>(i));
    if (out.size() != x.cols()) {
      throw InputError("interceptor transform changed the state dimension");
    }
    x.row(i) = out.transpose();
  }
}

void check_interceptor_range(const StepInterceptor* interceptor, int limit,
                             const char* sampler) {
  if (interceptor == nullptr) {
    return;
  }
  for (int s : interceptor->target_steps) {
    if (s < 0 || s >= limit) {
      throw ConfigError(std::string(sampler) + " sampler: interceptor step " +
                        std::to_string(s) + " outside 0.." +
                        std::to_string(limit - 1));
    }
  }
}

}  // namespace

SamplerConfig SamplerConfig::ancestral(int n_steps) {
  SamplerConfig c;
  c.kind = SamplerKind::kAncestral;
  c.n_steps = n_steps;
  return c;
}

SamplerConfig SamplerConfig::pc(int n_steps, double snr) {
  SamplerConfig c;
  c.kind = SamplerKind::kPc;
  c.n_steps = n_steps;
  c.corrector_snr = snr;
  return c;
}

SamplerConfig SamplerConfig::ode(double rtol, double atol) {
  SamplerConfig c;
  c.kind = SamplerKind::kOde;
  c.ode_rtol = rtol;
  c.ode_atol = atol;
  return c;
}

SamplerConfig SamplerConfig::dpm(int n_steps, int order) {
  SamplerConfig c;
  c.kind = SamplerKind::kDpm;
  c.n_steps = n_steps;
  c.dpm_order = order;
  return c;
}

void SamplerConfig::validate() const {
  if (n_steps < 0) {
    throw ConfigError("sampler n_steps must be non-negative");
  }
  if (corrector_snr < 0.0) {
    throw ConfigError("corrector_snr must be non-negative");
  }
  if (ode_rtol <= 0.0 || ode_atol <= 0.0) {
    throw ConfigError("ODE tolerances must be positive");
  }
  if (dpm_order < 1 || dpm_order > 3) {
    throw ConfigError("dpm_order must be 1, 2, or 3");
  }
}

Eigen::MatrixXd NetScoreModel::score(const Eigen::MatrixXd& x,
                                     double t) const {
  const double std_t = marginal_std_ext(*schedule_, t);
  if (std_t <= 0.0) {
    throw InputError("score undefined at zero noise level");
  }
  const Eigen::MatrixXd raw = net_->forward(x, t);
  return net_->target == PredictionTarget::kNoise ? (-raw / std_t).eval()
                                                  : (raw / std_t).eval();
}

GaussianScoreModel::GaussianScoreModel(Eigen::VectorXd mean,
                                       Eigen::MatrixXd cov,
                                       NoiseSchedule schedule)
    : mean_(std::move(mean)), cov_(std::move(cov)), schedule_(schedule) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
    throw InputError("Gaussian model needs a square covariance matching the mean");
  }
  schedule_.validate();
}

Eigen::MatrixXd GaussianScoreModel::score(const Eigen::MatrixXd& x,
                                          double t) const {
  if (x.cols() != mean_.size()) {
    throw InputError("Gaussian model got states of the wrong dimension");
  }
  const Eigen::Index d = mean_.size();
  Eigen::MatrixXd cov_t;
  Eigen::VectorXd shift;
  if (schedule_.is_vp()) {
    const double a = signal_coeff_ext(schedule_, t);
    cov_t = a * cov_ + (1.0 - a) * Eigen::MatrixXd::Identity(d, d);
    shift = std::sqrt(a) * mean_;
  } else {
    const double s = sigma_ext(schedule_, t);
    cov_t = cov_ + s * s * Eigen::MatrixXd::Identity(d, d);
    shift = mean_;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(cov_t);
  if (llt.info() != Eigen::Success) {
    throw SolverError("Gaussian model covariance is not positive definite");
  }
  const Eigen::MatrixXd centered = x.rowwise() - shift.transpose();
  return -llt.solve(centered.transpose()).transpose();
}

Eigen::MatrixXd ancestral_sample(const ScoreModel& model,
                                 const NoiseSchedule& schedule, int m,
                                 const SamplerConfig& config,
                                 const StepInterceptor* interceptor,
                                 RngStream& rng) {
  config.validate();
  if (schedule.kind != ScheduleKind::kVpDiscrete) {
    throw ConfigError("ancestral sampler requires a discrete VP schedule");
  }
  if (m < 0) {
    throw InputError("sample count must be non-negative");
  }
  std::vector<RngStream> chains = make_chain_streams(rng, m);
  Eigen::MatrixXd x = draw_prior(schedule, m, model.dim(), chains);
  if (config.n_steps == 0) {
    return x;
  }
  if (config.n_steps != schedule.steps) {
    throw ConfigError("ancestral sampler runs the full schedule grid");
  }
  check_interceptor_range(interceptor, schedule.steps, "ancestral");
  if (m == 0) {
    return x;
  }

  for (int i = schedule.steps; i >= 1; --i) {
    const Eigen::MatrixXd s = model.score(x, static_cast<double>(i));
    const double beta = schedule.beta_step(i);
    x = (x + beta * s) / std::sqrt(1.0 - beta);
    if (i > 1) {
      const double abar = schedule.signal_coeff(i);
      const double abar_prev = schedule.signal_coeff(i - 1);
      const double posterior_std =
          std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar));
      for (int c = 0; c < m; ++c) {
        x.row(c) +=
            posterior_std * chains[c].normal_vector(model.dim()).transpose();
      }
    }
    apply_interceptor(x, i - 1, interceptor);
  }
  return x;
}

Eigen::MatrixXd pc_sample(const ScoreModel& model,
                          const NoiseSchedule& schedule, int m,
                          const SamplerConfig& config,
                          const StepInterceptor* interceptor, RngStream& rng) {
  config.validate();
  if (m < 0) {
    throw InputError("sample count must be non-negative");
  }
  std::vector<RngStream> chains = make_chain_streams(rng, m);
  Eigen::MatrixXd x = draw_prior(schedule, m, model.dim(), chains);
  if (config.n_steps == 0) {
    return x;
  }
  if (schedule.is_discrete() && config.n_steps != schedule.steps) {
    throw ConfigError("PC sampler runs the full grid of a discrete schedule");
  }
  const int grid = schedule.is_discrete() ? schedule.steps : config.n_steps;
  check_interceptor_range(interceptor, grid, "pc");
  if (m == 0) {
    return x;
  }
  const int d = model.dim();

  const auto grid_time = [&](int j) {
    if (schedule.is_discrete()) {
      return static_cast<double>(j);
    }
    return kContinuousTimeFloor +
           (1.0 - kContinuousTimeFloor) * static_cast<double>(j) / grid;
  };

  for (int j = grid; j >= 1; --j) {
    const double t_hi = grid_time(j);
    const double t_lo = grid_time(j - 1);

    // Reverse-diffusion predictor.
    const Eigen::MatrixXd s = model.score(x, t_hi);
    double noise_scale = 0.0;
    switch (schedule.kind) {
      case ScheduleKind::kVpDiscrete: {
        const double beta = schedule.beta_step(j);
        x = (2.0 - std::sqrt(1.0 - beta)) * x + beta * s;
        noise_scale = std::sqrt(beta);
        break;
      }
      case ScheduleKind::kVeDiscrete: {
        const double s_hi = schedule.sigma(t_hi);
        const double s_lo = schedule.sigma(t_lo);
        const double gap = s_hi * s_hi - s_lo * s_lo;
        x += gap * s;
        noise_scale = std::sqrt(gap);
        break;
      }
      default: {
        const double dt = t_lo - t_hi;
        const double g = schedule.diffusion_coeff(t_hi);
        x += dt * (schedule.drift_coeff(t_hi) * x - g * g * s);
        noise_scale = g * std::sqrt(-dt);
        break;
      }
    }
    if (j > 1) {
      for (int c = 0; c < m; ++c) {
        x.row(c) += noise_scale * chains[c].normal_vector(d).transpose();
      }
    }

    // One Langevin corrector step at the new noise level.
    if (config.corrector_snr > 0.0 && marginal_std_ext(schedule, t_lo) > 0.0) {
      double alpha = 1.0;
      if (schedule.kind == ScheduleKind::kVpDiscrete) {
        alpha = schedule.alpha_step(j - 1);
      } else if (schedule.kind == ScheduleKind::kVpContinuous) {
        alpha = 1.0 - schedule.beta_rate(t_lo) / grid;
      }
      const Eigen::MatrixXd grad = model.score(x, t_lo);
      Eigen::MatrixXd z(m, d);
      for (int c = 0; c < m; ++c) {
        z.row(c) = chains[c].normal_vector(d).transpose();
      }
      const double grad_norm = grad.rowwise().norm().mean();
      const double noise_norm = z.rowwise().norm().mean();
      if (grad_norm == 0.0) {
        std::cerr << "warning: zero score norm, skipping corrector at step "
                  << j - 1 << "\n";
      } else {
        const double step_size =
            2.0 * alpha *
            std::pow(config.corrector_snr * noise_norm / grad_norm, 2.0);
        x += step_size * grad + std::sqrt(2.0 * step_size) * z;
      }
    }
    apply_interceptor(x, j - 1, interceptor);
  }
  return x;
}

Eigen::MatrixXd ode_sample(const ScoreModel& model,
                           const NoiseSchedule& schedule, int m,
                           const SamplerConfig& config,
                           const StepInterceptor* interceptor, RngStream& rng) {
  config.validate();
  if (m < 0) {
    throw InputError("sample count must be non-negative");
  }
  const int grid = schedule.is_discrete() ? schedule.steps
                                          : kContinuousInterceptorGrid;
  check_interceptor_range(interceptor, grid, "ode");
  std::vector<RngStream> chains = make_chain_streams(rng, m);
  Eigen::MatrixXd x = draw_prior(schedule, m, model.dim(), chains);
  if (m == 0) {
    return x;
  }

  // Interceptor steps mapped to normalized times, latest first.
  std::vector<std::pair<double, int>> targets;
  if (interceptor != nullptr) {
    for (int s : interceptor->target_steps) {
      targets.emplace_back(static_cast<double>(s) / grid, s);
    }
    std::sort(targets.begin(), targets.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    if (!targets.empty() && !interceptor->transform) {
      throw ConfigError("interceptor has target steps but no transform");
    }
  }

  const double sigma_log_ratio =
      schedule.is_vp() ? 0.0 : std::log(schedule.sigma_max / schedule.sigma_min);
  // For the discrete VE grid the extension's exponent runs over steps-1.
  const double ve_rate =
      schedule.kind == ScheduleKind::kVeDiscrete && schedule.steps > 1
          ? 2.0 * sigma_log_ratio * schedule.steps / (schedule.steps - 1.0)
          : 2.0 * sigma_log_ratio;

  Dopri5Options options;
  options.rtol = config.ode_rtol;
  options.atol = config.ode_atol;

  for (int c = 0; c < m; ++c) {
    const OdeRhs rhs = [&](double u, const Eigen::VectorXd& y) {
      const double t_native =
          schedule.is_discrete() ? u * schedule.steps : u;
      const Eigen::MatrixXd s = model.score(y.transpose(), t_native);
      if (schedule.is_vp()) {
        const double beta =
            schedule.beta_min + (schedule.beta_max - schedule.beta_min) * u;
        return (-0.5 * beta * (y + s.row(0).transpose())).eval();
      }
      const double sig = sigma_ext(schedule, t_native);
      return (-0.5 * ve_rate * sig * sig * s.row(0).transpose()).eval();
    };

    std::size_t next_target = 0;
    const PostStepHook hook = [&](double t_prev, double t_new,
                                  Eigen::VectorXd& y) {
      bool changed = false;
      while (next_target < targets.size() &&
             targets[next_target].first < t_prev &&
             targets[next_target].first >= t_new) {
        y = interceptor->transform(y, targets[next_target].second, c);
        if (y.size() != model.dim()) {
          throw InputError("interceptor transform changed the state dimension");
        }
        ++next_target;
        changed = true;
      }
      return changed;
    };

    Dopri5Result result = integrate_dopri5(rhs, x.row(c).transpose(), 1.0,
                                           kTerminalTime, options, hook);
    Eigen::VectorXd y = std::move(result.y);
    for (; next_target < targets.size(); ++next_target) {
      y = interceptor->transform(y, targets[next_target].second, c);
      if (y.size() != model.dim()) {
        throw InputError("interceptor transform changed the state dimension");
      }
    }
    x.row(c) = y.transpose();
  }
  return x;
}

namespace {

std::vector<int> dpm_block_orders(int n_steps, int order) {
  std::vector<int> orders;
  if (order == 1) {
    orders.assign(n_steps, 1);
  } else if (order == 2) {
    orders.assign(n_steps / 2, 2);
    if (n_steps % 2 == 1) {
      orders.push_back(1);
    }
  } else {
    const int k = n_steps / 3 + 1;
    if (n_steps % 3 == 0) {
      orders.assign(k - 2, 3);
      orders.push_back(2);
      orders.push_back(1);
    } else if (n_steps % 3 == 1) {
      orders.assign(k - 1, 3);
      orders.push_back(1);
    } else {
      orders.assign(k - 1, 3);
      orders.push_back(2);
    }
  }
  return orders;
}

// Log-SNR reparameterization of a VP schedule in normalized time.
struct VpLogSnr {
  double bmin;
  double bmax;

  double log_alpha(double u) const {
    return -0.5 * (bmin * u + 0.5 * (bmax - bmin) * u * u);
  }
  double sigma(double u) const {
    return std::sqrt(1.0 - std::exp(2.0 * log_alpha(u)));
  }
  double lambda(double u) const {
    return log_alpha(u) - std::log(sigma(u));
  }
  double inv_lambda(double lam) const {
    const double b = std::log1p(std::exp(-2.0 * lam));
    const double delta = bmax - bmin;
    return (-bmin + std::sqrt(bmin * bmin + 2.0 * delta * b)) / delta;
  }
};

}  // namespace

int dpm_node_count(int n_steps, int order) {
  if (n_steps < 1) {
    throw ConfigError("DPM sampler needs at least one model evaluation");
  }
  if (order < 1 || order > 3) {
    throw ConfigError("dpm_order must be 1, 2, or 3");
  }
  return static_cast<int>(dpm_block_orders(n_steps, order).size());
}

Eigen::MatrixXd dpm_sample(const ScoreModel& model,
                           const NoiseSchedule& schedule, int m,
                           const SamplerConfig& config,
                           const StepInterceptor* interceptor, RngStream& rng) {
  config.validate();
  if (!schedule.is_vp()) {
    throw ConfigError("DPM sampler does not support VE schedules");
  }
  if (m < 0) {
    throw InputError("sample count must be non-negative");
  }
  if (config.n_steps < 1) {
    throw ConfigError("DPM sampler needs at least one model evaluation");
  }
  const std::vector<int> orders =
      dpm_block_orders(config.n_steps, config.dpm_order);
  const int blocks = static_cast<int>(orders.size());
  check_interceptor_range(interceptor, blocks, "dpm");

  std::vector<RngStream> chains = make_chain_streams(rng, m);
  Eigen::MatrixXd x = draw_prior(schedule, m, model.dim(), chains);
  if (m == 0) {
    return x;
  }

  const VpLogSnr snr{schedule.beta_min, schedule.beta_max};
  const double lam_start = snr.lambda(1.0);
  const double lam_end = snr.lambda(kTerminalTime);
  std::vector<double> times(blocks + 1);
  times[0] = 1.0;
  times[blocks] = kTerminalTime;
  for (int b = 1; b < blocks; ++b) {
    const double lam =
        lam_start + (lam_end - lam_start) * static_cast<double>(b) / blocks;
    times[b] = snr.inv_lambda(lam);
  }

  const auto eps_hat = [&](const Eigen::MatrixXd& state, double u) {
    const double t_native = schedule.is_discrete() ? u * schedule.steps : u;
    return (-snr.sigma(u) * model.score(state, t_native)).eval();
  };

  for (int b = 1; b <= blocks; ++b) {
    const double su = times[b - 1];
    const double tu = times[b];
    const int order = orders[b - 1];

    const double la_s = snr.log_alpha(su);
    const double la_t = snr.log_alpha(tu);
    const double h = snr.lambda(tu) - snr.lambda(su);
    const double sig_t = snr.sigma(tu);
    const Eigen::MatrixXd eps_s = eps_hat(x, su);

    if (order == 1) {
      x = std::exp(la_t - la_s) * x - sig_t * std::expm1(h) * eps_s;
    } else if (order == 2) {
      const double r1 = 0.5;
      const double s1 = snr.inv_lambda(snr.lambda(su) + r1 * h);
      const double la_s1 = snr.log_alpha(s1);
      const double sig_s1 = snr.sigma(s1);
      const Eigen::MatrixXd x_s1 =
          std::exp(la_s1 - la_s) * x - sig_s1 * std::expm1(r1 * h) * eps_s;
      const Eigen::MatrixXd eps_s1 = eps_hat(x_s1, s1);
      x = std::exp(la_t - la_s) * x - sig_t * std::expm1(h) * eps_s -
          (0.5 / r1) * sig_t * std::expm1(h) * (eps_s1 - eps_s);
    } else {
      const double r1 = 1.0 / 3.0;
      const double r2 = 2.0 / 3.0;
      const double s1 = snr.inv_lambda(snr.lambda(su) + r1 * h);
      const double s2 = snr.inv_lambda(snr.lambda(su) + r2 * h);
      const double la_s1 = snr.log_alpha(s1);
      const double la_s2 = snr.log_alpha(s2);
      const double sig_s1 = snr.sigma(s1);
      const double sig_s2 = snr.sigma(s2);
      const double phi_11 = std::expm1(r1 * h);
      const double phi_12 = std::expm1(r2 * h);
      const double phi_1 = std::expm1(h);
      const double phi_22 = std::expm1(r2 * h) / (r2 * h) - 1.0;
      const double phi_2 = phi_1 / h - 1.0;

      const Eigen::MatrixXd x_s1 =
          std::exp(la_s1 - la_s) * x - sig_s1 * phi_11 * eps_s;
      const Eigen::MatrixXd eps_s1 = eps_hat(x_s1, s1);
      const Eigen::MatrixXd x_s2 =
          std::exp(la_s2 - la_s) * x - sig_s2 * phi_12 * eps_s -
          sig_s2 * (r2 / r1) * phi_22 * (eps_s1 - eps_s);
      const Eigen::MatrixXd eps_s2 = eps_hat(x_s2, s2);
      x = std::exp(la_t - la_s) * x - sig_t * phi_1 * eps_s -
          (1.0 / r2) * sig_t * phi_2 * (eps_s2 - eps_s);
    }
    apply_interceptor(x, blocks - b, interceptor);
  }
  return x;
}

Eigen::MatrixXd draw_samples(const ScoreModel& model,
                             const NoiseSchedule& schedule, int m,
                             const SamplerConfig& config,
                             const StepInterceptor* interceptor,
                             RngStream& rng) {
  switch (config.kind) {
    case SamplerKind::kAncestral:
      return ancestral_sample(model, schedule, m, config, interceptor, rng);
    case SamplerKind::kPc:
      return pc_sample(model, schedule, m, config, interceptor, rng);
    case SamplerKind::kOde:
      return ode_sample(model, schedule, m, config, interceptor, rng);
    case SamplerKind::kDpm:
      return dpm_sample(model, schedule, m, config, interceptor, rng);
  }
  throw ConfigError("unknown sampler kind");
}

}  // namespace prisampler
