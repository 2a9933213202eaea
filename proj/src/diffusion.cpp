#include "prisampler/diffusion.hpp"

#include <cmath>
#include <string>

#include "prisampler/errors.hpp"

namespace prisampler {

namespace {

constexpr double kProbFloor = 1e-12;

void check_batch_shapes(const Eigen::MatrixXd& x0, const Eigen::VectorXd& t,
                        const Eigen::MatrixXd& eps) {
  if (eps.rows() != x0.rows() || eps.cols() != x0.cols()) {
    throw InputError("noise shape does not match the data batch");
  }
  if (t.size() != x0.rows()) {
    throw InputError("need one time per batch row");
  }
}

void check_one_hot(const Eigen::VectorXd& v, const char* who) {
  if (v.size() < 1) {
    throw InputError(std::string(who) + ": empty category vector");
  }
  int ones = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      ++ones;
    } else if (v[i] != 0.0) {
      throw InputError(std::string(who) + ": entries must be exactly 0 or 1");
    }
  }
  if (ones != 1) {
    throw InputError(std::string(who) + ": expected exactly one hot entry");
  }
}

void check_simplex(const Eigen::VectorXd& p, const char* who) {
  if (p.size() < 1 || p.minCoeff() < -kProbFloor ||
      std::abs(p.sum() - 1.0) > 1e-6) {
    throw InputError(std::string(who) +
                     ": expected a probability vector over categories");
  }
}

void require_multinomial_schedule(const NoiseSchedule& schedule) {
  if (schedule.kind != ScheduleKind::kVpDiscrete) {
    throw ConfigError("categorical diffusion uses a discrete VP schedule");
  }
}

}  // namespace

Eigen::MatrixXd perturb_vp(const Eigen::MatrixXd& x0, const Eigen::VectorXd& t,
                           const Eigen::MatrixXd& eps,
                           const NoiseSchedule& schedule) {
  check_batch_shapes(x0, t, eps);
  Eigen::MatrixXd x_t(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    const double alpha = schedule.signal_coeff(t[i]);
    x_t.row(i) =
        std::sqrt(alpha) * x0.row(i) + std::sqrt(1.0 - alpha) * eps.row(i);
  }
  return x_t;
}

Eigen::MatrixXd perturb_ve(const Eigen::MatrixXd& x0, const Eigen::VectorXd& t,
                           const Eigen::MatrixXd& eps,
                           const NoiseSchedule& schedule) {
  check_batch_shapes(x0, t, eps);
  Eigen::MatrixXd x_t(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    x_t.row(i) = x0.row(i) + schedule.sigma(t[i]) * eps.row(i);
  }
  return x_t;
}

DiffusionBatch make_training_batch(const Eigen::MatrixXd& x0,
                                   const NoiseSchedule& schedule,
                                   RngStream& rng) {
  const Eigen::Index n = x0.rows();
  DiffusionBatch batch;
  batch.t.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (schedule.is_discrete()) {
      batch.t[i] = static_cast<double>(rng.uniform_int(1, schedule.steps));
    } else {
      batch.t[i] = 1.0 - (1.0 - kContinuousTimeFloor) * rng.uniform();
    }
  }
  batch.eps = rng.normal_matrix(n, x0.cols());
  batch.x_t = schedule.is_vp() ? perturb_vp(x0, batch.t, batch.eps, schedule)
                               : perturb_ve(x0, batch.t, batch.eps, schedule);
  return batch;
}

namespace {

double finite_or_throw(double loss, const char* who) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(who) + " produced a non-finite loss");
  }
  return loss;
}

// Shared core: in raw-output form every loss here is the mean squared norm
// of (raw + eps) for score nets or (raw - eps) for noise nets, because the
// marginal-variance weighting cancels the 1/std(t) output scaling.
LossResult regression_loss(DenoiserNet& net, const DiffusionBatch& batch,
                           double sign, const char* who) {
  Mlp::ForwardCache cache;
  const Eigen::MatrixXd raw = net.forward(batch.x_t, batch.t, cache);
  const Eigen::MatrixXd diff = raw + sign * batch.eps;
  LossResult result;
  result.loss =
      finite_or_throw(diff.squaredNorm() / batch.x_t.rows(), who);
  result.grads = net.backward(cache, 2.0 * diff / batch.x_t.rows());
  return result;
}

double weighted_score_loss(const PredictFn& predict_score,
                           const DiffusionBatch& batch,
                           const NoiseSchedule& schedule, const char* who) {
  const Eigen::MatrixXd score = predict_score(batch.x_t, batch.t);
  if (score.rows() != batch.x_t.rows() || score.cols() != batch.x_t.cols()) {
    throw InputError(std::string(who) + ": prediction shape mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch.x_t.rows(); ++i) {
    const double std_t = schedule.marginal_std(batch.t[i]);
    const Eigen::VectorXd target = -batch.eps.row(i).transpose() / std_t;
    total += std_t * std_t *
             (score.row(i).transpose() - target).squaredNorm();
  }
  return finite_or_throw(total / batch.x_t.rows(), who);
}

}  // namespace

double ddpm_loss(const PredictFn& predict_noise, const Eigen::MatrixXd& x0,
                 const NoiseSchedule& schedule, RngStream& rng) {
  if (schedule.kind != ScheduleKind::kVpDiscrete) {
    throw ConfigError("ddpm_loss requires a discrete VP schedule");
  }
  const DiffusionBatch batch = make_training_batch(x0, schedule, rng);
  const Eigen::MatrixXd pred = predict_noise(batch.x_t, batch.t);
  if (pred.rows() != batch.eps.rows() || pred.cols() != batch.eps.cols()) {
    throw InputError("ddpm_loss: prediction shape mismatch");
  }
  return finite_or_throw((pred - batch.eps).squaredNorm() / x0.rows(),
                         "ddpm_loss");
}

LossResult ddpm_loss(DenoiserNet& net, const Eigen::MatrixXd& x0,
                     const NoiseSchedule& schedule, RngStream& rng) {
  if (schedule.kind != ScheduleKind::kVpDiscrete) {
    throw ConfigError("ddpm_loss requires a discrete VP schedule");
  }
  if (net.target != PredictionTarget::kNoise) {
    throw ConfigError("ddpm_loss trains noise-prediction nets");
  }
  const DiffusionBatch batch = make_training_batch(x0, schedule, rng);
  return regression_loss(net, batch, -1.0, "ddpm_loss");
}

double smld_loss(const PredictFn& predict_score, const Eigen::MatrixXd& x0,
                 const NoiseSchedule& schedule, RngStream& rng) {
  if (schedule.kind != ScheduleKind::kVeDiscrete) {
    throw ConfigError("smld_loss requires a discrete VE schedule");
  }
  const DiffusionBatch batch = make_training_batch(x0, schedule, rng);
  return weighted_score_loss(predict_score, batch, schedule, "smld_loss");
}

LossResult smld_loss(DenoiserNet& net, const Eigen::MatrixXd& x0,
                     const NoiseSchedule& schedule, RngStream& rng) {
  if (schedule.kind != ScheduleKind::kVeDiscrete) {
    throw ConfigError("smld_loss requires a discrete VE schedule");
  }
  if (net.target != PredictionTarget::kScore) {
    throw ConfigError("smld_loss trains score-prediction nets");
  }
  const DiffusionBatch batch = make_training_batch(x0, schedule, rng);
  return regression_loss(net, batch, 1.0, "smld_loss");
}

double ssde_loss(const PredictFn& predict_score, const Eigen::MatrixXd& x0,
                 const NoiseSchedule& schedule, RngStream& rng) {
  if (schedule.is_discrete()) {
    throw ConfigError("ssde_loss requires a continuous schedule");
  }
  const DiffusionBatch batch = make_training_batch(x0, schedule, rng);
  return weighted_score_loss(predict_score, batch, schedule, "ssde_loss");
}

LossResult ssde_loss(DenoiserNet& net, const Eigen::MatrixXd& x0,
                     const NoiseSchedule& schedule, RngStream& rng) {
  if (schedule.is_discrete()) {
    throw ConfigError("ssde_loss requires a continuous schedule");
  }
  if (net.target != PredictionTarget::kScore) {
    throw ConfigError("ssde_loss trains score-prediction nets");
  }
  const DiffusionBatch batch = make_training_batch(x0, schedule, rng);
  return regression_loss(net, batch, 1.0, "ssde_loss");
}

Eigen::MatrixXd score_from_net(const DenoiserNet& net,
                               const NoiseSchedule& schedule,
                               const Eigen::MatrixXd& x, double t) {
  const double std_t = schedule.marginal_std(t);
  if (std_t <= 0.0) {
    throw InputError("score undefined at zero noise level");
  }
  const Eigen::MatrixXd raw = net.forward(x, t);
  return net.target == PredictionTarget::kNoise ? (-raw / std_t).eval()
                                                : (raw / std_t).eval();
}

Eigen::MatrixXd noise_from_net(const DenoiserNet& net,
                               const Eigen::MatrixXd& x, double t) {
  const Eigen::MatrixXd raw = net.forward(x, t);
  return net.target == PredictionTarget::kNoise ? raw : (-raw).eval();
}

int multinomial_perturb(const Eigen::VectorXd& x0_onehot, int t,
                        const NoiseSchedule& schedule, RngStream& rng) {
  require_multinomial_schedule(schedule);
  check_one_hot(x0_onehot, "multinomial_perturb");
  const double alpha_bar = schedule.signal_coeff(static_cast<double>(t));
  const double k = static_cast<double>(x0_onehot.size());
  const Eigen::VectorXd probs =
      alpha_bar * x0_onehot +
      Eigen::VectorXd::Constant(x0_onehot.size(), (1.0 - alpha_bar) / k);
  return sample_categorical(probs, rng);
}

Eigen::VectorXd multinomial_posterior(const Eigen::VectorXd& x_t_onehot,
                                      const Eigen::VectorXd& x0_probs, int t,
                                      const NoiseSchedule& schedule) {
  require_multinomial_schedule(schedule);
  check_one_hot(x_t_onehot, "multinomial_posterior");
  check_simplex(x0_probs, "multinomial_posterior");
  if (x_t_onehot.size() != x0_probs.size()) {
    throw InputError("multinomial_posterior: category count mismatch");
  }
  if (t < 1 || t > schedule.steps) {
    throw InputError("multinomial_posterior: step outside 1..steps");
  }
  const double k = static_cast<double>(x_t_onehot.size());
  const double alpha = schedule.alpha_step(t);
  const double alpha_bar_prev =
      schedule.signal_coeff(static_cast<double>(t - 1));
  const Eigen::VectorXd from_x_t =
      alpha * x_t_onehot +
      Eigen::VectorXd::Constant(x_t_onehot.size(), (1.0 - alpha) / k);
  const Eigen::VectorXd from_x0 =
      alpha_bar_prev * x0_probs +
      Eigen::VectorXd::Constant(x0_probs.size(), (1.0 - alpha_bar_prev) / k);
  Eigen::VectorXd theta = from_x_t.cwiseProduct(from_x0);
  const double total = theta.sum();
  if (!(total > 0.0)) {
    throw SolverError("multinomial_posterior: degenerate posterior");
  }
  return theta / total;
}

double kl_divergence(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
  if (q.size() != p.size()) {
    throw InputError("kl_divergence: size mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) {
      kl += q[i] * std::log(q[i] / std::max(p[i], kProbFloor));
    }
  }
  return std::max(kl, 0.0);
}

double multinomial_step_loss(const Eigen::VectorXd& x_t_onehot,
                             const Eigen::VectorXd& x0_onehot,
                             const Eigen::VectorXd& model_x0_probs, int t,
                             const NoiseSchedule& schedule) {
  check_one_hot(x0_onehot, "multinomial_step_loss");
  const Eigen::VectorXd q =
      multinomial_posterior(x_t_onehot, x0_onehot, t, schedule);
  const Eigen::VectorXd p =
      multinomial_posterior(x_t_onehot, model_x0_probs, t, schedule);
  return kl_divergence(q, p);
}

Eigen::VectorXd multinomial_step_loss_grad(
    const Eigen::VectorXd& x_t_onehot, const Eigen::VectorXd& x0_onehot,
    const Eigen::VectorXd& model_x0_probs, int t,
    const NoiseSchedule& schedule) {
  check_one_hot(x0_onehot, "multinomial_step_loss_grad");
  check_simplex(model_x0_probs, "multinomial_step_loss_grad");
  const Eigen::VectorXd q =
      multinomial_posterior(x_t_onehot, x0_onehot, t, schedule);

  const double k = static_cast<double>(x_t_onehot.size());
  const double alpha = schedule.alpha_step(t);
  const double alpha_bar_prev =
      schedule.signal_coeff(static_cast<double>(t - 1));
  const Eigen::VectorXd from_x_t =
      alpha * x_t_onehot +
      Eigen::VectorXd::Constant(x_t_onehot.size(), (1.0 - alpha) / k);
  const Eigen::VectorXd u = from_x_t.cwiseProduct(
      alpha_bar_prev * model_x0_probs +
      Eigen::VectorXd::Constant(model_x0_probs.size(),
                                (1.0 - alpha_bar_prev) / k));
  const double total = u.sum();

  // d(KL)/du_j for KL(q || u / sum(u)), then chain through the softmax that
  // produced model_x0_probs: du_j/dz_m = from_x_t_j * abar * s_j (d_jm - s_m).
  Eigen::VectorXd dkl_du(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    dkl_du[j] = 1.0 / total - q[j] / std::max(u[j], kProbFloor);
  }
  const Eigen::VectorXd w =
      alpha_bar_prev * from_x_t.cwiseProduct(model_x0_probs);
  Eigen::VectorXd grad(u.size());
  const double shared = dkl_du.cwiseProduct(w).sum();
  for (Eigen::Index m = 0; m < u.size(); ++m) {
    grad[m] = dkl_du[m] * w[m] - model_x0_probs[m] * shared;
  }
  return grad;
}

double tabddpm_loss(double num_loss, const std::vector<double>& cat_losses,
                    int num_categorical) {
  if (num_categorical < 0 ||
      static_cast<std::size_t>(num_categorical) != cat_losses.size()) {
    throw InputError(
        "tabddpm_loss: categorical count must match the loss list");
  }
  if (cat_losses.empty()) {
    return num_loss;
  }
  double cat_sum = 0.0;
  for (double v : cat_losses) {
    cat_sum += v;
  }
  return num_loss + cat_sum / static_cast<double>(num_categorical);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

int sample_categorical(const Eigen::VectorXd& probs, RngStream& rng) {
  if (probs.size() < 1 || probs.minCoeff() < 0.0) {
    throw InputError("sample_categorical: invalid probability vector");
  }
  const double total = probs.sum();
  if (!(total > 0.0)) {
    throw InputError("sample_categorical: probabilities sum to zero");
  }
  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace prisampler
