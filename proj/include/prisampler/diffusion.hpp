#ifndef PRISAMPLER_DIFFUSION_HPP
#define PRISAMPLER_DIFFUSION_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "prisampler/mlp.hpp"
#include "prisampler/rng.hpp"
#include "prisampler/schedule.hpp"

namespace prisampler {

// One training minibatch: perturbed states, the times used, and the noise
// that produced them. Rows correspond across all three.
struct DiffusionBatch {
  Eigen::MatrixXd x_t;
  Eigen::VectorXd t;
  Eigen::MatrixXd eps;
};

Eigen::MatrixXd perturb_vp(const Eigen::MatrixXd& x0, const Eigen::VectorXd& t,
                           const Eigen::MatrixXd& eps,
                           const NoiseSchedule& schedule);
Eigen::MatrixXd perturb_ve(const Eigen::MatrixXd& x0, const Eigen::VectorXd& t,
                           const Eigen::MatrixXd& eps,
                           const NoiseSchedule& schedule);

// Draws one time per row (uniform over {1..steps} for discrete kinds,
// uniform over (time floor, 1] for continuous kinds), then the noise matrix.
DiffusionBatch make_training_batch(const Eigen::MatrixXd& x0,
                                   const NoiseSchedule& schedule,
                                   RngStream& rng);

struct LossResult {
  double loss = 0.0;
  Mlp::Gradients grads;
};

// Prediction callback used by the callable loss overloads: maps (x_t, t) to
// the net's prediction (noise for DDPM, score for SMLD/SSDE).
using PredictFn =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

// Mean over the batch of the per-sample squared error norms, so a zero
// predictor scores close to the data dimension.
double ddpm_loss(const PredictFn& predict_noise, const Eigen::MatrixXd& x0,
                 const NoiseSchedule& schedule, RngStream& rng);
LossResult ddpm_loss(DenoiserNet& net, const Eigen::MatrixXd& x0,
                     const NoiseSchedule& schedule, RngStream& rng);

// Weighted score matching with lambda(t) = sigma_t^2 against the target
// -(x_t - x0) / sigma_t^2.
double smld_loss(const PredictFn& predict_score, const Eigen::MatrixXd& x0,
                 const NoiseSchedule& schedule, RngStream& rng);
LossResult smld_loss(DenoiserNet& net, const Eigen::MatrixXd& x0,
                     const NoiseSchedule& schedule, RngStream& rng);

// Continuous-time score matching; lambda(t) is the marginal variance, which
// makes the loss equal to the noise regression in both VP and VE form.
double ssde_loss(const PredictFn& predict_score, const Eigen::MatrixXd& x0,
                 const NoiseSchedule& schedule, RngStream& rng);
LossResult ssde_loss(DenoiserNet& net, const Eigen::MatrixXd& x0,
                     const NoiseSchedule& schedule, RngStream& rng);

// Score of the perturbation marginal implied by the net's prediction:
// -eps_hat(x, t) / marginal_std(t).
Eigen::MatrixXd score_from_net(const DenoiserNet& net,
                               const NoiseSchedule& schedule,
                               const Eigen::MatrixXd& x, double t);
// Noise prediction implied by the net regardless of its parameterization.
Eigen::MatrixXd noise_from_net(const DenoiserNet& net,
                               const Eigen::MatrixXd& x, double t);

// --- Multinomial (categorical) diffusion, uniform corruption kernel ---

// Samples x_t from Cat(alpha_bar_t x0 + (1 - alpha_bar_t)/K).
int multinomial_perturb(const Eigen::VectorXd& x0_onehot, int t,
                        const NoiseSchedule& schedule, RngStream& rng);

// Posterior q(x_{t-1} | x_t, x0) with x0 given as a probability vector;
// passing a one-hot x0 yields the true posterior, passing model
// probabilities yields the reverse-process distribution.
Eigen::VectorXd multinomial_posterior(const Eigen::VectorXd& x_t_onehot,
                                      const Eigen::VectorXd& x0_probs, int t,
                                      const NoiseSchedule& schedule);

double kl_divergence(const Eigen::VectorXd& q, const Eigen::VectorXd& p);

// Per-sample categorical training loss at step t: KL between the posterior
// under the true one-hot x0 and the posterior under the model's x0 probs.
// At t = 1 the former is one-hot, so this reduces to cross-entropy.
double multinomial_step_loss(const Eigen::VectorXd& x_t_onehot,
                             const Eigen::VectorXd& x0_onehot,
                             const Eigen::VectorXd& model_x0_probs, int t,
                             const NoiseSchedule& schedule);

// Gradient of multinomial_step_loss with respect to the logits that produced
// model_x0_probs via softmax (chain rule through the posterior; at t = 1 it
// reduces to the usual softmax cross-entropy difference).
Eigen::VectorXd multinomial_step_loss_grad(const Eigen::VectorXd& x_t_onehot,
                                           const Eigen::VectorXd& x0_onehot,
                                           const Eigen::VectorXd& model_x0_probs,
                                           int t, const NoiseSchedule& schedule);

// Mixed tabular objective: numeric term plus the categorical terms averaged
// over the number of categorical columns.
double tabddpm_loss(double num_loss, const std::vector<double>& cat_losses,
                    int num_categorical);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
int sample_categorical(const Eigen::VectorXd& probs, RngStream& rng);

}  // namespace prisampler

#endif  // PRISAMPLER_DIFFUSION_HPP
