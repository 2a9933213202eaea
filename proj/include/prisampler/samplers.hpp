#ifndef PRISAMPLER_SAMPLERS_HPP
#define PRISAMPLER_SAMPLERS_HPP

#include <Eigen/Dense>
#include <functional>
#include <set>

#include "prisampler/mlp.hpp"
#include "prisampler/rng.hpp"
#include "prisampler/schedule.hpp"

namespace prisampler {

enum class SamplerKind { kAncestral, kPc, kOde, kDpm };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kAncestral;
  int n_steps = 1000;
  double corrector_snr = 0.16;
  double ode_rtol = 1e-5;
  double ode_atol = 1e-5;
  int dpm_order = 3;

  static SamplerConfig ancestral(int n_steps = 1000);
  static SamplerConfig pc(int n_steps = 1000, double snr = 0.16);
  static SamplerConfig ode(double rtol = 1e-5, double atol = 1e-5);
  static SamplerConfig dpm(int n_steps = 40, int order = 3);

  void validate() const;
};

// Hook applied to intermediate chain states. Step indices address the noise
// level of the state just produced: 0 is the final sample, higher is noisier.
// For the DPM sampler they address the solver's own output nodes.
struct StepInterceptor {
  std::set<int> target_steps;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, int step, int chain)>
      transform;
};

// What the samplers consume: a score function for the time-t perturbation
// marginal. Times are in the schedule's native units; fractional times on
// discrete schedules use the continuous extension.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual int dim() const = 0;
  virtual Eigen::MatrixXd score(const Eigen::MatrixXd& x, double t) const = 0;
};

class NetScoreModel : public ScoreModel {
 public:
  NetScoreModel(const DenoiserNet& net, const NoiseSchedule& schedule)
      : net_(&net), schedule_(&schedule) {}
  int dim() const override { return net_->data_dim; }
  Eigen::MatrixXd score(const Eigen::MatrixXd& x, double t) const override;

 private:
  const DenoiserNet* net_;
  const NoiseSchedule* schedule_;
};

// Closed-form score when the data distribution is Gaussian: the time-t
// marginal is Gaussian too, so this is exact. Used as the sampler oracle.
class GaussianScoreModel : public ScoreModel {
 public:
  GaussianScoreModel(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                     NoiseSchedule schedule);
  int dim() const override { return static_cast<int>(mean_.size()); }
  Eigen::MatrixXd score(const Eigen::MatrixXd& x, double t) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  NoiseSchedule schedule_;
};

// All samplers draw chain i's randomness from rng.split(i), so results do not
// depend on batching and chains may run in parallel.
Eigen::MatrixXd ancestral_sample(const ScoreModel& model,
                                 const NoiseSchedule& schedule, int m,
                                 const SamplerConfig& config,
                                 const StepInterceptor* interceptor,
                                 RngStream& rng);

Eigen::MatrixXd pc_sample(const ScoreModel& model,
                          const NoiseSchedule& schedule, int m,
                          const SamplerConfig& config,
                          const StepInterceptor* interceptor, RngStream& rng);

Eigen::MatrixXd ode_sample(const ScoreModel& model,
                           const NoiseSchedule& schedule, int m,
                           const SamplerConfig& config,
                           const StepInterceptor* interceptor, RngStream& rng);

Eigen::MatrixXd dpm_sample(const ScoreModel& model,
                           const NoiseSchedule& schedule, int m,
                           const SamplerConfig& config,
                           const StepInterceptor* interceptor, RngStream& rng);

Eigen::MatrixXd draw_samples(const ScoreModel& model,
                             const NoiseSchedule& schedule, int m,
                             const SamplerConfig& config,
                             const StepInterceptor* interceptor,
                             RngStream& rng);

// Number of solver output nodes the DPM sampler produces for a budget of
// n_steps model evaluations (interceptor indices must be below this).
int dpm_node_count(int n_steps, int order);

}  // namespace prisampler

#endif  // PRISAMPLER_SAMPLERS_HPP
