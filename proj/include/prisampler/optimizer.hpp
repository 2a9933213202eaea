#ifndef PRISAMPLER_OPTIMIZER_HPP
#define PRISAMPLER_OPTIMIZER_HPP

#include <cstdint>
#include <vector>

#include "prisampler/mlp.hpp"

namespace prisampler {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Throws TrainingError naming the offending
// parameter when a gradient is not finite.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const Mlp& model, AdamConfig config = {});

  void step(Mlp& model, const Mlp::Gradients& grads);
  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

}  // namespace prisampler

#endif  // PRISAMPLER_OPTIMIZER_HPP
