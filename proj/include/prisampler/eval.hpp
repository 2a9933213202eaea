#ifndef PRISAMPLER_EVAL_HPP
#define PRISAMPLER_EVAL_HPP

#include <Eigen/Dense>
#include <string>

#include "prisampler/tabular.hpp"

namespace prisampler {

struct UtilityReport {
  std::string metric;
  double value = 0.0;
  std::string dataset_id;
  std::string model_id;
  std::string sampler_id;
  int n_used = 0;
};

struct GbdtConfig {
  int rounds = 200;
  int depth = 2;
  double learning_rate = 0.1;
  double leaf_ridge = 1.0;
};

// Trains the built-in gradient-boosted tree classifier on the synthetic rows
// and reports macro-F1 on the real test rows. The macro average runs over the
// label classes present in the synthetic training data, since those are the
// only classes the classifier can emit.
double f1_train_synth_test_real(const TabularDataset& synthetic,
                                const TabularDataset& real_test,
                                const std::string& label_column,
                                const GbdtConfig& config = GbdtConfig{});

// Frechet distance between the Gaussian fits of two feature sets:
// ||mu1 - mu2||^2 + tr(C1 + C2 - 2 (C1 C2)^{1/2}), with a 1e-6 ridge on both
// covariances and the matrix square root taken by eigendecomposition of the
// symmetrized product.
double frechet_distance(const Eigen::MatrixXd& real,
                        const Eigen::MatrixXd& generated);

}  // namespace prisampler

#endif  // PRISAMPLER_EVAL_HPP
