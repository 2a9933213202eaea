#include "prisampler/optimizer.hpp"

#include <cmath>
#include <string>

#include "prisampler/errors.hpp"

namespace prisampler {

AdamOptimizer::AdamOptimizer(const Mlp& model, AdamConfig config)
    : config_(config) {
  mw_.reserve(model.num_layers());
  vw_.reserve(model.num_layers());
  mb_.reserve(model.num_layers());
  vb_.reserve(model.num_layers());
  for (int l = 0; l < model.num_layers(); ++l) {
    mw_.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                        model.weights[l].cols()));
    vw_.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                        model.weights[l].cols()));
    mb_.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    vb_.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
}

void AdamOptimizer::step(Mlp& model, const Mlp::Gradients& grads) {
  if (grads.w.size() != mw_.size()) {
    throw InputError("AdamOptimizer::step got gradients for " +
                     std::to_string(grads.w.size()) + " layers, expected " +
                     std::to_string(mw_.size()));
  }
  for (std::size_t l = 0; l < grads.w.size(); ++l) {
    if (!grads.w[l].allFinite()) {
      throw TrainingError("non-finite gradient for parameter w" +
                          std::to_string(l));
    }
    if (!grads.b[l].allFinite()) {
      throw TrainingError("non-finite gradient for parameter b" +
                          std::to_string(l));
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t l = 0; l < grads.w.size(); ++l) {
    mw_[l] = config_.beta1 * mw_[l] + (1.0 - config_.beta1) * grads.w[l];
    vw_[l] = config_.beta2 * vw_[l] +
             (1.0 - config_.beta2) * grads.w[l].cwiseProduct(grads.w[l]);
    mb_[l] = config_.beta1 * mb_[l] + (1.0 - config_.beta1) * grads.b[l];
    vb_[l] = config_.beta2 * vb_[l] +
             (1.0 - config_.beta2) * grads.b[l].cwiseProduct(grads.b[l]);

    model.weights[l].array() -=
        config_.lr * (mw_[l].array() / c1) /
        ((vw_[l].array() / c2).sqrt() + config_.eps);
    model.biases[l].array() -=
        config_.lr * (mb_[l].array() / c1) /
        ((vb_[l].array() / c2).sqrt() + config_.eps);
  }
}

}  // namespace prisampler
