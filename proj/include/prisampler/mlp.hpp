#ifndef PRISAMPLER_MLP_HPP
#define PRISAMPLER_MLP_HPP

#include <Eigen/Dense>
#include <vector>

#include "prisampler/rng.hpp"

namespace prisampler {

enum class Activation { kSilu, kTanh };

// Interleaved (sin, cos) pairs at geometrically spaced frequencies.
// t = 0 maps to (0, 1, 0, 1, ...). `dim` must be positive and even.
Eigen::VectorXd time_embedding(double t, int dim);

// Fully connected network with smooth activations on hidden layers and a
// linear output layer. Batches are row-major: one sample per row.
struct Mlp {
  std::vector<int> layer_dims;
  Activation activation = Activation::kSilu;
  std::vector<Eigen::MatrixXd> weights;  // per layer, shape out x in
  std::vector<Eigen::VectorXd> biases;   // per layer, shape out

  Mlp() = default;
  Mlp(std::vector<int> dims, Activation act, RngStream& init_rng);

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::int64_t param_count() const;

  struct ForwardCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
    std::vector<Eigen::MatrixXd> act;  // post-activation per layer
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    void setZero();
    void add(const Gradients& other, double scale = 1.0);
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;

  // `dloss_dout` has the same shape as the forward output.
  Gradients backward(const ForwardCache& cache,
                     const Eigen::MatrixXd& dloss_dout) const;

  Gradients zero_gradients() const;
};

enum class PredictionTarget { kNoise, kScore };

// Denoiser head: concatenates the state with a time embedding of t/max_time
// and runs the MLP. The raw head output is the noise prediction for kNoise
// nets; kScore nets are trained so that score(x, t) = head(x, t) / std(t),
// with the scaling applied where the noise schedule is known.
struct DenoiserNet {
  Mlp mlp;
  int data_dim = 0;
  int time_embed_dim = 0;
  double max_time = 1.0;
  PredictionTarget target = PredictionTarget::kNoise;

  DenoiserNet() = default;
  DenoiserNet(int data_dim, std::vector<int> hidden_dims, int time_embed_dim,
              double max_time, PredictionTarget target, RngStream& init_rng);

  // x is N x data_dim; t is one time per row (or one shared time).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& t) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, double t) const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                          Mlp::ForwardCache& cache) const;
  Mlp::Gradients backward(const Mlp::ForwardCache& cache,
                          const Eigen::MatrixXd& dloss_dout) const;

  Eigen::MatrixXd with_time_features(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& t) const;
};

}  // namespace prisampler

#endif  // PRISAMPLER_MLP_HPP
