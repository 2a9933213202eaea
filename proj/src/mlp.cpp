#include "prisampler/mlp.hpp"

#include <cmath>
#include <string>

#include "prisampler/errors.hpp"

namespace prisampler {

namespace {

constexpr double kMinFrequency = 1.0;
constexpr double kMaxFrequency = 1000.0;

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kSilu:
      z = z.unaryExpr([](double v) { return v * stable_sigmoid(v); });
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

Eigen::MatrixXd activation_derivative(Activation act,
                                      const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kSilu:
      return z.unaryExpr([](double v) {
        const double s = stable_sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
    case Activation::kTanh:
      return z.unaryExpr([](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
  }
  return Eigen::MatrixXd();
}

}  // namespace

Eigen::VectorXd time_embedding(double t, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw InputError("time_embedding dimension must be positive and even, got " +
                     std::to_string(dim));
  }
  const int half = dim / 2;
  Eigen::VectorXd out(dim);
  for (int k = 0; k < half; ++k) {
    const double exponent =
        half > 1 ? static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
    const double freq =
        kMinFrequency * std::pow(kMaxFrequency / kMinFrequency, exponent);
    out[2 * k] = std::sin(freq * t);
    out[2 * k + 1] = std::cos(freq * t);
  }
  return out;
}

Mlp::Mlp(std::vector<int> dims, Activation act, RngStream& init_rng)
    : layer_dims(std::move(dims)), activation(act) {
  if (layer_dims.size() < 2) {
    throw InputError("Mlp needs at least an input and an output dimension");
  }
  for (int d : layer_dims) {
    if (d <= 0) {
      throw InputError("Mlp layer dimensions must be positive");
    }
  }
  const int n = static_cast<int>(layer_dims.size()) - 1;
  weights.reserve(n);
  biases.reserve(n);
  for (int l = 0; l < n; ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    weights.push_back(init_rng.normal_matrix(fan_out, fan_in) * std);
    biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

std::int64_t Mlp::param_count() const {
  std::int64_t total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    total += weights[l].size() + biases[l].size();
  }
  return total;
}

void Mlp::Gradients::setZero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

void Mlp::Gradients::add(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] += scale * other.w[l];
    b[l] += scale * other.b[l];
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) {
    throw InputError("Mlp::forward got " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = x;
  const int n = num_layers();
  for (int l = 0; l < n; ++l) {
    Eigen::MatrixXd z = a * weights[l].transpose();
    z.rowwise() += biases[l].transpose();
    if (l + 1 < n) {
      apply_activation(activation, z);
    }
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x,
                             ForwardCache& cache) const {
  if (x.cols() != input_dim()) {
    throw InputError("Mlp::forward got " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(input_dim()));
  }
  const int n = num_layers();
  cache.input = x;
  cache.pre.assign(n, Eigen::MatrixXd());
  cache.act.assign(n, Eigen::MatrixXd());
  const Eigen::MatrixXd* a = &cache.input;
  for (int l = 0; l < n; ++l) {
    Eigen::MatrixXd z = (*a) * weights[l].transpose();
    z.rowwise() += biases[l].transpose();
    cache.pre[l] = z;
    if (l + 1 < n) {
      apply_activation(activation, z);
    }
    cache.act[l] = std::move(z);
    a = &cache.act[l];
  }
  return cache.act[n - 1];
}

Mlp::Gradients Mlp::backward(const ForwardCache& cache,
                             const Eigen::MatrixXd& dloss_dout) const {
  const int n = num_layers();
  Gradients grads = zero_gradients();
  Eigen::MatrixXd g = dloss_dout;
  for (int l = n - 1; l >= 0; --l) {
    if (l + 1 < n) {
      g = g.cwiseProduct(activation_derivative(activation, cache.pre[l]));
    }
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.act[l - 1];
    grads.w[l] = g.transpose() * below;
    grads.b[l] = g.colwise().sum().transpose();
    if (l > 0) {
      g = g * weights[l];
    }
  }
  return grads;
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients grads;
  grads.w.reserve(num_layers());
  grads.b.reserve(num_layers());
  for (int l = 0; l < num_layers(); ++l) {
    grads.w.push_back(Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
    grads.b.push_back(Eigen::VectorXd::Zero(biases[l].size()));
  }
  return grads;
}

namespace {

std::vector<int> denoiser_dims(int data_dim, const std::vector<int>& hidden,
                               int time_embed_dim) {
  if (data_dim <= 0) {
    throw InputError("DenoiserNet data_dim must be positive");
  }
  if (time_embed_dim < 0 || time_embed_dim % 2 != 0) {
    throw InputError("DenoiserNet time_embed_dim must be even and >= 0");
  }
  std::vector<int> dims;
  dims.reserve(hidden.size() + 2);
  dims.push_back(data_dim + time_embed_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(data_dim);
  return dims;
}

}  // namespace

DenoiserNet::DenoiserNet(int data_dim, std::vector<int> hidden_dims,
                         int time_embed_dim, double max_time,
                         PredictionTarget target, RngStream& init_rng)
    : mlp(denoiser_dims(data_dim, hidden_dims, time_embed_dim),
          Activation::kSilu, init_rng),
      data_dim(data_dim),
      time_embed_dim(time_embed_dim),
      max_time(max_time),
      target(target) {
  if (max_time <= 0.0) {
    throw InputError("DenoiserNet max_time must be positive");
  }
}

Eigen::MatrixXd DenoiserNet::with_time_features(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& t) const {
  if (x.cols() != data_dim) {
    throw InputError("DenoiserNet input has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(data_dim));
  }
  if (t.size() != x.rows()) {
    throw InputError("DenoiserNet needs one time per row");
  }
  if (time_embed_dim == 0) {
    return x;
  }
  Eigen::MatrixXd joined(x.rows(), data_dim + time_embed_dim);
  joined.leftCols(data_dim) = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    joined.row(i).tail(time_embed_dim) =
        time_embedding(t[i] / max_time, time_embed_dim).transpose();
  }
  return joined;
}

Eigen::MatrixXd DenoiserNet::forward(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& t) const {
  return mlp.forward(with_time_features(x, t));
}

Eigen::MatrixXd DenoiserNet::forward(const Eigen::MatrixXd& x,
                                     double t) const {
  return forward(x, Eigen::VectorXd::Constant(x.rows(), t));
}

Eigen::MatrixXd DenoiserNet::forward(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& t,
                                     Mlp::ForwardCache& cache) const {
  return mlp.forward(with_time_features(x, t), cache);
}

Mlp::Gradients DenoiserNet::backward(const Mlp::ForwardCache& cache,
                                     const Eigen::MatrixXd& dloss_dout) const {
  return mlp.backward(cache, dloss_dout);
}

}  // namespace prisampler
