#include "prisampler/continuous2d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prisampler/diffusion.hpp"
#include "prisampler/errors.hpp"
#include "prisampler/optimizer.hpp"

namespace prisampler {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void MixtureSpec::validate() const {
  if (components.empty()) {
    throw InputError("mixture needs at least one component");
  }
  double total = 0.0;
  for (const MixtureComponent& comp : components) {
    if (comp.property_label != 0 && comp.property_label != 1) {
      throw InputError("component property labels must be 0 or 1");
    }
    if (comp.weight < 0.0) {
      throw InputError("component weights must be non-negative");
    }
    const Eigen::LLT<Eigen::Matrix2d> llt(comp.cov);
    if (llt.info() != Eigen::Success) {
      throw InputError("component covariance is not positive definite");
    }
    total += comp.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError("component weights must sum to 1");
  }
}

double MixtureSpec::positive_weight() const {
  double w = 0.0;
  for (const MixtureComponent& comp : components) {
    w += comp.property_label == 1 ? comp.weight : 0.0;
  }
  return w;
}

MixtureSpec MixtureSpec::separated_pair() {
  MixtureSpec spec;
  MixtureComponent pos;
  pos.mean << 2.0, 0.0;
  pos.cov = Eigen::Matrix2d::Identity();
  pos.property_label = 1;
  pos.weight = 0.5;
  MixtureComponent neg;
  neg.mean << -2.0, 0.0;
  neg.cov = Eigen::Matrix2d::Identity();
  neg.property_label = 0;
  neg.weight = 0.5;
  spec.components = {pos, neg};
  return spec;
}

Dataset2d make_dataset(const MixtureSpec& spec, int n, double target_proportion,
                       RngStream& rng) {
  spec.validate();
  if (n < 0) {
    throw InputError("point count must be non-negative");
  }
  if (!(target_proportion > 0.0 && target_proportion < 1.0)) {
    throw InputError("target proportion must lie strictly between 0 and 1");
  }
  const double w_pos = spec.positive_weight();
  const double w_neg = 1.0 - w_pos;
  if (w_pos <= 0.0 || w_neg <= 0.0) {
    throw InputError(
        "target proportion unachievable: the mixture needs components of "
        "both labels");
  }

  std::vector<std::vector<int>> by_label(2);
  std::vector<std::vector<double>> group_weights(2);
  for (std::size_t i = 0; i < spec.components.size(); ++i) {
    const MixtureComponent& comp = spec.components[i];
    by_label[comp.property_label].push_back(static_cast<int>(i));
    group_weights[comp.property_label].push_back(
        comp.weight / (comp.property_label == 1 ? w_pos : w_neg));
  }
  std::vector<std::vector<Eigen::Matrix2d>> chol(2);
  for (int g = 0; g < 2; ++g) {
    for (int idx : by_label[g]) {
      chol[g].push_back(
          Eigen::LLT<Eigen::Matrix2d>(spec.components[idx].cov).matrixL());
    }
  }

  Dataset2d out;
  out.points.resize(n, 2);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int label = rng.uniform() < target_proportion ? 1 : 0;
    const Eigen::VectorXd probs = Eigen::Map<const Eigen::VectorXd>(
        group_weights[label].data(),
        static_cast<Eigen::Index>(group_weights[label].size()));
    const int pick = sample_categorical(probs, rng);
    const MixtureComponent& comp = spec.components[by_label[label][pick]];
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    out.points.row(i) = (comp.mean + chol[label][pick] * z).transpose();
    out.labels[i] = label;
  }
  return out;
}

Eigen::VectorXi assign_components(const MixtureSpec& spec,
                                  const Eigen::MatrixXd& points) {
  spec.validate();
  if (points.cols() != 2) {
    throw InputError("points must be two-dimensional");
  }
  Eigen::VectorXi assignment(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < spec.components.size(); ++c) {
      const double d =
          (points.row(i).transpose() - spec.components[c].mean).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    assignment[i] = arg;
  }
  return assignment;
}

Eigen::VectorXd component_fractions(const MixtureSpec& spec,
                                    const Eigen::MatrixXd& points) {
  if (points.rows() == 0) {
    throw InputError("cannot compute fractions of an empty point set");
  }
  const Eigen::VectorXi assignment = assign_components(spec, points);
  Eigen::VectorXd fractions =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.components.size()));
  for (Eigen::Index i = 0; i < assignment.size(); ++i) {
    fractions[assignment[i]] += 1.0;
  }
  return fractions / static_cast<double>(points.rows());
}

Eigen::VectorXd PropertyClassifier::score(const Eigen::MatrixXd& points) const {
  const Eigen::MatrixXd logits = mlp.forward(points);
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[i] = sigmoid(logits(i, 0));
  }
  return out;
}

Eigen::VectorXi PropertyClassifier::predict(const Eigen::MatrixXd& points) const {
  const Eigen::VectorXd s = score(points);
  Eigen::VectorXi out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    out[i] = s[i] > threshold ? 1 : 0;
  }
  return out;
}

double classifier_accuracy(const PropertyClassifier& classifier,
                           const Eigen::MatrixXd& points,
                           const Eigen::VectorXi& labels) {
  if (points.rows() == 0 || points.rows() != labels.size()) {
    throw InputError("accuracy needs one label per point");
  }
  const Eigen::VectorXi pred = classifier.predict(points);
  double hits = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    hits += pred[i] == labels[i] ? 1.0 : 0.0;
  }
  return hits / static_cast<double>(labels.size());
}

PropertyClassifier train_property_classifier(const Eigen::MatrixXd& points,
                                             const Eigen::VectorXi& labels,
                                             const ClassifierConfig& config,
                                             RngStream& rng) {
  const int n = static_cast<int>(points.rows());
  if (n == 0 || labels.size() != n) {
    throw InputError("classifier training needs one label per point");
  }
  const int positives = (labels.array() == 1).count();
  if (positives == 0 || positives == n) {
    throw InputError("degenerate single-class shadow set");
  }
  if (config.epochs < 1) {
    throw ConfigError("classifier epochs must be positive");
  }

  PropertyClassifier classifier;
  std::vector<int> dims;
  dims.push_back(static_cast<int>(points.cols()));
  dims.insert(dims.end(), config.hidden_dims.begin(),
              config.hidden_dims.end());
  dims.push_back(1);
  classifier.mlp = Mlp(dims, Activation::kSilu, rng);

  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamOptimizer adam(classifier.mlp, adam_config);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, std::min(config.batch_size, n));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += batch) {
      const int bs = std::min(batch, n - start);
      Eigen::MatrixXd xb(bs, points.cols());
      Eigen::VectorXd yb(bs);
      for (int r = 0; r < bs; ++r) {
        xb.row(r) = points.row(order[start + r]);
        yb[r] = static_cast<double>(labels[order[start + r]]);
      }
      Mlp::ForwardCache cache;
      const Eigen::MatrixXd logits = classifier.mlp.forward(xb, cache);
      Eigen::MatrixXd dout(bs, 1);
      for (int r = 0; r < bs; ++r) {
        dout(r, 0) = (sigmoid(logits(r, 0)) - yb[r]) / bs;
      }
      adam.step(classifier.mlp, classifier.mlp.backward(cache, dout));
    }
  }
  classifier.train_accuracy = classifier_accuracy(classifier, points, labels);
  return classifier;
}

ContinuousModel train_continuous_model(const Eigen::MatrixXd& points,
                                       ScheduleKind kind,
                                       const ContTrainConfig& config,
                                       RngStream& rng) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) {
    throw InputError("cannot train on an empty point set");
  }
  if (config.epochs < 1) {
    throw ConfigError("epochs must be positive");
  }

  ContinuousModel model;
  PredictionTarget target = PredictionTarget::kScore;
  switch (kind) {
    case ScheduleKind::kVpDiscrete:
      model.schedule = NoiseSchedule::vp_discrete(config.steps);
      target = PredictionTarget::kNoise;
      break;
    case ScheduleKind::kVeDiscrete:
      model.schedule = NoiseSchedule::ve_discrete(config.steps);
      break;
    case ScheduleKind::kVpContinuous:
      model.schedule = NoiseSchedule::vp_continuous();
      break;
    case ScheduleKind::kVeContinuous:
      model.schedule = NoiseSchedule::ve_continuous();
      break;
  }
  const double max_time =
      model.schedule.is_discrete() ? static_cast<double>(model.schedule.steps)
                                   : 1.0;
  model.net = DenoiserNet(static_cast<int>(points.cols()), config.hidden_dims,
                          config.time_embed_dim, max_time, target, rng);

  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamOptimizer adam(model.net.mlp, adam_config);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, std::min(config.batch_size, n));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += batch) {
      const int bs = std::min(batch, n - start);
      Eigen::MatrixXd xb(bs, points.cols());
      for (int r = 0; r < bs; ++r) {
        xb.row(r) = points.row(order[start + r]);
      }
      LossResult result;
      switch (kind) {
        case ScheduleKind::kVpDiscrete:
          result = ddpm_loss(model.net, xb, model.schedule, rng);
          break;
        case ScheduleKind::kVeDiscrete:
          result = smld_loss(model.net, xb, model.schedule, rng);
          break;
        default:
          result = ssde_loss(model.net, xb, model.schedule, rng);
          break;
      }
      if (!std::isfinite(result.loss)) {
        throw TrainingError("training loss diverged at epoch " +
                            std::to_string(epoch));
      }
      adam.step(model.net.mlp, result.grads);
      epoch_loss += result.loss * bs;
    }
    model.loss_history.push_back(epoch_loss / n);
  }
  return model;
}

}  // namespace prisampler
