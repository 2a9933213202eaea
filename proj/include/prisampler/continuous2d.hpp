#ifndef PRISAMPLER_CONTINUOUS2D_HPP
#define PRISAMPLER_CONTINUOUS2D_HPP

#include <Eigen/Dense>
#include <vector>

#include "prisampler/mlp.hpp"
#include "prisampler/rng.hpp"
#include "prisampler/samplers.hpp"
#include "prisampler/schedule.hpp"

namespace prisampler {

// Two-dimensional Gaussian mixture whose hidden binary property is the
// component label. Stands in for image datasets with a planted attribute.
struct MixtureComponent {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  int property_label = 0;
  double weight = 1.0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  void validate() const;
  double positive_weight() const;

  // Two unit-covariance blobs at (+2, 0) labeled positive and (-2, 0)
  // labeled negative, equally weighted.
  static MixtureSpec separated_pair();
};

struct Dataset2d {
  Eigen::MatrixXd points;
  Eigen::VectorXi labels;

  int size() const { return static_cast<int>(points.rows()); }
};

// Draws n points with the property-positive fraction planted at
// target_proportion (componentwise weights are rescaled per label group).
// Callers keep shadow and target sets disjoint by passing split streams.
Dataset2d make_dataset(const MixtureSpec& spec, int n, double target_proportion,
                       RngStream& rng);

// Nearest-component assignment (Euclidean distance to component means).
Eigen::VectorXi assign_components(const MixtureSpec& spec,
                                  const Eigen::MatrixXd& points);
Eigen::VectorXd component_fractions(const MixtureSpec& spec,
                                    const Eigen::MatrixXd& points);

struct ClassifierConfig {
  std::vector<int> hidden_dims = {32};
  int batch_size = 128;
  double lr = 1e-2;
  int epochs = 100;
};

// Small MLP with a sigmoid head; scores above 0.5 predict the property.
struct PropertyClassifier {
  Mlp mlp;
  double threshold = 0.5;
  double train_accuracy = 0.0;

  Eigen::VectorXd score(const Eigen::MatrixXd& points) const;
  Eigen::VectorXi predict(const Eigen::MatrixXd& points) const;
};

PropertyClassifier train_property_classifier(const Eigen::MatrixXd& points,
                                             const Eigen::VectorXi& labels,
                                             const ClassifierConfig& config,
                                             RngStream& rng);

double classifier_accuracy(const PropertyClassifier& classifier,
                           const Eigen::MatrixXd& points,
                           const Eigen::VectorXi& labels);

struct ContTrainConfig {
  std::vector<int> hidden_dims = {64, 64};
  int time_embed_dim = 32;
  int batch_size = 256;
  double lr = 1e-3;
  int epochs = 100;
  int steps = 1000;
};

struct ContinuousModel {
  NoiseSchedule schedule;
  DenoiserNet net;
  std::vector<double> loss_history;

  NetScoreModel score_model() const { return NetScoreModel(net, schedule); }
};

// Trains the denoiser for the requested formulation: noise regression on
// discrete VP, weighted score matching on discrete VE, and the continuous
// analogue on the SDE kinds.
ContinuousModel train_continuous_model(const Eigen::MatrixXd& points,
                                       ScheduleKind kind,
                                       const ContTrainConfig& config,
                                       RngStream& rng);

}  // namespace prisampler

#endif  // PRISAMPLER_CONTINUOUS2D_HPP
