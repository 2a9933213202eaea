#ifndef PRISAMPLER_DEFENSE_HPP
#define PRISAMPLER_DEFENSE_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "prisampler/attack.hpp"
#include "prisampler/continuous2d.hpp"
#include "prisampler/rng.hpp"
#include "prisampler/samplers.hpp"
#include "prisampler/tabular.hpp"

namespace prisampler {

// Linear separator of one property in the diffusion-state space at step t.
// After fitting the normal has unit length and the property-positive side
// satisfies normal . x + bias > 0.
struct Hyperplane {
  Eigen::VectorXd normal;
  double bias = 0.0;
  int step = 0;
  std::string property_id;
  double margin = 0.0;
  double train_accuracy = 0.0;
  std::vector<std::string> warnings;

  void validate() const;
};

// Intermediate states paired with the property label realized by the same
// chain's final sample. `finals` holds those final samples (raw tabular rows
// or 2D points) for diagnostics.
struct PairedStates {
  Eigen::MatrixXd states;
  Eigen::VectorXi labels;
  Eigen::MatrixXd finals;
  int step = 0;
};

PairedStates collect_paired_states(const ContinuousModel& model,
                                   const SamplerConfig& sampler, int n, int t,
                                   const PropertyClassifier& labeler,
                                   RngStream& rng);
PairedStates collect_paired_states(const TabularModel& model, int n, int t,
                                   const PropertyPredicate& predicate,
                                   RngStream& rng);

struct SvmConfig {
  double lambda = 1e-4;
  int epochs = 100;
};

Hyperplane fit_hyperplane(const Eigen::MatrixXd& states,
                          const Eigen::VectorXi& labels, int step,
                          const std::string& property_id, RngStream& rng,
                          const SvmConfig& config = SvmConfig{});

Eigen::VectorXd shift(const Eigen::VectorXd& state, const Hyperplane& plane,
                      double alpha);
Eigen::MatrixXd shift(const Eigen::MatrixXd& states, const Hyperplane& plane,
                      double alpha);

// Removes the h1 component from h2 and renormalizes. Near-parallel inputs
// cannot be separated and are rejected.
Eigen::VectorXd orthogonalize(const Eigen::VectorXd& h1,
                              const Eigen::VectorXd& h2);

// One defended property: a single hyperplane for a binary property (gammas =
// {target fraction of the positive side}) or one hyperplane per class for
// one-vs-rest (gammas sum to 1, positive branch only).
struct DefendedProperty {
  std::string property_id;
  std::vector<std::string> class_ids;
  std::vector<double> gammas;
  std::optional<double> alpha;
  std::optional<int> step;
};

struct DefenseConfig {
  std::vector<DefendedProperty> properties;

  void validate() const;
};

// Exact-count side assignment: counts deviate from gamma * m by less than one
// and the order is shuffled so simultaneous properties stay decorrelated.
std::vector<int> stratified_assignment(const std::vector<double>& gammas,
                                       int m, RngStream& rng);

Eigen::MatrixXd guided_sample(const ContinuousModel& model,
                              const SamplerConfig& sampler,
                              const std::vector<Hyperplane>& hyperplanes,
                              const DefenseConfig& config, int m,
                              RngStream& rng);
TabularDataset guided_sample(const TabularModel& model,
                             const std::vector<Hyperplane>& hyperplanes,
                             const DefenseConfig& config, int m,
                             RngStream& rng);

struct DropBalanceResult {
  std::vector<int> retained;
  double drop_fraction = 0.0;
};

// Baseline defense: discard samples from over-represented sides until every
// predicate's fraction matches its gamma up to integer rounding.
DropBalanceResult drop_balance_baseline(
    const std::vector<Eigen::VectorXi>& evaluations,
    const std::vector<double>& gammas);

double worst_case_drop_bound(const std::vector<double>& proportions);

struct DefenseReport {
  std::string property_id;
  double gamma = 0.0;
  double inferred = 0.0;
  double difference = 0.0;
  std::optional<double> utility_before;
  std::optional<double> utility_after;
};

}  // namespace prisampler

#endif  // PRISAMPLER_DEFENSE_HPP
