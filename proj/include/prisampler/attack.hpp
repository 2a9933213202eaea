#ifndef PRISAMPLER_ATTACK_HPP
#define PRISAMPLER_ATTACK_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "prisampler/continuous2d.hpp"
#include "prisampler/rng.hpp"
#include "prisampler/samplers.hpp"
#include "prisampler/tabular.hpp"

namespace prisampler {

enum class PredicateKind {
  kCategoricalEquals,
  kCategoricalOneVsRest,
  kNumericLessThan,
  kNumericRange,
  kClassifierBased,
};

// Boolean property of one sample: a direct column read for tabular rows, a
// thresholded classifier score for 2D points. `arity` is the number of
// classes the property partitions samples into (2 unless one-vs-rest over a
// wider column). Numeric ranges are half-open [lo, hi); classifier scores at
// exactly the threshold count as the complement.
struct PropertyPredicate {
  PredicateKind kind = PredicateKind::kCategoricalEquals;
  std::string id;
  std::string column;
  std::string category;
  double threshold = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  const PropertyClassifier* classifier = nullptr;
  int arity = 2;

  static PropertyPredicate categorical_equals(const std::string& column,
                                              const std::string& category);
  static PropertyPredicate categorical_one_vs_rest(const std::string& column,
                                                   const std::string& category,
                                                   int arity);
  static PropertyPredicate numeric_less_than(const std::string& column,
                                             double threshold);
  static PropertyPredicate numeric_range(const std::string& column, double lo,
                                         double hi);
  static PropertyPredicate classifier_based(const PropertyClassifier& classifier);

  void validate() const;
  Eigen::VectorXi evaluate(const TabularDataset& samples) const;
  Eigen::VectorXi evaluate(const Eigen::MatrixXd& points) const;
};

double infer_proportion(const TabularDataset& samples,
                        const PropertyPredicate& predicate);
double infer_proportion(const Eigen::MatrixXd& points,
                        const PropertyPredicate& predicate);

double abs_difference(double inferred, double real);

struct AttackReport {
  std::string predicate_id;
  std::string model_id;
  std::string sampler_id;
  int sample_count = 0;
  double inferred = 0.0;
  std::optional<double> real_proportion;
  std::optional<double> difference;
};

AttackReport run_attack(const TabularDataset& samples,
                        const PropertyPredicate& predicate,
                        std::optional<double> real_proportion,
                        const std::string& model_id,
                        const std::string& sampler_id);
AttackReport run_attack(const Eigen::MatrixXd& points,
                        const PropertyPredicate& predicate,
                        std::optional<double> real_proportion,
                        const std::string& model_id,
                        const std::string& sampler_id);

struct StabilityPoint {
  int m = 0;
  double inferred = 0.0;
};

// Estimates over nested prefixes of a single generated stream, so each count
// strictly extends the previous one.
std::vector<StabilityPoint> stability_curve(const TabularModel& model,
                                            const PropertyPredicate& predicate,
                                            const std::vector<int>& counts,
                                            RngStream& rng);
std::vector<StabilityPoint> stability_curve(const ContinuousModel& model,
                                            const SamplerConfig& sampler,
                                            const PropertyPredicate& predicate,
                                            const std::vector<int>& counts,
                                            RngStream& rng);

// Closed-form probability of a column predicate under the synthetic tabular
// generator: mixes the per-label category rows or Gaussian tails over the
// label distribution.
double planted_proportion(const TabularGenSpec& spec,
                          const PropertyPredicate& predicate);

}  // namespace prisampler

#endif  // PRISAMPLER_ATTACK_HPP
