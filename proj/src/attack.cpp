#include "prisampler/attack.hpp"

#include <cmath>
#include <cstdio>

#include "prisampler/errors.hpp"

namespace prisampler {

namespace {

std::string format_value(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", value);
  return buf;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

int category_index(const Column& column, const std::string& category) {
  for (std::size_t i = 0; i < column.categories.size(); ++i) {
    if (column.categories[i] == category) {
      return static_cast<int>(i);
    }
  }
  throw InputError("column '" + column.name + "' has no category '" +
                   category + "'");
}

}  // namespace

PropertyPredicate PropertyPredicate::categorical_equals(
    const std::string& column, const std::string& category) {
  PropertyPredicate pred;
  pred.kind = PredicateKind::kCategoricalEquals;
  pred.column = column;
  pred.category = category;
  pred.id = column + "==" + category;
  return pred;
}

PropertyPredicate PropertyPredicate::categorical_one_vs_rest(
    const std::string& column, const std::string& category, int arity) {
  PropertyPredicate pred;
  pred.kind = PredicateKind::kCategoricalOneVsRest;
  pred.column = column;
  pred.category = category;
  pred.arity = arity;
  pred.id = column + "==" + category + "|rest";
  return pred;
}

PropertyPredicate PropertyPredicate::numeric_less_than(
    const std::string& column, double threshold) {
  PropertyPredicate pred;
  pred.kind = PredicateKind::kNumericLessThan;
  pred.column = column;
  pred.threshold = threshold;
  pred.id = column + "<" + format_value(threshold);
  return pred;
}

PropertyPredicate PropertyPredicate::numeric_range(const std::string& column,
                                                   double lo, double hi) {
  PropertyPredicate pred;
  pred.kind = PredicateKind::kNumericRange;
  pred.column = column;
  pred.lo = lo;
  pred.hi = hi;
  pred.id = column + " in [" + format_value(lo) + "," + format_value(hi) + ")";
  return pred;
}

PropertyPredicate PropertyPredicate::classifier_based(
    const PropertyClassifier& classifier) {
  PropertyPredicate pred;
  pred.kind = PredicateKind::kClassifierBased;
  pred.classifier = &classifier;
  pred.id = "classifier>0.5";
  return pred;
}

void PropertyPredicate::validate() const {
  if (arity < 2) {
    throw InputError("predicate arity must be at least 2");
  }
  switch (kind) {
    case PredicateKind::kCategoricalEquals:
    case PredicateKind::kCategoricalOneVsRest:
      if (column.empty() || category.empty()) {
        throw InputError("categorical predicates need a column and a category");
      }
      break;
    case PredicateKind::kNumericLessThan:
      if (column.empty()) {
        throw InputError("numeric predicates need a column");
      }
      if (!std::isfinite(threshold)) {
        throw InputError("numeric threshold must be finite");
      }
      break;
    case PredicateKind::kNumericRange:
      if (column.empty()) {
        throw InputError("numeric predicates need a column");
      }
      if (!std::isfinite(lo) || !std::isfinite(hi)) {
        throw InputError("numeric range bounds must be finite");
      }
      if (!(lo < hi)) {
        throw InputError("numeric range needs lo < hi");
      }
      break;
    case PredicateKind::kClassifierBased:
      if (classifier == nullptr) {
        throw InputError("classifier predicate needs an attached classifier");
      }
      break;
  }
}

Eigen::VectorXi PropertyPredicate::evaluate(
    const TabularDataset& samples) const {
  validate();
  if (kind == PredicateKind::kClassifierBased) {
    throw InputError(
        "classifier predicates evaluate continuous points, not tabular rows");
  }
  const int col = samples.schema.column_index(column);
  const Column& col_spec = samples.schema.columns[col];
  const int n = samples.rows();
  Eigen::VectorXi hits(n);

  if (kind == PredicateKind::kCategoricalEquals ||
      kind == PredicateKind::kCategoricalOneVsRest) {
    if (col_spec.kind != ColumnKind::kCategorical) {
      throw InputError("column '" + column + "' is not categorical");
    }
    if (kind == PredicateKind::kCategoricalOneVsRest &&
        arity != static_cast<int>(col_spec.categories.size())) {
      throw InputError("one-vs-rest arity does not match the cardinality of '" +
                       column + "'");
    }
    const double idx = static_cast<double>(category_index(col_spec, category));
    for (int i = 0; i < n; ++i) {
      hits[i] = samples.raw(i, col) == idx ? 1 : 0;
    }
    return hits;
  }

  if (col_spec.kind != ColumnKind::kNumeric) {
    throw InputError("column '" + column + "' is not numeric");
  }
  for (int i = 0; i < n; ++i) {
    const double v = samples.raw(i, col);
    hits[i] = kind == PredicateKind::kNumericLessThan
                  ? (v < threshold ? 1 : 0)
                  : (lo <= v && v < hi ? 1 : 0);
  }
  return hits;
}

Eigen::VectorXi PropertyPredicate::evaluate(
    const Eigen::MatrixXd& points) const {
  validate();
  if (kind != PredicateKind::kClassifierBased) {
    throw InputError("column predicates need tabular rows, not raw points");
  }
  const Eigen::VectorXd scores = classifier->score(points);
  Eigen::VectorXi hits(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    hits[i] = scores[i] > classifier->threshold ? 1 : 0;
  }
  return hits;
}

namespace {

double proportion_from_hits(const Eigen::VectorXi& hits) {
  return static_cast<double>(hits.sum()) / static_cast<double>(hits.size());
}

}  // namespace

double infer_proportion(const TabularDataset& samples,
                        const PropertyPredicate& predicate) {
  if (samples.rows() == 0) {
    throw InputError("cannot infer a proportion from zero samples");
  }
  return proportion_from_hits(predicate.evaluate(samples));
}

double infer_proportion(const Eigen::MatrixXd& points,
                        const PropertyPredicate& predicate) {
  if (points.rows() == 0) {
    throw InputError("cannot infer a proportion from zero samples");
  }
  return proportion_from_hits(predicate.evaluate(points));
}

double abs_difference(double inferred, double real) {
  if (!(inferred >= 0.0 && inferred <= 1.0) ||
      !(real >= 0.0 && real <= 1.0)) {
    throw InputError("proportions live in [0, 1]");
  }
  return std::abs(inferred - real);
}

namespace {

AttackReport finish_report(const PropertyPredicate& predicate, double inferred,
                           int m, std::optional<double> real_proportion,
                           const std::string& model_id,
                           const std::string& sampler_id) {
  AttackReport report;
  report.predicate_id = predicate.id;
  report.model_id = model_id;
  report.sampler_id = sampler_id;
  report.sample_count = m;
  report.inferred = inferred;
  report.real_proportion = real_proportion;
  if (real_proportion.has_value()) {
    report.difference = abs_difference(inferred, *real_proportion);
  }
  return report;
}

std::vector<StabilityPoint> prefix_curve(const Eigen::VectorXi& hits,
                                         const std::vector<int>& counts) {
  std::vector<StabilityPoint> curve;
  curve.reserve(counts.size());
  int running = 0;
  int consumed = 0;
  for (const int m : counts) {
    for (; consumed < m; ++consumed) {
      running += hits[consumed];
    }
    curve.push_back({m, static_cast<double>(running) / m});
  }
  return curve;
}

void check_counts(const std::vector<int>& counts) {
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1 || (i > 0 && counts[i] <= counts[i - 1])) {
      throw InputError("sample counts must be positive and ascending");
    }
  }
}

}  // namespace

AttackReport run_attack(const TabularDataset& samples,
                        const PropertyPredicate& predicate,
                        std::optional<double> real_proportion,
                        const std::string& model_id,
                        const std::string& sampler_id) {
  return finish_report(predicate, infer_proportion(samples, predicate),
                       samples.rows(), real_proportion, model_id, sampler_id);
}

AttackReport run_attack(const Eigen::MatrixXd& points,
                        const PropertyPredicate& predicate,
                        std::optional<double> real_proportion,
                        const std::string& model_id,
                        const std::string& sampler_id) {
  return finish_report(predicate, infer_proportion(points, predicate),
                       static_cast<int>(points.rows()), real_proportion,
                       model_id, sampler_id);
}

std::vector<StabilityPoint> stability_curve(const TabularModel& model,
                                            const PropertyPredicate& predicate,
                                            const std::vector<int>& counts,
                                            RngStream& rng) {
  check_counts(counts);
  if (counts.empty()) {
    return {};
  }
  const TabularDataset samples =
      sample_tabular(model, counts.back(), nullptr, rng);
  return prefix_curve(predicate.evaluate(samples), counts);
}

std::vector<StabilityPoint> stability_curve(const ContinuousModel& model,
                                            const SamplerConfig& sampler,
                                            const PropertyPredicate& predicate,
                                            const std::vector<int>& counts,
                                            RngStream& rng) {
  check_counts(counts);
  if (counts.empty()) {
    return {};
  }
  const NetScoreModel score = model.score_model();
  const Eigen::MatrixXd samples = draw_samples(
      score, model.schedule, counts.back(), sampler, nullptr, rng);
  return prefix_curve(predicate.evaluate(samples), counts);
}

double planted_proportion(const TabularGenSpec& spec,
                          const PropertyPredicate& predicate) {
  predicate.validate();
  spec.validate();
  if (predicate.kind == PredicateKind::kClassifierBased) {
    throw InputError("classifier predicates have no closed-form proportion");
  }
  const int col = spec.schema.column_index(predicate.column);
  const Column& col_spec = spec.schema.columns[col];
  const std::size_t n_labels = spec.label_probs.size();

  if (predicate.kind == PredicateKind::kCategoricalEquals ||
      predicate.kind == PredicateKind::kCategoricalOneVsRest) {
    if (col_spec.kind != ColumnKind::kCategorical) {
      throw InputError("column '" + predicate.column + "' is not categorical");
    }
    const int idx = category_index(col_spec, predicate.category);
    if (predicate.column == spec.label_column) {
      return spec.label_probs[idx];
    }
    const auto& rows = spec.cat_given_label.at(predicate.column);
    double total = 0.0;
    for (std::size_t l = 0; l < n_labels; ++l) {
      total += spec.label_probs[l] * rows[l][idx];
    }
    return total;
  }

  if (col_spec.kind != ColumnKind::kNumeric) {
    throw InputError("column '" + predicate.column + "' is not numeric");
  }
  const auto& moments = spec.num_given_label.at(predicate.column);
  double total = 0.0;
  for (std::size_t l = 0; l < n_labels; ++l) {
    const double mu = moments[l].first;
    const double sigma = moments[l].second;
    if (predicate.kind == PredicateKind::kNumericLessThan) {
      total += spec.label_probs[l] *
               normal_cdf((predicate.threshold - mu) / sigma);
    } else {
      total += spec.label_probs[l] * (normal_cdf((predicate.hi - mu) / sigma) -
                                      normal_cdf((predicate.lo - mu) / sigma));
    }
  }
  return total;
}

}  // namespace prisampler
