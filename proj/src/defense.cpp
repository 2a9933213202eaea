#include "prisampler/defense.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

constexpr int kMinPairedStates = 50;
constexpr double kWeakSeparatorAccuracy = 0.6;
constexpr double kParallelCosine = 1.0 - 1e-6;
constexpr double kDefaultAlphaMargins = 3.0;

void check_binary_labels(const Eigen::VectorXi& labels,
                         const std::string& what) {
  int positives = 0;
  for (int i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw InputError(what + " labels must be 0 or 1");
    }
    positives += labels[i];
  }
  if (positives == 0 || positives == labels.size()) {
    throw InputError("degenerate training set for SVM: every " + what +
                     " sample falls on the same side of the property");
  }
}

StepInterceptor capture_interceptor(int t, Eigen::MatrixXd* states,
                                    std::shared_ptr<std::vector<char>> hit) {
  StepInterceptor interceptor;
  interceptor.target_steps = {t};
  interceptor.transform = [states, hit](const Eigen::VectorXd& x, int,
                                        int chain) {
    states->row(chain) = x.transpose();
    (*hit)[chain] = 1;
    return x;
  };
  return interceptor;
}

void check_all_hit(const std::vector<char>& hit, int t) {
  for (const char h : hit) {
    if (!h) {
      throw InputError("sampler never produced a state at step " +
                       std::to_string(t));
    }
  }
}

struct ClassPlan {
  Eigen::VectorXd normal;
  double alpha = 0.0;
};

// Resolved per-property shift schedule: which step fires, which class each
// chain is steered toward, and the signed strength of the push.
struct PropertyPlan {
  int step = 0;
  bool binary = false;
  std::vector<ClassPlan> classes;
  std::vector<int> sides;
};

std::vector<PropertyPlan> build_plans(
    const std::vector<Hyperplane>& hyperplanes, const DefenseConfig& config,
    int m, int dim, RngStream& rng) {
  config.validate();
  std::unordered_map<std::string, const Hyperplane*> by_id;
  for (const Hyperplane& plane : hyperplanes) {
    if (!by_id.emplace(plane.property_id, &plane).second) {
      throw ConfigError("duplicate hyperplane for '" + plane.property_id +
                        "'");
    }
  }

  std::vector<PropertyPlan> plans;
  for (const DefendedProperty& prop : config.properties) {
    PropertyPlan plan;
    plan.binary = prop.class_ids.size() == 1;

    bool first = true;
    for (const std::string& class_id : prop.class_ids) {
      const auto it = by_id.find(class_id);
      if (it == by_id.end()) {
        throw ConfigError("no hyperplane fitted for '" + class_id + "'");
      }
      const Hyperplane& plane = *it->second;
      plane.validate();
      if (plane.normal.size() != dim) {
        throw InputError("hyperplane for '" + class_id + "' lives in " +
                         std::to_string(plane.normal.size()) +
                         " dimensions but the model state has " +
                         std::to_string(dim));
      }
      if (first) {
        plan.step = plane.step;
        first = false;
      } else if (plane.step != plan.step) {
        throw ConfigError("hyperplanes for '" + prop.property_id +
                          "' were fitted at different steps");
      }
      ClassPlan cls;
      cls.normal = plane.normal;
      cls.alpha = prop.alpha.value_or(kDefaultAlphaMargins * plane.margin);
      plan.classes.push_back(std::move(cls));
    }
    if (prop.step && *prop.step != plan.step) {
      throw ConfigError("hyperplane for '" + prop.property_id +
                        "' was fitted at step " + std::to_string(plan.step) +
                        " but the config requests step " +
                        std::to_string(*prop.step));
    }

    std::vector<double> gammas = prop.gammas;
    if (plan.binary) {
      gammas = {prop.gammas[0], 1.0 - prop.gammas[0]};
    }
    plan.sides = stratified_assignment(gammas, m, rng);
    plans.push_back(std::move(plan));
  }
  return plans;
}

StepInterceptor shift_interceptor(
    std::shared_ptr<const std::vector<PropertyPlan>> plans) {
  StepInterceptor interceptor;
  for (const PropertyPlan& plan : *plans) {
    interceptor.target_steps.insert(plan.step);
  }
  interceptor.transform = [plans](const Eigen::VectorXd& x, int step,
                                  int chain) {
    Eigen::VectorXd out = x;
    std::vector<Eigen::VectorXd> applied;
    for (const PropertyPlan& plan : *plans) {
      if (plan.step != step) {
        continue;
      }
      const int side = plan.sides[chain];
      Eigen::VectorXd direction;
      double alpha = 0.0;
      if (plan.binary) {
        direction = plan.classes[0].normal;
        alpha = side == 0 ? plan.classes[0].alpha : -plan.classes[0].alpha;
      } else {
        direction = plan.classes[side].normal;
        alpha = plan.classes[side].alpha;
      }
      for (const Eigen::VectorXd& prev : applied) {
        direction -= direction.dot(prev) * prev;
      }
      const double norm = direction.norm();
      if (norm < 1e-6) {
        throw InputError("entangled properties; cannot orthogonalize");
      }
      direction /= norm;
      out += alpha * direction;
      applied.push_back(std::move(direction));
    }
    return out;
  };
  return interceptor;
}

}  // namespace

void Hyperplane::validate() const {
  if (normal.size() == 0) {
    throw InputError("hyperplane has an empty normal");
  }
  if (!normal.allFinite() || std::abs(normal.norm() - 1.0) > 1e-9) {
    throw InputError("hyperplane normal must be a unit vector");
  }
  if (!std::isfinite(bias)) {
    throw InputError("hyperplane bias must be finite");
  }
  if (step < 0) {
    throw InputError("hyperplane step must be non-negative");
  }
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw InputError("hyperplane margin must be positive");
  }
  if (property_id.empty()) {
    throw InputError("hyperplane is missing its property id");
  }
}

PairedStates collect_paired_states(const ContinuousModel& model,
                                   const SamplerConfig& sampler, int n, int t,
                                   const PropertyClassifier& labeler,
                                   RngStream& rng) {
  sampler.validate();
  if (n < 1) {
    throw InputError("paired state collection needs a positive sample count");
  }
  if (t < 0) {
    throw InputError("paired state collection needs a non-negative step");
  }
  const NetScoreModel score = model.score_model();
  PairedStates pairs;
  pairs.step = t;
  pairs.states.resize(n, score.dim());
  auto hit = std::make_shared<std::vector<char>>(n, 0);
  const StepInterceptor interceptor =
      capture_interceptor(t, &pairs.states, hit);
  pairs.finals =
      draw_samples(score, model.schedule, n, sampler, &interceptor, rng);
  check_all_hit(*hit, t);
  pairs.labels = labeler.predict(pairs.finals);
  check_binary_labels(pairs.labels, "collected");
  return pairs;
}

PairedStates collect_paired_states(const TabularModel& model, int n, int t,
                                   const PropertyPredicate& predicate,
                                   RngStream& rng) {
  if (n < 1) {
    throw InputError("paired state collection needs a positive sample count");
  }
  if (t < 0) {
    throw InputError("paired state collection needs a non-negative step");
  }
  PairedStates pairs;
  pairs.step = t;
  pairs.states.resize(n, model.codec.encoded_dim);
  auto hit = std::make_shared<std::vector<char>>(n, 0);
  const StepInterceptor interceptor =
      capture_interceptor(t, &pairs.states, hit);
  const TabularDataset finals = sample_tabular(model, n, &interceptor, rng);
  check_all_hit(*hit, t);
  pairs.finals = finals.raw;
  pairs.labels = predicate.evaluate(finals);
  check_binary_labels(pairs.labels, "collected");
  return pairs;
}

Hyperplane fit_hyperplane(const Eigen::MatrixXd& states,
                          const Eigen::VectorXi& labels, int step,
                          const std::string& property_id, RngStream& rng,
                          const SvmConfig& config) {
  const int n = static_cast<int>(states.rows());
  const int d = static_cast<int>(states.cols());
  if (labels.size() != n) {
    throw InputError("paired states and labels have different lengths");
  }
  if (n < kMinPairedStates) {
    throw InputError("too few paired states to fit a separator (need " +
                     std::to_string(kMinPairedStates) + ", got " +
                     std::to_string(n) + ")");
  }
  if (d == 0 || !states.allFinite()) {
    throw InputError("paired states must be finite and non-empty");
  }
  check_binary_labels(labels, "training");
  if (!(config.lambda > 0.0) || config.epochs < 1) {
    throw InputError("SVM needs a positive lambda and at least one epoch");
  }
  if (step < 0) {
    throw InputError("hyperplane step must be non-negative");
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  const double radius = 1.0 / std::sqrt(config.lambda);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::int64_t tau = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (const int i : order) {
      ++tau;
      const double eta = 1.0 / (config.lambda * static_cast<double>(tau));
      const double y = labels[i] == 1 ? 1.0 : -1.0;
      const double f = w.head(d).dot(states.row(i)) + w[d];
      w *= 1.0 - 1.0 / static_cast<double>(tau);
      if (y * f < 1.0) {
        w.head(d) += (eta * y) * states.row(i).transpose();
        w[d] += eta * y;
      }
      const double norm = w.norm();
      if (norm > radius) {
        w *= radius / norm;
      }
    }
  }

  const double normal_norm = w.head(d).norm();
  if (normal_norm < 1e-12) {
    throw TrainingError("SVM collapsed to a zero normal for '" + property_id +
                        "'");
  }

  Hyperplane plane;
  plane.normal = w.head(d) / normal_norm;
  plane.bias = w[d] / normal_norm;
  plane.step = step;
  plane.property_id = property_id;
  plane.margin = 1.0 / normal_norm;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const bool positive = plane.normal.dot(states.row(i)) + plane.bias > 0.0;
    correct += positive == (labels[i] == 1) ? 1 : 0;
  }
  plane.train_accuracy = static_cast<double>(correct) / n;
  if (plane.train_accuracy < kWeakSeparatorAccuracy) {
    std::ostringstream msg;
    msg << "separator for '" << property_id << "' reaches only "
        << plane.train_accuracy << " train accuracy; the property is weakly "
        << "linearly separable at step " << step;
    plane.warnings.push_back(msg.str());
  }
  return plane;
}

Eigen::VectorXd shift(const Eigen::VectorXd& state, const Hyperplane& plane,
                      double alpha) {
  if (state.size() != plane.normal.size()) {
    throw InputError("state and hyperplane dimensions disagree");
  }
  if (!std::isfinite(alpha)) {
    throw InputError("shift strength must be finite");
  }
  return state + alpha * plane.normal;
}

Eigen::MatrixXd shift(const Eigen::MatrixXd& states, const Hyperplane& plane,
                      double alpha) {
  if (states.cols() != plane.normal.size()) {
    throw InputError("state and hyperplane dimensions disagree");
  }
  if (!std::isfinite(alpha)) {
    throw InputError("shift strength must be finite");
  }
  return states.rowwise() + (alpha * plane.normal).transpose();
}

Eigen::VectorXd orthogonalize(const Eigen::VectorXd& h1,
                              const Eigen::VectorXd& h2) {
  if (h1.size() == 0 || h1.size() != h2.size()) {
    throw InputError("hyperplane normals must share a non-empty dimension");
  }
  const double n1 = h1.norm();
  const double n2 = h2.norm();
  if (n1 < 1e-12 || n2 < 1e-12) {
    throw InputError("cannot orthogonalize against a zero normal");
  }
  const Eigen::VectorXd u1 = h1 / n1;
  const double cosine = u1.dot(h2) / n2;
  if (std::abs(cosine) > kParallelCosine) {
    throw InputError("entangled properties; cannot orthogonalize");
  }
  Eigen::VectorXd residual = h2 - h2.dot(u1) * u1;
  return residual / residual.norm();
}

void DefenseConfig::validate() const {
  if (properties.empty()) {
    throw ConfigError("defense config lists no properties");
  }
  std::unordered_map<std::string, int> seen;
  for (const DefendedProperty& prop : properties) {
    if (prop.property_id.empty()) {
      throw InputError("defended property is missing its id");
    }
    if (++seen[prop.property_id] > 1) {
      throw InputError("property '" + prop.property_id +
                       "' is defended twice");
    }
    if (prop.class_ids.empty()) {
      throw InputError("property '" + prop.property_id +
                       "' lists no class hyperplanes");
    }
    if (prop.gammas.size() != prop.class_ids.size()) {
      throw InputError("property '" + prop.property_id + "' lists " +
                       std::to_string(prop.gammas.size()) + " gammas for " +
                       std::to_string(prop.class_ids.size()) + " classes");
    }
    double total = 0.0;
    for (const double gamma : prop.gammas) {
      if (!std::isfinite(gamma) || gamma <= 0.0 || gamma >= 1.0) {
        throw InputError("gamma for '" + prop.property_id +
                         "' must lie strictly between 0 and 1");
      }
      total += gamma;
    }
    if (prop.class_ids.size() > 1 && std::abs(total - 1.0) > 1e-9) {
      throw InputError("one-vs-rest gammas for '" + prop.property_id +
                       "' must sum to 1");
    }
    if (prop.alpha && (!std::isfinite(*prop.alpha) || *prop.alpha <= 0.0)) {
      throw InputError("shift strength for '" + prop.property_id +
                       "' must be positive");
    }
    if (prop.step && *prop.step < 0) {
      throw InputError("defense step for '" + prop.property_id +
                       "' must be non-negative");
    }
  }
}

std::vector<int> stratified_assignment(const std::vector<double>& gammas,
                                       int m, RngStream& rng) {
  if (gammas.empty()) {
    throw InputError("stratified assignment needs at least one side");
  }
  if (m < 0) {
    throw InputError("stratified assignment needs a non-negative count");
  }
  double total = 0.0;
  for (const double gamma : gammas) {
    if (!std::isfinite(gamma) || gamma <= 0.0 || gamma >= 1.0) {
      throw InputError("side fractions must lie strictly between 0 and 1");
    }
    total += gamma;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError("side fractions must sum to 1");
  }

  const int k = static_cast<int>(gammas.size());
  std::vector<int> counts(k);
  std::vector<std::pair<double, int>> remainders(k);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = gammas[i] * m;
    counts[i] = static_cast<int>(std::floor(exact));
    remainders[i] = {exact - counts[i], i};
    assigned += counts[i];
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) {
                return a.first > b.first;
              }
              return a.second < b.second;
            });
  for (int extra = 0; extra < m - assigned; ++extra) {
    ++counts[remainders[extra % k].second];
  }

  std::vector<int> sides;
  sides.reserve(m);
  for (int i = 0; i < k; ++i) {
    sides.insert(sides.end(), counts[i], i);
  }
  rng.shuffle(sides);
  return sides;
}

Eigen::MatrixXd guided_sample(const ContinuousModel& model,
                              const SamplerConfig& sampler,
                              const std::vector<Hyperplane>& hyperplanes,
                              const DefenseConfig& config, int m,
                              RngStream& rng) {
  sampler.validate();
  if (m < 1) {
    throw InputError("guided sampling needs a positive sample count");
  }
  const NetScoreModel score = model.score_model();
  auto plans = std::make_shared<const std::vector<PropertyPlan>>(
      build_plans(hyperplanes, config, m, score.dim(), rng));
  const StepInterceptor interceptor = shift_interceptor(plans);
  return draw_samples(score, model.schedule, m, sampler, &interceptor, rng);
}

TabularDataset guided_sample(const TabularModel& model,
                             const std::vector<Hyperplane>& hyperplanes,
                             const DefenseConfig& config, int m,
                             RngStream& rng) {
  if (m < 1) {
    throw InputError("guided sampling needs a positive sample count");
  }
  auto plans = std::make_shared<const std::vector<PropertyPlan>>(
      build_plans(hyperplanes, config, m, model.codec.encoded_dim, rng));
  const StepInterceptor interceptor = shift_interceptor(plans);
  return sample_tabular(model, m, &interceptor, rng);
}

DropBalanceResult drop_balance_baseline(
    const std::vector<Eigen::VectorXi>& evaluations,
    const std::vector<double>& gammas) {
  const int k = static_cast<int>(evaluations.size());
  if (k == 0) {
    throw InputError("drop balancing needs at least one evaluation vector");
  }
  if (k > 20) {
    throw InputError("drop balancing supports at most 20 joint properties");
  }
  if (static_cast<int>(gammas.size()) != k) {
    throw InputError("drop balancing got " + std::to_string(gammas.size()) +
                     " gammas for " + std::to_string(k) + " properties");
  }
  const int m = static_cast<int>(evaluations[0].size());
  if (m < 1) {
    throw InputError("drop balancing needs a non-empty sample set");
  }
  for (const double gamma : gammas) {
    if (!std::isfinite(gamma) || gamma <= 0.0 || gamma >= 1.0) {
      throw InputError("target fractions must lie strictly between 0 and 1");
    }
  }

  std::vector<int> pos(k, 0);
  std::vector<std::uint32_t> pattern(m, 0);
  for (int p = 0; p < k; ++p) {
    if (evaluations[p].size() != m) {
      throw InputError("evaluation vectors have different lengths");
    }
    for (int i = 0; i < m; ++i) {
      const int v = evaluations[p][i];
      if (v != 0 && v != 1) {
        throw InputError("evaluations must be 0 or 1");
      }
      pos[p] += v;
      pattern[i] |= static_cast<std::uint32_t>(v) << p;
    }
    if (pos[p] == 0 || pos[p] == m) {
      throw InputError("cannot balance: property " + std::to_string(p) +
                       " has an empty side");
    }
  }

  // Samples sharing an evaluation pattern are interchangeable, so the greedy
  // scan works on pattern buckets and always drops the lowest index first.
  const int cells = 1 << k;
  std::vector<std::vector<int>> buckets(cells);
  for (int i = 0; i < m; ++i) {
    buckets[pattern[i]].push_back(i);
  }
  std::vector<std::size_t> head(cells, 0);

  int n = m;
  const auto violation = [&](int p, int count, int size) {
    return std::abs(count - gammas[p] * size);
  };

  while (true) {
    double worst = 0.0;
    int worst_p = -1;
    for (int p = 0; p < k; ++p) {
      const double v = violation(p, pos[p], n);
      if (v > worst + 1e-12) {
        worst = v;
        worst_p = p;
      }
    }
    if (worst_p < 0) {
      break;
    }
    const int over_bit = pos[worst_p] > gammas[worst_p] * n ? 1 : 0;

    int best_cell = -1;
    int best_score = -1;
    for (int cell = 0; cell < cells; ++cell) {
      if (head[cell] >= buckets[cell].size()) {
        continue;
      }
      if (((cell >> worst_p) & 1) != over_bit) {
        continue;
      }
      int score = 0;
      for (int q = 0; q < k; ++q) {
        if (q == worst_p) {
          continue;
        }
        const double drift = pos[q] - gammas[q] * n;
        const int bit = (cell >> q) & 1;
        if ((drift > 1e-12 && bit == 1) || (drift < -1e-12 && bit == 0)) {
          ++score;
        }
      }
      if (score > best_score ||
          (score == best_score &&
           buckets[cell][head[cell]] < buckets[best_cell][head[best_cell]])) {
        best_score = score;
        best_cell = cell;
      }
    }
    if (best_cell < 0) {
      break;
    }

    double next_worst = 0.0;
    for (int q = 0; q < k; ++q) {
      const int bit = (best_cell >> q) & 1;
      next_worst = std::max(next_worst, violation(q, pos[q] - bit, n - 1));
    }
    if (next_worst >= worst - 1e-12) {
      break;
    }
    ++head[best_cell];
    --n;
    for (int q = 0; q < k; ++q) {
      pos[q] -= (best_cell >> q) & 1;
    }
  }

  DropBalanceResult result;
  result.retained.reserve(n);
  std::vector<char> dropped(m, 0);
  for (int cell = 0; cell < cells; ++cell) {
    for (std::size_t j = 0; j < head[cell]; ++j) {
      dropped[buckets[cell][j]] = 1;
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!dropped[i]) {
      result.retained.push_back(i);
    }
  }
  result.drop_fraction = static_cast<double>(m - n) / m;
  return result;
}

double worst_case_drop_bound(const std::vector<double>& proportions) {
  if (proportions.empty()) {
    throw InputError("drop bound needs at least one proportion");
  }
  double product = 1.0;
  for (const double p : proportions) {
    if (!std::isfinite(p) || p <= 0.0 || p >= 0.5) {
      throw InputError("proportions must lie strictly inside (0, 0.5)");
    }
    product *= p;
  }
  return 1.0 - std::ldexp(product, static_cast<int>(proportions.size()));
}

}  // namespace prisampler
