#include "prisampler/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

constexpr double kCovarianceRidge = 1e-6;
constexpr double kMinSplitGain = 1e-12;

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

using Tree = std::vector<TreeNode>;

double predict_tree(const Tree& tree, const Eigen::MatrixXd& features,
                    int row) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = features(row, tree[node].feature) < tree[node].threshold
               ? tree[node].left
               : tree[node].right;
  }
  return tree[node].value;
}

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Level-wise depth-limited regression tree on Newton gradients. Split gain is
// the standard second-order objective reduction with an L2 leaf ridge.
Tree fit_tree(const Eigen::MatrixXd& features,
              const std::vector<std::vector<int>>& order,
              const std::vector<double>& grad, const std::vector<double>& hess,
              std::vector<int>& node_of, const GbdtConfig& config) {
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  Tree tree(1);
  std::fill(node_of.begin(), node_of.end(), 0);
  std::vector<int> frontier = {0};

  for (int level = 0; level < config.depth && !frontier.empty(); ++level) {
    const int max_id = static_cast<int>(tree.size());
    std::vector<double> total_g(max_id, 0.0);
    std::vector<double> total_h(max_id, 0.0);
    std::vector<char> active(max_id, 0);
    for (const int node : frontier) {
      active[node] = 1;
    }
    for (int i = 0; i < n; ++i) {
      const int node = node_of[i];
      if (active[node]) {
        total_g[node] += grad[i];
        total_h[node] += hess[i];
      }
    }

    std::vector<SplitChoice> best(max_id);
    std::vector<double> left_g(max_id);
    std::vector<double> left_h(max_id);
    std::vector<double> prev_value(max_id);
    std::vector<char> has_prev(max_id);
    for (int f = 0; f < d; ++f) {
      std::fill(left_g.begin(), left_g.end(), 0.0);
      std::fill(left_h.begin(), left_h.end(), 0.0);
      std::fill(has_prev.begin(), has_prev.end(), 0);
      for (const int i : order[f]) {
        const int node = node_of[i];
        if (!active[node]) {
          continue;
        }
        const double value = features(i, f);
        if (has_prev[node] && value > prev_value[node]) {
          const double lg = left_g[node];
          const double lh = left_h[node];
          const double rg = total_g[node] - lg;
          const double rh = total_h[node] - lh;
          const double gain =
              lg * lg / (lh + config.leaf_ridge) +
              rg * rg / (rh + config.leaf_ridge) -
              total_g[node] * total_g[node] /
                  (total_h[node] + config.leaf_ridge);
          if (gain > best[node].gain + kMinSplitGain) {
            best[node].gain = gain;
            best[node].feature = f;
            best[node].threshold = 0.5 * (prev_value[node] + value);
          }
        }
        left_g[node] += grad[i];
        left_h[node] += hess[i];
        prev_value[node] = value;
        has_prev[node] = 1;
      }
    }

    std::vector<int> next_frontier;
    for (const int node : frontier) {
      if (best[node].feature < 0) {
        tree[node].value = -config.learning_rate * total_g[node] /
                           (total_h[node] + config.leaf_ridge);
        continue;
      }
      tree[node].feature = best[node].feature;
      tree[node].threshold = best[node].threshold;
      tree[node].left = static_cast<int>(tree.size());
      tree.emplace_back();
      tree[node].right = static_cast<int>(tree.size());
      tree.emplace_back();
      next_frontier.push_back(tree[node].left);
      next_frontier.push_back(tree[node].right);
    }
    if (!next_frontier.empty()) {
      for (int i = 0; i < n; ++i) {
        const int node = node_of[i];
        if (tree[node].feature >= 0) {
          node_of[i] = features(i, tree[node].feature) < tree[node].threshold
                           ? tree[node].left
                           : tree[node].right;
        }
      }
    }
    frontier = std::move(next_frontier);
  }

  if (!frontier.empty()) {
    std::vector<double> total_g(tree.size(), 0.0);
    std::vector<double> total_h(tree.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      total_g[node_of[i]] += grad[i];
      total_h[node_of[i]] += hess[i];
    }
    for (const int node : frontier) {
      tree[node].value = -config.learning_rate * total_g[node] /
                         (total_h[node] + config.leaf_ridge);
    }
  }
  return tree;
}

struct Booster {
  double base_score = 0.0;
  std::vector<Tree> trees;

  double score(const Eigen::MatrixXd& features, int row) const {
    double total = base_score;
    for (const Tree& tree : trees) {
      total += predict_tree(tree, features, row);
    }
    return total;
  }
};

Booster fit_booster(const Eigen::MatrixXd& features,
                    const std::vector<std::vector<int>>& order,
                    const std::vector<double>& targets,
                    const GbdtConfig& config) {
  const int n = static_cast<int>(features.rows());
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  const double clamped = std::clamp(mean, 1e-6, 1.0 - 1e-6);

  Booster booster;
  booster.base_score = std::log(clamped / (1.0 - clamped));
  std::vector<double> margin(n, booster.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<int> node_of(n, 0);
  for (int round = 0; round < config.rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-margin[i]));
      grad[i] = p - targets[i];
      hess[i] = std::max(p * (1.0 - p), 1e-12);
    }
    Tree tree = fit_tree(features, order, grad, hess, node_of, config);
    for (int i = 0; i < n; ++i) {
      margin[i] += tree[node_of[i]].value;
    }
    booster.trees.push_back(std::move(tree));
  }
  return booster;
}

void check_same_schema(const TabularSchema& a, const TabularSchema& b) {
  bool same = a.columns.size() == b.columns.size();
  for (std::size_t i = 0; same && i < a.columns.size(); ++i) {
    same = a.columns[i].name == b.columns[i].name &&
           a.columns[i].kind == b.columns[i].kind &&
           a.columns[i].categories == b.columns[i].categories;
  }
  if (!same) {
    throw InputError("synthetic and real test rows have different schemas");
  }
}

// Trees consume numeric columns directly and categorical columns as one-hot
// indicator features; the label column is excluded.
Eigen::MatrixXd classifier_features(const TabularDataset& data,
                                    int label_index) {
  int width = 0;
  for (std::size_t c = 0; c < data.schema.columns.size(); ++c) {
    if (static_cast<int>(c) == label_index) {
      continue;
    }
    const Column& column = data.schema.columns[c];
    width += column.kind == ColumnKind::kNumeric
                 ? 1
                 : static_cast<int>(column.categories.size());
  }
  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(data.rows(), width);
  int offset = 0;
  for (std::size_t c = 0; c < data.schema.columns.size(); ++c) {
    if (static_cast<int>(c) == label_index) {
      continue;
    }
    const Column& column = data.schema.columns[c];
    if (column.kind == ColumnKind::kNumeric) {
      features.col(offset) = data.raw.col(static_cast<int>(c));
      ++offset;
    } else {
      for (int i = 0; i < data.rows(); ++i) {
        const int category =
            static_cast<int>(data.raw(i, static_cast<int>(c)));
        features(i, offset + category) = 1.0;
      }
      offset += static_cast<int>(column.categories.size());
    }
  }
  return features;
}

}  // namespace

double f1_train_synth_test_real(const TabularDataset& synthetic,
                                const TabularDataset& real_test,
                                const std::string& label_column,
                                const GbdtConfig& config) {
  check_same_schema(synthetic.schema, real_test.schema);
  const int label = synthetic.schema.column_index(label_column);
  const Column& column = synthetic.schema.columns[label];
  if (column.kind != ColumnKind::kCategorical) {
    throw InputError("label column '" + label_column +
                     "' must be categorical");
  }
  if (synthetic.rows() < 1 || real_test.rows() < 1) {
    throw InputError("F1 needs non-empty synthetic and real test rows");
  }
  if (config.rounds < 1 || config.depth < 1 ||
      !(config.learning_rate > 0.0) || !(config.leaf_ridge >= 0.0)) {
    throw InputError("invalid boosting configuration");
  }

  const int cardinality = static_cast<int>(column.categories.size());
  std::vector<char> present(cardinality, 0);
  for (int i = 0; i < synthetic.rows(); ++i) {
    present[static_cast<int>(synthetic.raw(i, label))] = 1;
  }
  std::vector<int> classes;
  for (int c = 0; c < cardinality; ++c) {
    if (present[c]) {
      classes.push_back(c);
    }
  }

  const Eigen::MatrixXd train = classifier_features(synthetic, label);
  const Eigen::MatrixXd test = classifier_features(real_test, label);
  const int n = synthetic.rows();
  const int d = static_cast<int>(train.cols());
  std::vector<std::vector<int>> order(d);
  for (int f = 0; f < d; ++f) {
    order[f].resize(n);
    std::iota(order[f].begin(), order[f].end(), 0);
    std::sort(order[f].begin(), order[f].end(), [&](int a, int b) {
      if (train(a, f) != train(b, f)) {
        return train(a, f) < train(b, f);
      }
      return a < b;
    });
  }

  std::vector<Booster> boosters;
  for (const int cls : classes) {
    std::vector<double> targets(n);
    for (int i = 0; i < n; ++i) {
      targets[i] = synthetic.raw(i, label) == cls ? 1.0 : 0.0;
    }
    boosters.push_back(fit_booster(train, order, targets, config));
  }

  const int m = real_test.rows();
  std::vector<int> predicted(m);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    double best_score = boosters[0].score(test, i);
    for (std::size_t k = 1; k < boosters.size(); ++k) {
      const double score = boosters[k].score(test, i);
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(k);
      }
    }
    predicted[i] = classes[best];
  }

  double f1_sum = 0.0;
  for (const int cls : classes) {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    for (int i = 0; i < m; ++i) {
      const bool truth = real_test.raw(i, label) == cls;
      const bool hit = predicted[i] == cls;
      tp += truth && hit ? 1 : 0;
      fp += !truth && hit ? 1 : 0;
      fn += truth && !hit ? 1 : 0;
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp)
                                         : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn)
                                      : 0.0;
    f1_sum += precision + recall > 0.0
                  ? 2.0 * precision * recall / (precision + recall)
                  : 0.0;
  }
  return f1_sum / static_cast<double>(classes.size());
}

double frechet_distance(const Eigen::MatrixXd& real,
                        const Eigen::MatrixXd& generated) {
  const int d = static_cast<int>(real.cols());
  if (d == 0 || generated.cols() != d) {
    throw InputError("feature sets must share a non-empty dimension");
  }
  if (real.rows() < d + 1 || generated.rows() < d + 1) {
    throw InputError("Frechet distance needs at least dim+1 rows per set");
  }
  if (!real.allFinite() || !generated.allFinite()) {
    throw InputError("feature sets must be finite");
  }

  const auto moments = [d](const Eigen::MatrixXd& x) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    cov += kCovarianceRidge * Eigen::MatrixXd::Identity(d, d);
    return std::make_pair(mean, cov);
  };
  const auto [mean1, cov1] = moments(real);
  const auto [mean2, cov2] = moments(generated);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> first(cov1);
  if (first.info() != Eigen::Success) {
    throw SolverError("covariance eigendecomposition failed");
  }
  const Eigen::VectorXd roots =
      first.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt1 = first.eigenvectors() * roots.asDiagonal() *
                                first.eigenvectors().transpose();

  Eigen::MatrixXd product = sqrt1 * cov2 * sqrt1;
  product = 0.5 * (product + product.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> second(product);
  if (second.info() != Eigen::Success) {
    throw SolverError("symmetrized product eigendecomposition failed");
  }
  const double trace_sqrt =
      second.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double distance = (mean1 - mean2).squaredNorm() + cov1.trace() +
                          cov2.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(distance)) {
    std::ostringstream msg;
    msg << "Frechet distance is not finite; covariance eigenvalue ranges ["
        << first.eigenvalues().minCoeff() << ", "
        << first.eigenvalues().maxCoeff() << "] and ["
        << second.eigenvalues().minCoeff() << ", "
        << second.eigenvalues().maxCoeff() << "]";
    throw SolverError(msg.str());
  }
  return std::max(0.0, distance);
}

}  // namespace prisampler
