#ifndef PRISAMPLER_TABULAR_HPP
#define PRISAMPLER_TABULAR_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "prisampler/mlp.hpp"
#include "prisampler/rng.hpp"
#include "prisampler/samplers.hpp"
#include "prisampler/schedule.hpp"

namespace prisampler {

enum class ColumnKind { kNumeric, kCategorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> categories;
};

// Column layout of a tabular dataset. The `small` tag selects the short
// sampling schedule (100 steps instead of 1000) when a manifest does not
// override it.
struct TabularSchema {
  std::vector<Column> columns;
  bool small = true;

  void validate() const;
  int column_index(const std::string& name) const;
  int num_numeric() const;
  int num_categorical() const;
};

int default_sampling_steps(const TabularSchema& schema);

enum class SplitTag { kTrain, kRealTest };

// Rows hold numeric values directly and categorical values as the index into
// the column's category list.
struct TabularDataset {
  TabularSchema schema;
  Eigen::MatrixXd raw;
  std::vector<SplitTag> split;

  int rows() const { return static_cast<int>(raw.rows()); }
  void validate() const;
  TabularDataset rows_with_tag(SplitTag tag) const;
};

// Reads a headered CSV against the schema. Rows with unparseable numerics,
// unknown categories, or the wrong cell count are skipped; one diagnostic per
// skipped row is appended when `diagnostics` is given.
TabularDataset ingest_csv(const std::string& path, const TabularSchema& schema,
                          std::vector<std::string>* diagnostics = nullptr);

void write_csv(const std::string& path, const TabularDataset& data);

// Maps raw rows to the model space: standardized numeric block first, then
// one-hot blocks in schema order. Decoding inverts the standardization and
// takes the argmax of each one-hot block.
struct TabularCodec {
  std::vector<int> numeric_cols;
  std::vector<int> categorical_cols;
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  std::vector<int> cat_offsets;
  std::vector<int> cat_cards;
  int encoded_dim = 0;

  static TabularCodec fit(const TabularDataset& data);

  int numeric_dim() const { return static_cast<int>(numeric_cols.size()); }
  Eigen::VectorXd encode_row(const Eigen::VectorXd& raw_row) const;
  Eigen::VectorXd decode_row(const Eigen::VectorXd& encoded) const;
  Eigen::MatrixXd encode(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd decode(const Eigen::MatrixXd& encoded) const;
};

struct TabTrainConfig {
  std::vector<int> hidden_dims = {64, 64};
  int time_embed_dim = 32;
  int batch_size = 256;
  double lr = 1e-3;
};

// Denoiser over the joint encoded state: the numeric block head predicts the
// Gaussian noise, each categorical block head emits logits for the clean
// one-hot.
struct TabularModel {
  TabularSchema schema;
  TabularCodec codec;
  NoiseSchedule schedule;
  DenoiserNet net;
  std::vector<double> loss_history;
};

TabularModel train_tabddpm(const TabularDataset& data,
                           const TabTrainConfig& config,
                           const NoiseSchedule& schedule, int epochs,
                           RngStream& rng);

// Ancestral sampling over the joint state; categorical blocks are resampled
// from the predicted posterior each step. The interceptor sees the encoded
// state, indexed by the noise level just produced (0 = final, pre-decode).
TabularDataset sample_tabular(const TabularModel& model, int m,
                              const StepInterceptor* interceptor,
                              RngStream& rng);

// Synthetic data generator: one categorical label column drives every other
// column, so planted marginals are exact by construction and the label stays
// learnable for utility metrics.
struct TabularGenSpec {
  TabularSchema schema;
  std::string label_column;
  std::vector<double> label_probs;
  std::map<std::string, std::vector<std::vector<double>>> cat_given_label;
  std::map<std::string, std::vector<std::pair<double, double>>> num_given_label;

  void validate() const;
};

TabularDataset generate_tabular(const TabularGenSpec& spec, int n,
                                RngStream& rng);

}  // namespace prisampler

#endif  // PRISAMPLER_TABULAR_HPP
