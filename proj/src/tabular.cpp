#include "prisampler/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "prisampler/diffusion.hpp"
#include "prisampler/errors.hpp"
#include "prisampler/optimizer.hpp"

namespace prisampler {

namespace {

void check_csv_safe(const std::string& text, const std::string& what) {
  if (text.empty()) {
    throw InputError(what + " must not be empty");
  }
  if (text.find(',') != std::string::npos ||
      text.find('\n') != std::string::npos ||
      text.find('\r') != std::string::npos) {
    throw InputError(what + " '" + text + "' contains a CSV delimiter");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
}

std::string format_numeric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TabularSchema::validate() const {
  if (columns.empty()) {
    throw InputError("schema needs at least one column");
  }
  std::set<std::string> seen;
  for (const Column& col : columns) {
    check_csv_safe(col.name, "column name");
    if (!seen.insert(col.name).second) {
      throw InputError("duplicate column name '" + col.name + "'");
    }
    if (col.kind == ColumnKind::kCategorical) {
      if (col.categories.size() < 2) {
        throw InputError("categorical column '" + col.name +
                         "' needs at least 2 categories");
      }
      std::set<std::string> cats;
      for (const std::string& cat : col.categories) {
        check_csv_safe(cat, "category of column '" + col.name + "'");
        if (!cats.insert(cat).second) {
          throw InputError("duplicate category '" + cat + "' in column '" +
                           col.name + "'");
        }
      }
    } else if (!col.categories.empty()) {
      throw InputError("numeric column '" + col.name +
                       "' must not list categories");
    }
  }
}

int TabularSchema::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) {
      return static_cast<int>(i);
    }
  }
  throw InputError("schema has no column named '" + name + "'");
}

int TabularSchema::num_numeric() const {
  int n = 0;
  for (const Column& col : columns) {
    n += col.kind == ColumnKind::kNumeric ? 1 : 0;
  }
  return n;
}

int TabularSchema::num_categorical() const {
  return static_cast<int>(columns.size()) - num_numeric();
}

int default_sampling_steps(const TabularSchema& schema) {
  return schema.small ? 100 : 1000;
}

void TabularDataset::validate() const {
  schema.validate();
  if (raw.cols() != static_cast<Eigen::Index>(schema.columns.size())) {
    throw InputError("dataset has " + std::to_string(raw.cols()) +
                     " columns but the schema lists " +
                     std::to_string(schema.columns.size()));
  }
  if (split.size() != static_cast<std::size_t>(raw.rows())) {
    throw InputError("dataset split tags do not cover every row");
  }
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const Column& col = schema.columns[j];
    if (col.kind != ColumnKind::kCategorical) {
      continue;
    }
    const int card = static_cast<int>(col.categories.size());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      const double v = raw(i, j);
      if (v != std::floor(v) || v < 0.0 || v >= card) {
        throw InputError("row " + std::to_string(i) + " column '" + col.name +
                         "' holds " + format_numeric(v) +
                         ", not a category index");
      }
    }
  }
}

TabularDataset TabularDataset::rows_with_tag(SplitTag tag) const {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == tag) {
      keep.push_back(static_cast<Eigen::Index>(i));
    }
  }
  TabularDataset out;
  out.schema = schema;
  out.raw.resize(static_cast<Eigen::Index>(keep.size()), raw.cols());
  out.split.assign(keep.size(), tag);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.raw.row(static_cast<Eigen::Index>(i)) = raw.row(keep[i]);
  }
  return out;
}

TabularDataset ingest_csv(const std::string& path, const TabularSchema& schema,
                          std::vector<std::string>* diagnostics) {
  schema.validate();
  std::ifstream file(path);
  if (!file) {
    throw InputError("cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(file, line)) {
    throw InputError("no rows in '" + path + "'");
  }
  strip_cr(line);
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() != schema.columns.size()) {
    throw InputError("header of '" + path + "' has " +
                     std::to_string(header.size()) + " columns, expected " +
                     std::to_string(schema.columns.size()));
  }
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] != schema.columns[j].name) {
      throw InputError("header column " + std::to_string(j + 1) + " is '" +
                       header[j] + "', expected '" + schema.columns[j].name +
                       "'");
    }
  }

  std::vector<std::map<std::string, int>> category_index(schema.columns.size());
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    const Column& col = schema.columns[j];
    for (std::size_t k = 0; k < col.categories.size(); ++k) {
      category_index[j][col.categories[k]] = static_cast<int>(k);
    }
  }

  std::vector<Eigen::VectorXd> rows;
  int row_number = 0;
  while (std::getline(file, line)) {
    ++row_number;
    strip_cr(line);
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != schema.columns.size()) {
      if (diagnostics != nullptr) {
        diagnostics->push_back("row " + std::to_string(row_number) + ": " +
                               std::to_string(fields.size()) +
                               " cells, expected " +
                               std::to_string(schema.columns.size()));
      }
      continue;
    }
    Eigen::VectorXd row(schema.columns.size());
    bool ok = true;
    for (std::size_t j = 0; j < fields.size() && ok; ++j) {
      const Column& col = schema.columns[j];
      if (col.kind == ColumnKind::kNumeric) {
        const char* begin = fields[j].c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (fields[j].empty() || end != begin + fields[j].size() ||
            !std::isfinite(v)) {
          if (diagnostics != nullptr) {
            diagnostics->push_back("row " + std::to_string(row_number) +
                                   ": unparseable numeric '" + fields[j] +
                                   "' in column '" + col.name + "'");
          }
          ok = false;
        } else {
          row[static_cast<Eigen::Index>(j)] = v;
        }
      } else {
        const auto found = category_index[j].find(fields[j]);
        if (found == category_index[j].end()) {
          if (diagnostics != nullptr) {
            diagnostics->push_back("row " + std::to_string(row_number) +
                                   ": unknown category '" + fields[j] +
                                   "' in column '" + col.name + "'");
          }
          ok = false;
        } else {
          row[static_cast<Eigen::Index>(j)] = found->second;
        }
      }
    }
    if (ok) {
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) {
    throw InputError("no rows ingested from '" + path + "'");
  }

  TabularDataset out;
  out.schema = schema;
  out.raw.resize(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(schema.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.raw.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  out.split.assign(rows.size(), SplitTag::kTrain);
  return out;
}

void write_csv(const std::string& path, const TabularDataset& data) {
  data.validate();
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path + "'");
  }
  for (std::size_t j = 0; j < data.schema.columns.size(); ++j) {
    file << (j > 0 ? "," : "") << data.schema.columns[j].name;
  }
  file << "\n";
  for (Eigen::Index i = 0; i < data.raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.raw.cols(); ++j) {
      const Column& col = data.schema.columns[j];
      if (j > 0) {
        file << ",";
      }
      if (col.kind == ColumnKind::kNumeric) {
        file << format_numeric(data.raw(i, j));
      } else {
        file << col.categories[static_cast<int>(data.raw(i, j))];
      }
    }
    file << "\n";
  }
  if (!file) {
    throw InputError("write to '" + path + "' failed");
  }
}

TabularCodec TabularCodec::fit(const TabularDataset& data) {
  data.validate();
  if (data.raw.rows() == 0) {
    throw InputError("cannot fit a codec on an empty dataset");
  }
  TabularCodec codec;
  for (std::size_t j = 0; j < data.schema.columns.size(); ++j) {
    if (data.schema.columns[j].kind == ColumnKind::kNumeric) {
      codec.numeric_cols.push_back(static_cast<int>(j));
    } else {
      codec.categorical_cols.push_back(static_cast<int>(j));
    }
  }
  codec.means.resize(codec.numeric_dim());
  codec.stds.resize(codec.numeric_dim());
  for (int k = 0; k < codec.numeric_dim(); ++k) {
    const auto col = data.raw.col(codec.numeric_cols[k]);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    double std = std::sqrt(var);
    if (std < 1e-12) {
      std::cerr << "warning: zero-variance numeric column '"
                << data.schema.columns[codec.numeric_cols[k]].name
                << "', clamping std to 1\n";
      std = 1.0;
    }
    codec.means[k] = mean;
    codec.stds[k] = std;
  }
  codec.encoded_dim = codec.numeric_dim();
  for (int j : codec.categorical_cols) {
    const int card =
        static_cast<int>(data.schema.columns[j].categories.size());
    codec.cat_offsets.push_back(codec.encoded_dim);
    codec.cat_cards.push_back(card);
    codec.encoded_dim += card;
  }
  return codec;
}

Eigen::VectorXd TabularCodec::encode_row(const Eigen::VectorXd& raw_row) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(encoded_dim);
  for (int k = 0; k < numeric_dim(); ++k) {
    out[k] = (raw_row[numeric_cols[k]] - means[k]) / stds[k];
  }
  for (std::size_t c = 0; c < categorical_cols.size(); ++c) {
    const int idx = static_cast<int>(raw_row[categorical_cols[c]]);
    if (idx < 0 || idx >= cat_cards[c]) {
      throw InputError("category index out of range while encoding");
    }
    out[cat_offsets[c] + idx] = 1.0;
  }
  return out;
}

Eigen::VectorXd TabularCodec::decode_row(const Eigen::VectorXd& encoded) const {
  if (encoded.size() != encoded_dim) {
    throw InputError("encoded row has the wrong dimension");
  }
  Eigen::VectorXd raw(numeric_cols.size() + categorical_cols.size());
  for (int k = 0; k < numeric_dim(); ++k) {
    raw[numeric_cols[k]] = encoded[k] * stds[k] + means[k];
  }
  for (std::size_t c = 0; c < categorical_cols.size(); ++c) {
    Eigen::Index argmax = 0;
    encoded.segment(cat_offsets[c], cat_cards[c]).maxCoeff(&argmax);
    raw[categorical_cols[c]] = static_cast<double>(argmax);
  }
  return raw;
}

Eigen::MatrixXd TabularCodec::encode(const Eigen::MatrixXd& raw) const {
  Eigen::MatrixXd out(raw.rows(), encoded_dim);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    out.row(i) = encode_row(raw.row(i).transpose()).transpose();
  }
  return out;
}

Eigen::MatrixXd TabularCodec::decode(const Eigen::MatrixXd& encoded) const {
  Eigen::MatrixXd out(encoded.rows(),
                      static_cast<Eigen::Index>(numeric_cols.size() +
                                                categorical_cols.size()));
  for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
    out.row(i) = decode_row(encoded.row(i).transpose()).transpose();
  }
  return out;
}

TabularModel train_tabddpm(const TabularDataset& data,
                           const TabTrainConfig& config,
                           const NoiseSchedule& schedule, int epochs,
                           RngStream& rng) {
  data.validate();
  schedule.validate();
  if (schedule.kind != ScheduleKind::kVpDiscrete) {
    throw ConfigError("tabular training requires a discrete VP schedule");
  }
  if (data.rows() == 0) {
    throw InputError("cannot train on an empty dataset");
  }
  if (epochs < 1) {
    throw ConfigError("epochs must be positive");
  }

  TabularModel model;
  model.schema = data.schema;
  model.codec = TabularCodec::fit(data);
  model.schedule = schedule;

  const TabularCodec& codec = model.codec;
  const int n = data.rows();
  const int dim = codec.encoded_dim;
  const int nd = codec.numeric_dim();
  const int nc = static_cast<int>(codec.categorical_cols.size());
  const Eigen::MatrixXd x0 = codec.encode(data.raw);

  model.net = DenoiserNet(dim, config.hidden_dims, config.time_embed_dim,
                          static_cast<double>(schedule.steps),
                          PredictionTarget::kNoise, rng);
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamOptimizer adam(model.net.mlp, adam_config);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, std::min(config.batch_size, n));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += batch) {
      const int bs = std::min(batch, n - start);
      Eigen::MatrixXd xb(bs, dim);
      for (int r = 0; r < bs; ++r) {
        xb.row(r) = x0.row(order[start + r]);
      }
      Eigen::VectorXd t(bs);
      for (int r = 0; r < bs; ++r) {
        t[r] = static_cast<double>(rng.uniform_int(1, schedule.steps));
      }
      const Eigen::MatrixXd eps = rng.normal_matrix(bs, nd);
      Eigen::MatrixXd state(bs, dim);
      if (nd > 0) {
        state.leftCols(nd) = perturb_vp(xb.leftCols(nd), t, eps, schedule);
      }
      for (int c = 0; c < nc; ++c) {
        const int off = codec.cat_offsets[c];
        const int card = codec.cat_cards[c];
        for (int r = 0; r < bs; ++r) {
          const int idx = multinomial_perturb(
              xb.row(r).segment(off, card).transpose(),
              static_cast<int>(t[r]), schedule, rng);
          state.row(r).segment(off, card).setZero();
          state(r, off + idx) = 1.0;
        }
      }

      Mlp::ForwardCache cache;
      const Eigen::MatrixXd out = model.net.forward(state, t, cache);
      Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(bs, dim);
      double num_loss = 0.0;
      if (nd > 0) {
        const Eigen::MatrixXd diff = out.leftCols(nd) - eps;
        num_loss = diff.rowwise().squaredNorm().mean();
        dout.leftCols(nd) = 2.0 * diff / bs;
      }
      std::vector<double> cat_losses(nc, 0.0);
      for (int c = 0; c < nc; ++c) {
        const int off = codec.cat_offsets[c];
        const int card = codec.cat_cards[c];
        for (int r = 0; r < bs; ++r) {
          const Eigen::VectorXd xt_block =
              state.row(r).segment(off, card).transpose();
          const Eigen::VectorXd x0_block =
              xb.row(r).segment(off, card).transpose();
          const Eigen::VectorXd probs =
              softmax(out.row(r).segment(off, card).transpose());
          const int step = static_cast<int>(t[r]);
          cat_losses[c] +=
              multinomial_step_loss(xt_block, x0_block, probs, step, schedule);
          dout.row(r).segment(off, card) +=
              multinomial_step_loss_grad(xt_block, x0_block, probs, step,
                                         schedule)
                  .transpose() /
              (static_cast<double>(bs) * nc);
        }
        cat_losses[c] /= bs;
      }
      const double total = tabddpm_loss(num_loss, cat_losses, nc);
      if (!std::isfinite(total)) {
        throw TrainingError("training loss diverged at epoch " +
                            std::to_string(epoch) + " (value " +
                            format_numeric(total) + ")");
      }
      adam.step(model.net.mlp, model.net.backward(cache, dout));
      epoch_loss += total * bs;
    }
    model.loss_history.push_back(epoch_loss / n);
  }
  return model;
}

TabularDataset sample_tabular(const TabularModel& model, int m,
                              const StepInterceptor* interceptor,
                              RngStream& rng) {
  if (m < 0) {
    throw InputError("sample count must be non-negative");
  }
  const NoiseSchedule& schedule = model.schedule;
  const TabularCodec& codec = model.codec;
  const int dim = codec.encoded_dim;
  const int nd = codec.numeric_dim();
  const int nc = static_cast<int>(codec.categorical_cols.size());
  if (interceptor != nullptr) {
    for (int s : interceptor->target_steps) {
      if (s < 0 || s >= schedule.steps) {
        throw ConfigError("tabular sampler: interceptor step " +
                          std::to_string(s) + " outside 0.." +
                          std::to_string(schedule.steps - 1));
      }
    }
    if (!interceptor->target_steps.empty() && !interceptor->transform) {
      throw ConfigError("interceptor has target steps but no transform");
    }
  }

  std::vector<RngStream> chains;
  chains.reserve(m);
  for (int c = 0; c < m; ++c) {
    chains.push_back(rng.split(static_cast<std::uint64_t>(c)));
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, dim);
  for (int c = 0; c < m; ++c) {
    if (nd > 0) {
      x.row(c).head(nd) = chains[c].normal_vector(nd).transpose();
    }
    for (int b = 0; b < nc; ++b) {
      const int idx = chains[c].uniform_int(0, codec.cat_cards[b] - 1);
      x(c, codec.cat_offsets[b] + idx) = 1.0;
    }
  }

  const auto apply = [&](int step) {
    if (interceptor == nullptr || interceptor->target_steps.count(step) == 0) {
      return;
    }
    for (int c = 0; c < m; ++c) {
      const Eigen::VectorXd out =
          interceptor->transform(x.row(c).transpose(), step, c);
      if (out.size() != dim) {
        throw InputError("interceptor transform changed the state dimension");
      }
      x.row(c) = out.transpose();
    }
  };

  for (int i = schedule.steps; i >= 1 && m > 0; --i) {
    const Eigen::MatrixXd out = model.net.forward(x, static_cast<double>(i));
    if (nd > 0) {
      const double beta = schedule.beta_step(i);
      const double std_i = marginal_std_ext(schedule, static_cast<double>(i));
      x.leftCols(nd) =
          (x.leftCols(nd) - (beta / std_i) * out.leftCols(nd)) /
          std::sqrt(1.0 - beta);
      if (i > 1) {
        const double abar = schedule.signal_coeff(i);
        const double abar_prev = schedule.signal_coeff(i - 1);
        const double post_std =
            std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar));
        for (int c = 0; c < m; ++c) {
          x.row(c).head(nd) +=
              post_std * chains[c].normal_vector(nd).transpose();
        }
      }
    }
    for (int c = 0; c < m; ++c) {
      for (int b = 0; b < nc; ++b) {
        const int off = codec.cat_offsets[b];
        const int card = codec.cat_cards[b];
        const Eigen::VectorXd probs =
            softmax(out.row(c).segment(off, card).transpose());
        const Eigen::VectorXd posterior = multinomial_posterior(
            x.row(c).segment(off, card).transpose(), probs, i, schedule);
        const int idx = sample_categorical(posterior, chains[c]);
        x.row(c).segment(off, card).setZero();
        x(c, off + idx) = 1.0;
      }
    }
    apply(i - 1);
  }

  TabularDataset result;
  result.schema = model.schema;
  result.raw = codec.decode(x);
  result.split.assign(static_cast<std::size_t>(m), SplitTag::kTrain);
  return result;
}

void TabularGenSpec::validate() const {
  schema.validate();
  const int label_idx = schema.column_index(label_column);
  const Column& label = schema.columns[label_idx];
  if (label.kind != ColumnKind::kCategorical) {
    throw InputError("label column '" + label_column + "' must be categorical");
  }
  const int k = static_cast<int>(label.categories.size());
  if (static_cast<int>(label_probs.size()) != k) {
    throw InputError("label_probs must list one probability per category");
  }
  double total = 0.0;
  for (double p : label_probs) {
    if (p < 0.0) {
      throw InputError("label probabilities must be non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError("label probabilities must sum to 1");
  }
  for (const Column& col : schema.columns) {
    if (col.name == label_column) {
      continue;
    }
    if (col.kind == ColumnKind::kCategorical) {
      const auto it = cat_given_label.find(col.name);
      if (it == cat_given_label.end() ||
          static_cast<int>(it->second.size()) != k) {
        throw InputError("column '" + col.name +
                         "' needs per-label category probabilities");
      }
      for (const std::vector<double>& probs : it->second) {
        if (probs.size() != col.categories.size()) {
          throw InputError("column '" + col.name +
                           "' has a probability row of the wrong size");
        }
        double s = 0.0;
        for (double p : probs) {
          if (p < 0.0) {
            throw InputError("column '" + col.name +
                             "' has a negative probability");
          }
          s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) {
          throw InputError("column '" + col.name +
                           "' probabilities must sum to 1");
        }
      }
    } else {
      const auto it = num_given_label.find(col.name);
      if (it == num_given_label.end() ||
          static_cast<int>(it->second.size()) != k) {
        throw InputError("column '" + col.name +
                         "' needs per-label mean/std parameters");
      }
      for (const auto& param : it->second) {
        if (!(param.second > 0.0)) {
          throw InputError("column '" + col.name + "' needs a positive std");
        }
      }
    }
  }
  for (const auto& entry : cat_given_label) {
    const int idx = schema.column_index(entry.first);
    if (schema.columns[idx].kind != ColumnKind::kCategorical ||
        entry.first == label_column) {
      throw InputError("cat_given_label entry '" + entry.first +
                       "' does not name a dependent categorical column");
    }
  }
  for (const auto& entry : num_given_label) {
    const int idx = schema.column_index(entry.first);
    if (schema.columns[idx].kind != ColumnKind::kNumeric) {
      throw InputError("num_given_label entry '" + entry.first +
                       "' does not name a numeric column");
    }
  }
}

TabularDataset generate_tabular(const TabularGenSpec& spec, int n,
                                RngStream& rng) {
  spec.validate();
  if (n < 0) {
    throw InputError("row count must be non-negative");
  }
  const int label_idx = spec.schema.column_index(spec.label_column);
  const Eigen::VectorXd label_probs = Eigen::Map<const Eigen::VectorXd>(
      spec.label_probs.data(), static_cast<Eigen::Index>(spec.label_probs.size()));

  TabularDataset out;
  out.schema = spec.schema;
  out.raw.resize(n, static_cast<Eigen::Index>(spec.schema.columns.size()));
  out.split.assign(static_cast<std::size_t>(n), SplitTag::kTrain);

  for (int i = 0; i < n; ++i) {
    const int label = sample_categorical(label_probs, rng);
    for (std::size_t j = 0; j < spec.schema.columns.size(); ++j) {
      const Column& col = spec.schema.columns[j];
      if (static_cast<int>(j) == label_idx) {
        out.raw(i, static_cast<Eigen::Index>(j)) = label;
      } else if (col.kind == ColumnKind::kCategorical) {
        const std::vector<double>& probs =
            spec.cat_given_label.at(col.name)[label];
        const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(
            probs.data(), static_cast<Eigen::Index>(probs.size()));
        out.raw(i, static_cast<Eigen::Index>(j)) = sample_categorical(p, rng);
      } else {
        const auto& [mean, std] = spec.num_given_label.at(col.name)[label];
        out.raw(i, static_cast<Eigen::Index>(j)) = mean + std * rng.normal();
      }
    }
  }
  return out;
}

}  // namespace prisampler
