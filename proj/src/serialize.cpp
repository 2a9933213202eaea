#include "prisampler/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

[[noreturn]] void fail_parse(const std::string& what, const std::string& why) {
  throw InputError(what + ": " + why);
}

void check_type(const Json& j, const std::string& key, const std::string& what,
                bool ok, const char* expected) {
  if (!ok) {
    fail_parse(what, "field '" + key + "' must be " + expected);
  }
}

std::vector<int> int_list(const Json& j, const std::string& key,
                          const std::string& what) {
  const Json& arr = require_key(j, key, what);
  check_type(arr, key, what, arr.is_array(), "an array of integers");
  std::vector<int> out;
  out.reserve(arr.size());
  for (const Json& item : arr) {
    check_type(item, key, what, item.is_number_integer(),
               "an array of integers");
    out.push_back(item.get<int>());
  }
  return out;
}

std::vector<double> double_list(const Json& j, const std::string& key,
                                const std::string& what) {
  const Json& arr = require_key(j, key, what);
  check_type(arr, key, what, arr.is_array(), "an array of numbers");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const Json& item : arr) {
    check_type(item, key, what, item.is_number(), "an array of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

void check_model_kind(const Json& j, const std::string& expected) {
  const std::string kind = require_string(j, "kind", "model document");
  if (kind != expected) {
    throw InputError("model document: expected kind '" + expected +
                     "', found '" + kind + "'");
  }
}

}  // namespace

const Json& require_key(const Json& j, const std::string& key,
                        const std::string& what) {
  if (!j.is_object()) {
    fail_parse(what, "expected a JSON object");
  }
  auto it = j.find(key);
  if (it == j.end()) {
    fail_parse(what, "missing field '" + key + "'");
  }
  return *it;
}

double require_double(const Json& j, const std::string& key,
                      const std::string& what) {
  const Json& v = require_key(j, key, what);
  check_type(v, key, what, v.is_number(), "a number");
  return v.get<double>();
}

int require_int(const Json& j, const std::string& key,
                const std::string& what) {
  const Json& v = require_key(j, key, what);
  check_type(v, key, what, v.is_number_integer(), "an integer");
  return v.get<int>();
}

std::string require_string(const Json& j, const std::string& key,
                           const std::string& what) {
  const Json& v = require_key(j, key, what);
  check_type(v, key, what, v.is_string(), "a string");
  return v.get<std::string>();
}

double optional_double(const Json& j, const std::string& key, double fallback) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) {
    return fallback;
  }
  check_type(j[key], key, "optional field", j[key].is_number(), "a number");
  return j[key].get<double>();
}

int optional_int(const Json& j, const std::string& key, int fallback) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) {
    return fallback;
  }
  check_type(j[key], key, "optional field", j[key].is_number_integer(),
             "an integer");
  return j[key].get<int>();
}

bool optional_bool(const Json& j, const std::string& key, bool fallback) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) {
    return fallback;
  }
  check_type(j[key], key, "optional field", j[key].is_boolean(), "a boolean");
  return j[key].get<bool>();
}

Json to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v[i]);
  }
  return arr;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) {
    fail_parse(what, "expected an array of numbers");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      fail_parse(what, "expected an array of numbers");
    }
    out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) {
    fail_parse(what, "expected an array of rows");
  }
  if (j.empty()) {
    return Eigen::MatrixXd(0, 0);
  }
  if (!j[0].is_array()) {
    fail_parse(what, "expected an array of rows");
  }
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(j.size()),
                      static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      fail_parse(what, "rows must all have " + std::to_string(cols) +
                           " entries");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) {
        fail_parse(what, "expected numeric matrix entries");
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          j[i][k].get<double>();
    }
  }
  return out;
}

std::string schedule_kind_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kVpDiscrete:
      return "vp_discrete";
    case ScheduleKind::kVeDiscrete:
      return "ve_discrete";
    case ScheduleKind::kVpContinuous:
      return "vp_continuous";
    case ScheduleKind::kVeContinuous:
      return "ve_continuous";
  }
  throw InputError("unknown schedule kind");
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
  if (name == "vp_discrete") return ScheduleKind::kVpDiscrete;
  if (name == "ve_discrete") return ScheduleKind::kVeDiscrete;
  if (name == "vp_continuous") return ScheduleKind::kVpContinuous;
  if (name == "ve_continuous") return ScheduleKind::kVeContinuous;
  throw InputError("unknown schedule kind '" + name + "'");
}

std::string sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kAncestral:
      return "ancestral";
    case SamplerKind::kPc:
      return "pc";
    case SamplerKind::kOde:
      return "ode";
    case SamplerKind::kDpm:
      return "dpm";
  }
  throw InputError("unknown sampler kind");
}

SamplerKind sampler_kind_from_name(const std::string& name) {
  if (name == "ancestral") return SamplerKind::kAncestral;
  if (name == "pc") return SamplerKind::kPc;
  if (name == "ode") return SamplerKind::kOde;
  if (name == "dpm") return SamplerKind::kDpm;
  throw InputError("unknown sampler kind '" + name + "'");
}

Json to_json(const NoiseSchedule& schedule) {
  return Json{{"kind", schedule_kind_name(schedule.kind)},
              {"steps", schedule.steps},
              {"beta_min", schedule.beta_min},
              {"beta_max", schedule.beta_max},
              {"sigma_min", schedule.sigma_min},
              {"sigma_max", schedule.sigma_max}};
}

NoiseSchedule schedule_from_json(const Json& j) {
  NoiseSchedule out;
  out.kind = schedule_kind_from_name(require_string(j, "kind", "schedule"));
  out.steps = optional_int(j, "steps", out.steps);
  out.beta_min = optional_double(j, "beta_min", out.beta_min);
  out.beta_max = optional_double(j, "beta_max", out.beta_max);
  out.sigma_min = optional_double(j, "sigma_min", out.sigma_min);
  out.sigma_max = optional_double(j, "sigma_max", out.sigma_max);
  out.validate();
  return out;
}

Json to_json(const Mlp& mlp) {
  Json weights = Json::array();
  Json biases = Json::array();
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    weights.push_back(to_json(mlp.weights[i]));
    biases.push_back(to_json(mlp.biases[i]));
  }
  return Json{{"layer_dims", mlp.layer_dims},
              {"activation",
               mlp.activation == Activation::kSilu ? "silu" : "tanh"},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)}};
}

Mlp mlp_from_json(const Json& j) {
  Mlp out;
  out.layer_dims = int_list(j, "layer_dims", "mlp");
  const std::string act = require_string(j, "activation", "mlp");
  if (act == "silu") {
    out.activation = Activation::kSilu;
  } else if (act == "tanh") {
    out.activation = Activation::kTanh;
  } else {
    throw InputError("mlp: unknown activation '" + act + "'");
  }
  const Json& weights = require_key(j, "weights", "mlp");
  const Json& biases = require_key(j, "biases", "mlp");
  if (!weights.is_array() || !biases.is_array() ||
      weights.size() != biases.size()) {
    throw InputError("mlp: weights and biases must be parallel arrays");
  }
  if (out.layer_dims.size() != weights.size() + 1) {
    throw InputError("mlp: layer_dims does not match the layer count");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Eigen::MatrixXd w = matrix_from_json(weights[i], "mlp weights");
    Eigen::VectorXd b = vector_from_json(biases[i], "mlp biases");
    if (w.rows() != out.layer_dims[i + 1] || w.cols() != out.layer_dims[i] ||
        b.size() != w.rows()) {
      throw InputError("mlp: layer " + std::to_string(i) +
                       " shape disagrees with layer_dims");
    }
    out.weights.push_back(std::move(w));
    out.biases.push_back(std::move(b));
  }
  return out;
}

Json to_json(const DenoiserNet& net) {
  return Json{{"mlp", to_json(net.mlp)},
              {"data_dim", net.data_dim},
              {"time_embed_dim", net.time_embed_dim},
              {"max_time", net.max_time},
              {"target",
               net.target == PredictionTarget::kNoise ? "noise" : "score"}};
}

DenoiserNet denoiser_from_json(const Json& j) {
  DenoiserNet out;
  out.mlp = mlp_from_json(require_key(j, "mlp", "denoiser"));
  out.data_dim = require_int(j, "data_dim", "denoiser");
  out.time_embed_dim = require_int(j, "time_embed_dim", "denoiser");
  out.max_time = require_double(j, "max_time", "denoiser");
  const std::string target = require_string(j, "target", "denoiser");
  if (target == "noise") {
    out.target = PredictionTarget::kNoise;
  } else if (target == "score") {
    out.target = PredictionTarget::kScore;
  } else {
    throw InputError("denoiser: unknown target '" + target + "'");
  }
  if (out.mlp.input_dim() != out.data_dim + out.time_embed_dim ||
      out.mlp.output_dim() != out.data_dim) {
    throw InputError("denoiser: mlp dimensions disagree with data_dim");
  }
  return out;
}

Json to_json(const TabularSchema& schema) {
  Json columns = Json::array();
  for (const Column& col : schema.columns) {
    Json entry{{"name", col.name}};
    if (col.kind == ColumnKind::kNumeric) {
      entry["kind"] = "numeric";
    } else {
      entry["kind"] = "categorical";
      entry["categories"] = col.categories;
    }
    columns.push_back(std::move(entry));
  }
  return Json{{"columns", std::move(columns)}, {"small", schema.small}};
}

TabularSchema schema_from_json(const Json& j) {
  TabularSchema out;
  out.small = optional_bool(j, "small", true);
  const Json& columns = require_key(j, "columns", "schema");
  if (!columns.is_array()) {
    throw InputError("schema: 'columns' must be an array");
  }
  for (const Json& entry : columns) {
    Column col;
    col.name = require_string(entry, "name", "schema column");
    const std::string kind = require_string(entry, "kind", "schema column");
    if (kind == "numeric") {
      col.kind = ColumnKind::kNumeric;
    } else if (kind == "categorical") {
      col.kind = ColumnKind::kCategorical;
      const Json& cats = require_key(entry, "categories", "schema column");
      if (!cats.is_array()) {
        throw InputError("schema column '" + col.name +
                         "': 'categories' must be an array of strings");
      }
      for (const Json& cat : cats) {
        if (!cat.is_string()) {
          throw InputError("schema column '" + col.name +
                           "': 'categories' must be an array of strings");
        }
        col.categories.push_back(cat.get<std::string>());
      }
    } else {
      throw InputError("schema column '" + col.name + "': unknown kind '" +
                       kind + "'");
    }
    out.columns.push_back(std::move(col));
  }
  out.validate();
  return out;
}

Json to_json(const TabularCodec& codec) {
  return Json{{"numeric_cols", codec.numeric_cols},
              {"categorical_cols", codec.categorical_cols},
              {"means", to_json(codec.means)},
              {"stds", to_json(codec.stds)},
              {"cat_offsets", codec.cat_offsets},
              {"cat_cards", codec.cat_cards},
              {"encoded_dim", codec.encoded_dim}};
}

TabularCodec codec_from_json(const Json& j) {
  TabularCodec out;
  out.numeric_cols = int_list(j, "numeric_cols", "codec");
  out.categorical_cols = int_list(j, "categorical_cols", "codec");
  out.means = vector_from_json(require_key(j, "means", "codec"), "codec means");
  out.stds = vector_from_json(require_key(j, "stds", "codec"), "codec stds");
  out.cat_offsets = int_list(j, "cat_offsets", "codec");
  out.cat_cards = int_list(j, "cat_cards", "codec");
  out.encoded_dim = require_int(j, "encoded_dim", "codec");
  if (out.means.size() != static_cast<Eigen::Index>(out.numeric_cols.size()) ||
      out.stds.size() != out.means.size() ||
      out.cat_offsets.size() != out.categorical_cols.size() ||
      out.cat_cards.size() != out.categorical_cols.size()) {
    throw InputError("codec: block sizes disagree");
  }
  return out;
}

Json to_json(const TabularModel& model) {
  return Json{{"kind", "tabddpm"},
              {"schema", to_json(model.schema)},
              {"codec", to_json(model.codec)},
              {"schedule", to_json(model.schedule)},
              {"net", to_json(model.net)},
              {"loss_history", model.loss_history}};
}

TabularModel tabular_model_from_json(const Json& j) {
  check_model_kind(j, "tabddpm");
  TabularModel out;
  out.schema = schema_from_json(require_key(j, "schema", "tabddpm model"));
  out.codec = codec_from_json(require_key(j, "codec", "tabddpm model"));
  out.schedule =
      schedule_from_json(require_key(j, "schedule", "tabddpm model"));
  out.net = denoiser_from_json(require_key(j, "net", "tabddpm model"));
  out.loss_history = double_list(j, "loss_history", "tabddpm model");
  if (out.net.data_dim != out.codec.encoded_dim) {
    throw InputError("tabddpm model: net dimension disagrees with the codec");
  }
  return out;
}

Json to_json(const ContinuousModel& model) {
  return Json{{"kind", "continuous"},
              {"schedule", to_json(model.schedule)},
              {"net", to_json(model.net)},
              {"loss_history", model.loss_history}};
}

ContinuousModel continuous_model_from_json(const Json& j) {
  check_model_kind(j, "continuous");
  ContinuousModel out;
  out.schedule =
      schedule_from_json(require_key(j, "schedule", "continuous model"));
  out.net = denoiser_from_json(require_key(j, "net", "continuous model"));
  out.loss_history = double_list(j, "loss_history", "continuous model");
  return out;
}

Json to_json(const Hyperplane& plane) {
  return Json{{"normal", to_json(plane.normal)},
              {"bias", plane.bias},
              {"step", plane.step},
              {"property_id", plane.property_id},
              {"margin", plane.margin},
              {"train_accuracy", plane.train_accuracy},
              {"warnings", plane.warnings}};
}

Hyperplane hyperplane_from_json(const Json& j) {
  Hyperplane out;
  out.normal = vector_from_json(require_key(j, "normal", "hyperplane"),
                                "hyperplane normal");
  out.bias = require_double(j, "bias", "hyperplane");
  out.step = require_int(j, "step", "hyperplane");
  out.property_id = require_string(j, "property_id", "hyperplane");
  out.margin = require_double(j, "margin", "hyperplane");
  out.train_accuracy = require_double(j, "train_accuracy", "hyperplane");
  const Json& warnings = require_key(j, "warnings", "hyperplane");
  if (!warnings.is_array()) {
    throw InputError("hyperplane: 'warnings' must be an array of strings");
  }
  for (const Json& w : warnings) {
    if (!w.is_string()) {
      throw InputError("hyperplane: 'warnings' must be an array of strings");
    }
    out.warnings.push_back(w.get<std::string>());
  }
  out.validate();
  return out;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path + "'");
  }
  file << j.dump(2) << '\n';
  if (!file) {
    throw InputError("failed while writing '" + path + "'");
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) {
    throw InputError("cannot read '" + path + "'");
  }
  try {
    return Json::parse(file);
  } catch (const Json::parse_error& e) {
    throw InputError("invalid JSON in '" + path + "': " + e.what());
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw InputError("cannot read '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return fnv1a_hex(buffer.str());
}

}  // namespace prisampler
