#include "prisampler/manifest.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "prisampler/errors.hpp"

namespace prisampler {
namespace {

std::uint64_t require_u64(const Json& j, const std::string& key,
                          const std::string& what) {
  const Json& v = require_key(j, key, what);
  if (!(v.is_number_integer() || v.is_number_unsigned()) ||
      (v.is_number_integer() && !v.is_number_unsigned() &&
       v.get<std::int64_t>() < 0)) {
    throw InputError(what + ": field '" + key +
                     "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<int> optional_int_list(const Json& j, const std::string& key,
                                   const std::string& what) {
  if (!j.contains(key) || j[key].is_null()) {
    return {};
  }
  const Json& arr = j[key];
  if (!arr.is_array()) {
    throw InputError(what + ": field '" + key + "' must be an array");
  }
  std::vector<int> out;
  for (const Json& item : arr) {
    if (!item.is_number_integer()) {
      throw InputError(what + ": field '" + key + "' must hold integers");
    }
    out.push_back(item.get<int>());
  }
  return out;
}

std::vector<double> required_double_list(const Json& j, const std::string& key,
                                         const std::string& what) {
  const Json& arr = require_key(j, key, what);
  if (!arr.is_array()) {
    throw InputError(what + ": field '" + key + "' must be an array");
  }
  std::vector<double> out;
  for (const Json& item : arr) {
    if (!item.is_number()) {
      throw InputError(what + ": field '" + key + "' must hold numbers");
    }
    out.push_back(item.get<double>());
  }
  return out;
}

SplitSizes sizes_from_json(const Json& j) {
  SplitSizes out;
  const Json& sizes = require_key(j, "sizes", "dataset");
  out.train = require_int(sizes, "train", "dataset sizes");
  out.shadow = require_int(sizes, "shadow", "dataset sizes");
  out.test = require_int(sizes, "test", "dataset sizes");
  return out;
}

TabularGenSpec tabular_from_json(const Json& j) {
  TabularGenSpec out;
  Json schema_doc{{"columns", require_key(j, "columns", "dataset")},
                  {"small", optional_bool(j, "small", true)}};
  out.schema = schema_from_json(schema_doc);
  out.label_column = require_string(j, "label_column", "dataset");
  out.label_probs = required_double_list(j, "label_probs", "dataset");
  if (j.contains("cat_given_label")) {
    const Json& block = j["cat_given_label"];
    if (!block.is_object()) {
      throw InputError("dataset: 'cat_given_label' must map columns to "
                       "per-label probability rows");
    }
    for (auto it = block.begin(); it != block.end(); ++it) {
      std::vector<std::vector<double>> rows;
      if (!it.value().is_array()) {
        throw InputError("dataset: cat_given_label['" + it.key() +
                         "'] must be an array of probability rows");
      }
      for (const Json& row : it.value()) {
        if (!row.is_array()) {
          throw InputError("dataset: cat_given_label['" + it.key() +
                           "'] rows must be arrays of numbers");
        }
        std::vector<double> probs;
        for (const Json& cell : row) {
          if (!cell.is_number()) {
            throw InputError("dataset: cat_given_label['" + it.key() +
                             "'] rows must hold numbers");
          }
          probs.push_back(cell.get<double>());
        }
        rows.push_back(std::move(probs));
      }
      out.cat_given_label[it.key()] = std::move(rows);
    }
  }
  if (j.contains("num_given_label")) {
    const Json& block = j["num_given_label"];
    if (!block.is_object()) {
      throw InputError("dataset: 'num_given_label' must map columns to "
                       "per-label [mean, std] pairs");
    }
    for (auto it = block.begin(); it != block.end(); ++it) {
      std::vector<std::pair<double, double>> rows;
      if (!it.value().is_array()) {
        throw InputError("dataset: num_given_label['" + it.key() +
                         "'] must be an array of [mean, std] pairs");
      }
      for (const Json& row : it.value()) {
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() ||
            !row[1].is_number()) {
          throw InputError("dataset: num_given_label['" + it.key() +
                           "'] entries must be [mean, std] pairs");
        }
        rows.emplace_back(row[0].get<double>(), row[1].get<double>());
      }
      out.num_given_label[it.key()] = std::move(rows);
    }
  }
  return out;
}

MixtureSpec mixture_from_json(const Json& j) {
  MixtureSpec out;
  const Json& components = require_key(j, "components", "dataset");
  if (!components.is_array()) {
    throw InputError("dataset: 'components' must be an array");
  }
  for (const Json& entry : components) {
    MixtureComponent comp;
    Eigen::VectorXd mean = vector_from_json(
        require_key(entry, "mean", "mixture component"), "component mean");
    if (mean.size() != 2) {
      throw InputError("mixture component means must have two entries");
    }
    comp.mean = mean;
    Eigen::MatrixXd cov = matrix_from_json(
        require_key(entry, "cov", "mixture component"), "component cov");
    if (cov.rows() != 2 || cov.cols() != 2) {
      throw InputError("mixture component covariances must be 2x2");
    }
    comp.cov = cov;
    comp.property_label = require_int(entry, "property_label",
                                      "mixture component");
    comp.weight = optional_double(entry, "weight", 1.0);
    out.components.push_back(comp);
  }
  return out;
}

DatasetSpec dataset_from_json(const Json& j) {
  DatasetSpec out;
  const std::string kind = require_string(j, "kind", "dataset");
  out.sizes = sizes_from_json(j);
  if (kind == "tabular") {
    out.kind = DatasetKind::kTabular;
    out.tabular = tabular_from_json(j);
  } else if (kind == "continuous2d") {
    out.kind = DatasetKind::kContinuous2d;
    out.mixture = mixture_from_json(j);
    out.planted_proportion =
        require_double(j, "planted_proportion", "dataset");
  } else {
    throw InputError("dataset: unknown kind '" + kind + "'");
  }
  return out;
}

ModelSpec model_from_json(const Json& j, const DatasetSpec& dataset) {
  ModelSpec out;
  const Json& schedule = require_key(j, "schedule", "model");
  out.schedule = schedule_from_json(schedule);
  if (dataset.kind == DatasetKind::kTabular &&
      !schedule.contains("steps")) {
    out.schedule.steps = default_sampling_steps(dataset.tabular.schema);
  }
  if (j.contains("hidden_dims")) {
    out.hidden_dims = optional_int_list(j, "hidden_dims", "model");
  }
  out.time_embed_dim = optional_int(j, "time_embed_dim", out.time_embed_dim);
  out.batch_size = optional_int(j, "batch_size", out.batch_size);
  out.lr = optional_double(j, "lr", out.lr);
  out.epochs = optional_int(j, "epochs", out.epochs);
  return out;
}

SamplerSpec sampler_from_json(const Json& j) {
  SamplerSpec out;
  const std::string kind = require_string(j, "kind", "sampler");
  switch (sampler_kind_from_name(kind)) {
    case SamplerKind::kAncestral:
      out.config = SamplerConfig::ancestral(optional_int(j, "steps", 1000));
      break;
    case SamplerKind::kPc:
      out.config = SamplerConfig::pc(optional_int(j, "steps", 1000),
                                     optional_double(j, "snr", 0.16));
      break;
    case SamplerKind::kOde:
      out.config = SamplerConfig::ode(optional_double(j, "rtol", 1e-5),
                                      optional_double(j, "atol", 1e-5));
      break;
    case SamplerKind::kDpm:
      out.config = SamplerConfig::dpm(optional_int(j, "steps", 40),
                                      optional_int(j, "order", 3));
      break;
  }
  out.id = j.contains("id") && !j["id"].is_null()
               ? require_string(j, "id", "sampler")
               : kind;
  return out;
}

PropertyPredicate predicate_from_json(const Json& j,
                                      const DatasetSpec& dataset) {
  const std::string kind = require_string(j, "kind", "predicate");
  PropertyPredicate out;
  if (kind == "categorical_equals") {
    out = PropertyPredicate::categorical_equals(
        require_string(j, "column", "predicate"),
        require_string(j, "category", "predicate"));
  } else if (kind == "categorical_one_vs_rest") {
    const std::string column = require_string(j, "column", "predicate");
    int arity = 2;
    if (dataset.kind == DatasetKind::kTabular) {
      for (const Column& col : dataset.tabular.schema.columns) {
        if (col.name == column && col.kind == ColumnKind::kCategorical) {
          arity = static_cast<int>(col.categories.size());
        }
      }
    }
    out = PropertyPredicate::categorical_one_vs_rest(
        column, require_string(j, "category", "predicate"), arity);
  } else if (kind == "numeric_less_than") {
    out = PropertyPredicate::numeric_less_than(
        require_string(j, "column", "predicate"),
        require_double(j, "threshold", "predicate"));
  } else if (kind == "numeric_range") {
    out = PropertyPredicate::numeric_range(
        require_string(j, "column", "predicate"),
        require_double(j, "lo", "predicate"),
        require_double(j, "hi", "predicate"));
  } else if (kind == "classifier") {
    out.kind = PredicateKind::kClassifierBased;
    out.id = "classifier>0.5";
  } else {
    throw InputError("predicate: unknown kind '" + kind + "'");
  }
  if (j.contains("id") && !j["id"].is_null()) {
    out.id = require_string(j, "id", "predicate");
  }
  return out;
}

ClassifierConfig classifier_from_json(const Json& j) {
  ClassifierConfig out;
  if (j.contains("hidden_dims")) {
    out.hidden_dims = optional_int_list(j, "hidden_dims", "classifier");
  }
  out.batch_size = optional_int(j, "batch_size", out.batch_size);
  out.lr = optional_double(j, "lr", out.lr);
  out.epochs = optional_int(j, "epochs", out.epochs);
  return out;
}

DefenseSpec defense_from_json(const Json& j) {
  DefenseSpec out;
  out.sample_count = optional_int(j, "sample_count", out.sample_count);
  out.pairs = optional_int(j, "pairs", out.pairs);
  if (j.contains("svm") && !j["svm"].is_null()) {
    out.svm.lambda = optional_double(j["svm"], "lambda", out.svm.lambda);
    out.svm.epochs = optional_int(j["svm"], "epochs", out.svm.epochs);
  }
  const Json& properties = require_key(j, "properties", "defense");
  if (!properties.is_array() || properties.empty()) {
    throw InputError("defense: 'properties' must be a non-empty array");
  }
  for (const Json& entry : properties) {
    DefendedProperty prop;
    prop.property_id = require_string(entry, "id", "defense property");
    const Json& classes = require_key(entry, "classes", "defense property");
    if (!classes.is_array() || classes.empty()) {
      throw InputError("defense property '" + prop.property_id +
                       "': 'classes' must be a non-empty array");
    }
    for (const Json& cls : classes) {
      if (!cls.is_string()) {
        throw InputError("defense property '" + prop.property_id +
                         "': 'classes' must hold predicate ids");
      }
      prop.class_ids.push_back(cls.get<std::string>());
    }
    if (entry.contains("gammas") && !entry["gammas"].is_null()) {
      prop.gammas = required_double_list(entry, "gammas", "defense property");
    } else if (prop.class_ids.size() == 1) {
      prop.gammas = {0.5};
    } else {
      prop.gammas.assign(prop.class_ids.size(),
                         1.0 / static_cast<double>(prop.class_ids.size()));
    }
    if (entry.contains("alpha") && !entry["alpha"].is_null()) {
      prop.alpha = require_double(entry, "alpha", "defense property");
    }
    if (entry.contains("step") && !entry["step"].is_null()) {
      prop.step = require_int(entry, "step", "defense property");
    }
    out.properties.push_back(std::move(prop));
  }
  return out;
}

MetricsSpec metrics_from_json(const Json& j, const DatasetSpec& dataset) {
  MetricsSpec out;
  if (dataset.kind == DatasetKind::kTabular) {
    out.f1_label = dataset.tabular.label_column;
  }
  if (j.is_object()) {
    if (j.contains("f1_label") && !j["f1_label"].is_null()) {
      out.f1_label = require_string(j, "f1_label", "metrics");
    }
    out.frechet = optional_bool(j, "frechet", out.frechet);
    out.n = optional_int(j, "n", out.n);
  }
  return out;
}

Json sizes_to_json(const SplitSizes& sizes) {
  return Json{{"train", sizes.train},
              {"shadow", sizes.shadow},
              {"test", sizes.test}};
}

Json dataset_to_json(const DatasetSpec& dataset) {
  Json out;
  out["sizes"] = sizes_to_json(dataset.sizes);
  if (dataset.kind == DatasetKind::kTabular) {
    out["kind"] = "tabular";
    Json schema = to_json(dataset.tabular.schema);
    out["columns"] = schema["columns"];
    out["small"] = schema["small"];
    out["label_column"] = dataset.tabular.label_column;
    out["label_probs"] = dataset.tabular.label_probs;
    if (!dataset.tabular.cat_given_label.empty()) {
      out["cat_given_label"] = dataset.tabular.cat_given_label;
    }
    if (!dataset.tabular.num_given_label.empty()) {
      Json block = Json::object();
      for (const auto& [column, rows] : dataset.tabular.num_given_label) {
        Json arr = Json::array();
        for (const auto& [mean, std] : rows) {
          arr.push_back(Json::array({mean, std}));
        }
        block[column] = std::move(arr);
      }
      out["num_given_label"] = std::move(block);
    }
  } else {
    out["kind"] = "continuous2d";
    Json components = Json::array();
    for (const MixtureComponent& comp : dataset.mixture.components) {
      components.push_back(Json{{"mean", to_json(Eigen::VectorXd(comp.mean))},
                                {"cov", to_json(Eigen::MatrixXd(comp.cov))},
                                {"property_label", comp.property_label},
                                {"weight", comp.weight}});
    }
    out["components"] = std::move(components);
    out["planted_proportion"] = dataset.planted_proportion;
  }
  return out;
}

Json model_to_json(const ModelSpec& model) {
  return Json{{"schedule", to_json(model.schedule)},
              {"hidden_dims", model.hidden_dims},
              {"time_embed_dim", model.time_embed_dim},
              {"batch_size", model.batch_size},
              {"lr", model.lr},
              {"epochs", model.epochs}};
}

Json sampler_to_json(const SamplerSpec& sampler) {
  Json out{{"id", sampler.id},
           {"kind", sampler_kind_name(sampler.config.kind)}};
  switch (sampler.config.kind) {
    case SamplerKind::kAncestral:
      out["steps"] = sampler.config.n_steps;
      break;
    case SamplerKind::kPc:
      out["steps"] = sampler.config.n_steps;
      out["snr"] = sampler.config.corrector_snr;
      break;
    case SamplerKind::kOde:
      out["rtol"] = sampler.config.ode_rtol;
      out["atol"] = sampler.config.ode_atol;
      break;
    case SamplerKind::kDpm:
      out["steps"] = sampler.config.n_steps;
      out["order"] = sampler.config.dpm_order;
      break;
  }
  return out;
}

Json predicate_to_json(const PropertyPredicate& predicate) {
  Json out{{"id", predicate.id}};
  switch (predicate.kind) {
    case PredicateKind::kCategoricalEquals:
      out["kind"] = "categorical_equals";
      out["column"] = predicate.column;
      out["category"] = predicate.category;
      break;
    case PredicateKind::kCategoricalOneVsRest:
      out["kind"] = "categorical_one_vs_rest";
      out["column"] = predicate.column;
      out["category"] = predicate.category;
      break;
    case PredicateKind::kNumericLessThan:
      out["kind"] = "numeric_less_than";
      out["column"] = predicate.column;
      out["threshold"] = predicate.threshold;
      break;
    case PredicateKind::kNumericRange:
      out["kind"] = "numeric_range";
      out["column"] = predicate.column;
      out["lo"] = predicate.lo;
      out["hi"] = predicate.hi;
      break;
    case PredicateKind::kClassifierBased:
      out["kind"] = "classifier";
      break;
  }
  return out;
}

Json classifier_to_json(const ClassifierConfig& config) {
  return Json{{"hidden_dims", config.hidden_dims},
              {"batch_size", config.batch_size},
              {"lr", config.lr},
              {"epochs", config.epochs}};
}

Json defense_to_json(const DefenseSpec& defense) {
  Json properties = Json::array();
  for (const DefendedProperty& prop : defense.properties) {
    Json entry{{"id", prop.property_id},
               {"classes", prop.class_ids},
               {"gammas", prop.gammas}};
    entry["alpha"] = prop.alpha ? Json(*prop.alpha) : Json(nullptr);
    entry["step"] = prop.step ? Json(*prop.step) : Json(nullptr);
    properties.push_back(std::move(entry));
  }
  return Json{{"sample_count", defense.sample_count},
              {"pairs", defense.pairs},
              {"svm", Json{{"lambda", defense.svm.lambda},
                           {"epochs", defense.svm.epochs}}},
              {"properties", std::move(properties)}};
}

Json metrics_to_json(const MetricsSpec& metrics) {
  return Json{{"f1_label", metrics.f1_label},
              {"frechet", metrics.frechet},
              {"n", metrics.n}};
}

const Column& find_column(const TabularSchema& schema,
                          const std::string& name,
                          const std::string& predicate_id) {
  for (const Column& col : schema.columns) {
    if (col.name == name) {
      return col;
    }
  }
  throw InputError("predicate '" + predicate_id +
                   "' references unknown column '" + name + "'");
}

void validate_tabular_predicate(const PropertyPredicate& predicate,
                                const TabularSchema& schema) {
  switch (predicate.kind) {
    case PredicateKind::kCategoricalEquals:
    case PredicateKind::kCategoricalOneVsRest: {
      const Column& col = find_column(schema, predicate.column, predicate.id);
      if (col.kind != ColumnKind::kCategorical) {
        throw InputError("predicate '" + predicate.id + "': column '" +
                         predicate.column + "' is not categorical");
      }
      if (std::find(col.categories.begin(), col.categories.end(),
                    predicate.category) == col.categories.end()) {
        throw InputError("predicate '" + predicate.id + "': column '" +
                         predicate.column + "' has no category '" +
                         predicate.category + "'");
      }
      break;
    }
    case PredicateKind::kNumericLessThan:
    case PredicateKind::kNumericRange: {
      const Column& col = find_column(schema, predicate.column, predicate.id);
      if (col.kind != ColumnKind::kNumeric) {
        throw InputError("predicate '" + predicate.id + "': column '" +
                         predicate.column + "' is not numeric");
      }
      break;
    }
    case PredicateKind::kClassifierBased:
      throw InputError("predicate '" + predicate.id +
                       "': classifier predicates need a 2D dataset");
  }
}

}  // namespace

void ExperimentManifest::validate() const {
  if (name.empty()) {
    throw InputError("manifest: 'name' must not be empty");
  }
  if (output_dir.empty()) {
    throw InputError("manifest: 'output_dir' must not be empty");
  }
  if (sample_count < 1) {
    throw InputError("manifest: 'sample_count' must be positive");
  }
  if (dataset.sizes.train < 1 || dataset.sizes.shadow < 1 ||
      dataset.sizes.test < 1) {
    throw InputError("manifest: every dataset split needs at least one row");
  }
  if (is_tabular()) {
    dataset.tabular.validate();
    if (model.schedule.kind != ScheduleKind::kVpDiscrete) {
      throw ConfigError(
          "manifest: tabular models train on a discrete VP schedule");
    }
    if (!samplers.empty()) {
      throw InputError(
          "manifest: tabular pipelines use the built-in ancestral sampler; "
          "leave 'samplers' empty");
    }
  } else {
    dataset.mixture.validate();
    if (dataset.planted_proportion <= 0.0 ||
        dataset.planted_proportion >= 1.0) {
      throw InputError(
          "manifest: 'planted_proportion' must lie strictly inside (0, 1)");
    }
    if (samplers.empty()) {
      throw InputError("manifest: 2D pipelines need at least one sampler");
    }
    const NoiseSchedule reference = [&] {
      switch (model.schedule.kind) {
        case ScheduleKind::kVpDiscrete:
          return NoiseSchedule::vp_discrete(model.schedule.steps);
        case ScheduleKind::kVeDiscrete:
          return NoiseSchedule::ve_discrete(model.schedule.steps);
        case ScheduleKind::kVpContinuous:
          return NoiseSchedule::vp_continuous();
        case ScheduleKind::kVeContinuous:
          return NoiseSchedule::ve_continuous();
      }
      throw ConfigError("unknown schedule kind");
    }();
    if (model.schedule.beta_min != reference.beta_min ||
        model.schedule.beta_max != reference.beta_max ||
        model.schedule.sigma_min != reference.sigma_min ||
        model.schedule.sigma_max != reference.sigma_max) {
      throw ConfigError(
          "manifest: 2D training fixes the noise range; customize 'steps' "
          "only");
    }
    std::set<std::string> sampler_ids;
    for (const SamplerSpec& sampler : samplers) {
      if (sampler.id.empty()) {
        throw InputError("manifest: sampler ids must not be empty");
      }
      if (!sampler_ids.insert(sampler.id).second) {
        throw InputError("manifest: duplicate sampler id '" + sampler.id +
                         "'");
      }
      sampler.config.validate();
    }
  }
  model.schedule.validate();
  if (model.hidden_dims.empty() || model.time_embed_dim < 1 ||
      model.batch_size < 1 || model.lr <= 0.0 || model.epochs < 1) {
    throw InputError("manifest: model hyperparameters out of range");
  }
  if (predicates.empty()) {
    throw InputError("manifest: at least one predicate is required");
  }
  std::set<std::string> predicate_ids;
  for (const PropertyPredicate& predicate : predicates) {
    if (predicate.id.empty()) {
      throw InputError("manifest: predicate ids must not be empty");
    }
    if (!predicate_ids.insert(predicate.id).second) {
      throw InputError("manifest: duplicate predicate id '" + predicate.id +
                       "'");
    }
    if (is_tabular()) {
      validate_tabular_predicate(predicate, dataset.tabular.schema);
    } else if (predicate.kind != PredicateKind::kClassifierBased) {
      throw InputError("predicate '" + predicate.id +
                       "': 2D pipelines support classifier predicates only");
    }
  }
  for (std::size_t i = 0; i < stability_counts.size(); ++i) {
    if (stability_counts[i] < 1 ||
        (i > 0 && stability_counts[i] <= stability_counts[i - 1])) {
      throw InputError(
          "manifest: 'stability_counts' must be positive and increasing");
    }
  }
  if (metrics.n < 1) {
    throw InputError("manifest: 'metrics.n' must be positive");
  }
  if (!metrics.f1_label.empty()) {
    if (!is_tabular()) {
      throw InputError("manifest: F1 needs a tabular dataset");
    }
    const Column& col =
        find_column(dataset.tabular.schema, metrics.f1_label, "metrics.f1");
    if (col.kind != ColumnKind::kCategorical) {
      throw InputError("manifest: 'metrics.f1_label' must be categorical");
    }
  }
  if (defense.enabled()) {
    if (defense.sample_count < 1) {
      throw InputError("manifest: 'defense.sample_count' must be positive");
    }
    if (defense.pairs < 1) {
      throw InputError("manifest: 'defense.pairs' must be positive");
    }
    if (defense.svm.lambda <= 0.0 || defense.svm.epochs < 1) {
      throw InputError("manifest: defense SVM hyperparameters out of range");
    }
    DefenseConfig config;
    config.properties = defense.properties;
    config.validate();
    if (!is_tabular() &&
        (defense.properties.size() != 1 ||
         defense.properties.front().class_ids.size() != 1)) {
      throw InputError(
          "manifest: 2D pipelines defend the single classifier property; "
          "joint defenses need distinct labelings and run through the "
          "library API");
    }
    for (const DefendedProperty& prop : defense.properties) {
      for (const std::string& class_id : prop.class_ids) {
        if (!predicate_ids.count(class_id)) {
          throw InputError("defense property '" + prop.property_id +
                           "' references unknown predicate '" + class_id +
                           "'");
        }
      }
      if (prop.step && is_tabular() &&
          (*prop.step < 0 || *prop.step > model.schedule.steps)) {
        throw InputError("defense property '" + prop.property_id +
                         "': step outside the sampling grid");
      }
    }
  }
}

ExperimentManifest manifest_from_json(const Json& j) {
  ExperimentManifest out;
  out.name = require_string(j, "name", "manifest");
  out.seed = require_u64(j, "seed", "manifest");
  out.output_dir = require_string(j, "output_dir", "manifest");
  out.dataset = dataset_from_json(require_key(j, "dataset", "manifest"));
  out.model = model_from_json(require_key(j, "model", "manifest"),
                              out.dataset);
  if (j.contains("samplers") && !j["samplers"].is_null()) {
    const Json& samplers = j["samplers"];
    if (!samplers.is_array()) {
      throw InputError("manifest: 'samplers' must be an array");
    }
    for (const Json& entry : samplers) {
      out.samplers.push_back(sampler_from_json(entry));
    }
  }
  out.sample_count = require_int(j, "sample_count", "manifest");
  const Json& predicates = require_key(j, "predicates", "manifest");
  if (!predicates.is_array()) {
    throw InputError("manifest: 'predicates' must be an array");
  }
  for (const Json& entry : predicates) {
    out.predicates.push_back(predicate_from_json(entry, out.dataset));
  }
  out.stability_counts = optional_int_list(j, "stability_counts", "manifest");
  if (j.contains("classifier") && !j["classifier"].is_null()) {
    out.classifier = classifier_from_json(j["classifier"]);
  }
  if (j.contains("defense") && !j["defense"].is_null()) {
    out.defense = defense_from_json(j["defense"]);
  }
  out.metrics = metrics_from_json(
      j.contains("metrics") ? j["metrics"] : Json(), out.dataset);
  return out;
}

Json to_json(const ExperimentManifest& manifest) {
  Json out{{"name", manifest.name},
           {"seed", manifest.seed},
           {"output_dir", manifest.output_dir},
           {"dataset", dataset_to_json(manifest.dataset)},
           {"model", model_to_json(manifest.model)},
           {"sample_count", manifest.sample_count},
           {"metrics", metrics_to_json(manifest.metrics)}};
  Json predicates = Json::array();
  for (const PropertyPredicate& predicate : manifest.predicates) {
    predicates.push_back(predicate_to_json(predicate));
  }
  out["predicates"] = std::move(predicates);
  if (!manifest.samplers.empty()) {
    Json samplers = Json::array();
    for (const SamplerSpec& sampler : manifest.samplers) {
      samplers.push_back(sampler_to_json(sampler));
    }
    out["samplers"] = std::move(samplers);
  }
  if (!manifest.stability_counts.empty()) {
    out["stability_counts"] = manifest.stability_counts;
  }
  if (!manifest.is_tabular()) {
    out["classifier"] = classifier_to_json(manifest.classifier);
  }
  if (manifest.defense.enabled()) {
    out["defense"] = defense_to_json(manifest.defense);
  }
  return out;
}

ExperimentManifest load_manifest(const std::string& path) {
  ExperimentManifest manifest = manifest_from_json(read_json_file(path));
  manifest.validate();
  return manifest;
}

std::string manifest_hash(const ExperimentManifest& manifest) {
  return fnv1a_hex(to_json(manifest).dump());
}

}  // namespace prisampler
