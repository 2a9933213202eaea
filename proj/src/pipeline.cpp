#include "prisampler/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prisampler/attack.hpp"
#include "prisampler/defense.hpp"
#include "prisampler/errors.hpp"
#include "prisampler/eval.hpp"
#include "prisampler/samplers.hpp"
#include "prisampler/serialize.hpp"

namespace prisampler {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDatasetStream = 10;
constexpr std::uint64_t kTrainStream = 20;
constexpr std::uint64_t kSampleStream = 30;
constexpr std::uint64_t kClassifierStream = 40;
constexpr std::uint64_t kStabilityStream = 45;
constexpr std::uint64_t kDefendFitStream = 50;
constexpr std::uint64_t kDefendSampleStream = 60;

constexpr int kOdeInterceptGrid = 1000;
constexpr double kDefaultDefenseDepth = 0.7;

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::optional<double> parse_optional_double(const std::string& text) {
  if (text.empty()) {
    return std::nullopt;
  }
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw InputError("expected a number, found '" + text + "'");
  }
  return value;
}

double parse_double(const std::string& text, const std::string& where) {
  std::optional<double> value = parse_optional_double(text);
  if (!value) {
    throw InputError(where + ": empty numeric field");
  }
  return *value;
}

// Relative artifact paths; the run directory layout is part of the contract.
const char* kManifestFile = "manifest.json";
const char* kTrainCsv = "dataset/train.csv";
const char* kShadowCsv = "dataset/shadow.csv";
const char* kTestCsv = "dataset/test.csv";
const char* kGroundTruth = "dataset/ground_truth.json";
const char* kModelFile = "model/model.json";
const char* kAttackReport = "attack/attack_report.csv";
const char* kStabilityFile = "attack/stability.json";
const char* kUtilityReport = "eval/utility_report.csv";

std::string samples_csv(const std::string& sampler_id) {
  return "samples/" + sampler_id + "/samples.csv";
}

std::string defended_csv(const std::string& sampler_id) {
  return "defended/" + sampler_id + "/samples.csv";
}

std::string defense_report_csv(const std::string& sampler_id) {
  return "defended/" + sampler_id + "/defense_report.csv";
}

std::string sanitize_component(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '.';
    out += keep ? c : '_';
  }
  return out.empty() ? "_" : out;
}

// Sampler ids used by the defense stages: tabular pipelines have exactly the
// built-in sampler, 2D pipelines fit one hyperplane family per sampler
// because intercept steps index each sampler's own grid.
std::vector<std::string> defense_sampler_ids(const ExperimentManifest& m) {
  if (m.is_tabular()) {
    return {tabular_sampler_id()};
  }
  std::vector<std::string> ids;
  for (const SamplerSpec& sampler : m.samplers) {
    ids.push_back(sampler.id);
  }
  return ids;
}

std::string hyperplane_file(const std::string& sampler_id,
                            const std::string& class_id) {
  return "defense/" + sampler_id + "/" + sanitize_component(class_id) +
         ".json";
}

int sampler_grid(const SamplerConfig& config) {
  switch (config.kind) {
    case SamplerKind::kAncestral:
    case SamplerKind::kPc:
      return config.n_steps;
    case SamplerKind::kDpm:
      return dpm_node_count(config.n_steps, config.dpm_order);
    case SamplerKind::kOde:
      return kOdeInterceptGrid;
  }
  throw ConfigError("unknown sampler kind");
}

int defense_step(const ExperimentManifest& manifest,
                 const DefendedProperty& prop, const SamplerConfig& config) {
  if (prop.step) {
    return *prop.step;
  }
  if (manifest.is_tabular()) {
    return 0;
  }
  return static_cast<int>(kDefaultDefenseDepth * sampler_grid(config));
}

const PropertyPredicate& find_predicate(const ExperimentManifest& manifest,
                                        const std::string& id) {
  for (const PropertyPredicate& predicate : manifest.predicates) {
    if (predicate.id == id) {
      return predicate;
    }
  }
  throw InputError("manifest has no predicate '" + id + "'");
}

// Stage bookkeeping: known inputs (with the stage that produces each one),
// known outputs, and the provenance no-op check.
struct StageContext {
  const ExperimentManifest* manifest = nullptr;
  fs::path run_dir;
  std::string stage;
  std::string stage_dir;
  std::string hash;
  bool force = false;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> outputs;

  fs::path abs(const std::string& rel) const { return run_dir / rel; }
};

Json provenance_block(const StageContext& ctx) {
  return Json{{"manifest_hash", ctx.hash},
              {"seed", ctx.manifest->seed}};
}

fs::path provenance_path(const StageContext& ctx) {
  return ctx.run_dir / ctx.stage_dir / "provenance.json";
}

void require_inputs(const StageContext& ctx) {
  for (const auto& [rel, producer] : ctx.inputs) {
    if (!fs::exists(ctx.abs(rel))) {
      throw InputError("stage '" + ctx.stage + "': missing upstream artifact '" +
                       rel + "'; run '" + producer + "' first");
    }
  }
}

bool stage_current(const StageContext& ctx) {
  const fs::path path = provenance_path(ctx);
  if (!fs::exists(path)) {
    return false;
  }
  Json prov;
  try {
    prov = read_json_file(path.string());
  } catch (const InputError&) {
    return false;
  }
  if (!prov.is_object() ||
      optional_int(prov, "format_version", -1) != kArtifactFormatVersion ||
      !prov.contains("manifest_hash") || prov["manifest_hash"] != ctx.hash ||
      !prov.contains("seed") ||
      prov["seed"] != Json(ctx.manifest->seed)) {
    return false;
  }
  const Json inputs = prov.value("inputs", Json::object());
  for (const auto& [rel, producer] : ctx.inputs) {
    (void)producer;
    if (!inputs.contains(rel) ||
        inputs[rel] != Json(hash_file(ctx.abs(rel).string()))) {
      return false;
    }
  }
  const Json outputs = prov.value("outputs", Json::object());
  for (const std::string& rel : ctx.outputs) {
    if (!outputs.contains(rel) || !fs::exists(ctx.abs(rel)) ||
        outputs[rel] != Json(hash_file(ctx.abs(rel).string()))) {
      return false;
    }
  }
  return true;
}

void write_manifest_copy(const StageContext& ctx) {
  const fs::path path = ctx.run_dir / kManifestFile;
  const std::string body = to_json(*ctx.manifest).dump(2) + "\n";
  if (fs::exists(path)) {
    std::ifstream existing(path);
    std::ostringstream current;
    current << existing.rdbuf();
    if (current.str() == body) {
      return;
    }
  }
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  file << body;
}

// Returns false when the stage is already complete and untouched, in which
// case the caller must not redo any work.
bool begin_stage(StageContext& ctx) {
  ctx.manifest->validate();
  ctx.hash = manifest_hash(*ctx.manifest);
  std::error_code ec;
  fs::create_directories(ctx.run_dir, ec);
  if (ec) {
    throw InputError("cannot create run directory '" + ctx.run_dir.string() +
                     "': " + ec.message());
  }
  write_manifest_copy(ctx);
  require_inputs(ctx);
  if (!ctx.force && stage_current(ctx)) {
    return false;
  }
  for (const std::string& rel : ctx.outputs) {
    fs::create_directories(ctx.abs(rel).parent_path());
  }
  return true;
}

void finish_stage(const StageContext& ctx) {
  Json inputs = Json::object();
  for (const auto& [rel, producer] : ctx.inputs) {
    (void)producer;
    inputs[rel] = hash_file(ctx.abs(rel).string());
  }
  Json outputs = Json::object();
  for (const std::string& rel : ctx.outputs) {
    outputs[rel] = hash_file(ctx.abs(rel).string());
  }
  Json prov{{"format_version", kArtifactFormatVersion},
            {"stage", ctx.stage},
            {"manifest_hash", ctx.hash},
            {"seed", ctx.manifest->seed},
            {"inputs", std::move(inputs)},
            {"outputs", std::move(outputs)}};
  write_json_file(provenance_path(ctx).string(), prov);
}

StageContext make_context(const ExperimentManifest& manifest,
                          const StageOptions& options,
                          const std::string& stage,
                          const std::string& stage_dir) {
  StageContext ctx;
  ctx.manifest = &manifest;
  ctx.run_dir = options.run_dir.empty() ? fs::path(manifest.output_dir)
                                        : fs::path(options.run_dir);
  ctx.stage = stage;
  ctx.stage_dir = stage_dir;
  ctx.force = options.force;
  return ctx;
}

void write_points_csv(const fs::path& path, const Eigen::MatrixXd& points,
                      const Eigen::VectorXi* labels) {
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  file << (labels ? "x,y,label\n" : "x,y\n");
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    file << format_value(points(i, 0)) << ',' << format_value(points(i, 1));
    if (labels) {
      file << ',' << (*labels)[i];
    }
    file << '\n';
  }
  if (!file) {
    throw InputError("write to '" + path.string() + "' failed");
  }
}

struct PointsFile {
  Eigen::MatrixXd points;
  Eigen::VectorXi labels;
  bool has_labels = false;
};

PointsFile read_points_csv(const fs::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw InputError("cannot read '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(file, line)) {
    throw InputError("no rows in '" + path.string() + "'");
  }
  PointsFile out;
  if (line == "x,y,label") {
    out.has_labels = true;
  } else if (line != "x,y") {
    throw InputError("'" + path.string() + "' is not a 2D points file");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<int> labels;
  while (std::getline(file, line)) {
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> cells = csv_split(line);
    if (cells.size() != (out.has_labels ? 3u : 2u)) {
      throw InputError("'" + path.string() + "': malformed row '" + line +
                       "'");
    }
    xs.push_back(parse_double(cells[0], path.string()));
    ys.push_back(parse_double(cells[1], path.string()));
    if (out.has_labels) {
      labels.push_back(static_cast<int>(
          parse_double(cells[2], path.string())));
    }
  }
  out.points.resize(static_cast<Eigen::Index>(xs.size()), 2);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.points(static_cast<Eigen::Index>(i), 0) = xs[i];
    out.points(static_cast<Eigen::Index>(i), 1) = ys[i];
  }
  if (out.has_labels) {
    out.labels.resize(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out.labels[static_cast<Eigen::Index>(i)] = labels[i];
    }
  }
  return out;
}

TabularModel load_tabular_model(const StageContext& ctx) {
  return tabular_model_from_json(read_json_file(ctx.abs(kModelFile).string()));
}

ContinuousModel load_continuous_model(const StageContext& ctx) {
  return continuous_model_from_json(
      read_json_file(ctx.abs(kModelFile).string()));
}

PropertyClassifier shadow_classifier(const ExperimentManifest& manifest,
                                     const StageContext& ctx) {
  const PointsFile shadow = read_points_csv(ctx.abs(kShadowCsv));
  if (!shadow.has_labels) {
    throw InputError("'" + std::string(kShadowCsv) + "' lost its labels");
  }
  RngStream rng(manifest.seed, kClassifierStream);
  return train_property_classifier(shadow.points, shadow.labels,
                                   manifest.classifier, rng);
}

PropertyPredicate bind_classifier(const PropertyPredicate& predicate,
                                  const PropertyClassifier& classifier) {
  PropertyPredicate bound = PropertyPredicate::classifier_based(classifier);
  bound.id = predicate.id;
  return bound;
}

TabularDataset head_rows(const TabularDataset& data, int n) {
  TabularDataset out;
  out.schema = data.schema;
  out.raw = data.raw.topRows(n);
  out.split.assign(static_cast<std::size_t>(n), SplitTag::kTrain);
  return out;
}

Json load_ground_truth(const StageContext& ctx) {
  Json gt = read_json_file(ctx.abs(kGroundTruth).string());
  if (optional_int(gt, "format_version", -1) != kArtifactFormatVersion) {
    throw InputError("'" + std::string(kGroundTruth) +
                     "' has an unsupported format version");
  }
  return gt;
}

double planted_for(const Json& ground_truth, const std::string& predicate_id) {
  const Json& planted = require_key(ground_truth, "planted", "ground truth");
  if (!planted.contains(predicate_id)) {
    throw InputError("ground truth has no entry for predicate '" +
                     predicate_id + "'; rerun 'dataset-gen'");
  }
  return planted[predicate_id].get<double>();
}

void write_attack_csv(const fs::path& path,
                      const std::vector<AttackReport>& rows) {
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  file << "predicate_id,model_id,sampler_id,sample_count,inferred,"
          "real_proportion,difference\n";
  for (const AttackReport& row : rows) {
    file << csv_quote(row.predicate_id) << ',' << csv_quote(row.model_id)
         << ',' << csv_quote(row.sampler_id) << ',' << row.sample_count << ','
         << format_value(row.inferred) << ','
         << (row.real_proportion ? format_value(*row.real_proportion) : "")
         << ','
         << (row.difference ? format_value(*row.difference) : "") << '\n';
  }
}

struct DefenseRow {
  std::string property_id;
  std::string class_id;
  double gamma = 0.0;
  double inferred = 0.0;
  double difference = 0.0;
};

void write_defense_csv(const fs::path& path,
                       const std::vector<DefenseRow>& rows) {
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  file << "property_id,class_id,gamma,inferred,difference\n";
  for (const DefenseRow& row : rows) {
    file << csv_quote(row.property_id) << ',' << csv_quote(row.class_id)
         << ',' << format_value(row.gamma) << ','
         << format_value(row.inferred) << ','
         << format_value(row.difference) << '\n';
  }
}

void write_utility_csv(const fs::path& path,
                       const std::vector<UtilityReport>& rows) {
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  file << "metric,value,dataset_id,model_id,sampler_id,n_used\n";
  for (const UtilityReport& row : rows) {
    file << csv_quote(row.metric) << ',' << format_value(row.value) << ','
         << csv_quote(row.dataset_id) << ',' << csv_quote(row.model_id) << ','
         << csv_quote(row.sampler_id) << ',' << row.n_used << '\n';
  }
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path,
                                                    const std::string& header) {
  std::ifstream file(path);
  if (!file) {
    throw InputError("cannot read '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(file, line) || line != header) {
    throw InputError("'" + path.string() +
                     "' does not match the expected column set");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(file, line)) {
    if (!line.empty()) {
      rows.push_back(csv_split(line));
    }
  }
  return rows;
}

}  // namespace

std::string tabular_sampler_id() { return "ancestral"; }

void cmd_dataset_gen(const ExperimentManifest& manifest,
                     const StageOptions& options) {
  StageContext ctx = make_context(manifest, options, "dataset-gen", "dataset");
  ctx.outputs = {kTrainCsv, kShadowCsv, kTestCsv, kGroundTruth};
  if (!begin_stage(ctx)) {
    return;
  }
  RngStream rng(manifest.seed, kDatasetStream);
  Json planted = Json::object();
  Json realized = Json::object();
  if (manifest.is_tabular()) {
    RngStream train_rng = rng.split(0);
    RngStream shadow_rng = rng.split(1);
    RngStream test_rng = rng.split(2);
    const TabularGenSpec& spec = manifest.dataset.tabular;
    TabularDataset train =
        generate_tabular(spec, manifest.dataset.sizes.train, train_rng);
    TabularDataset shadow =
        generate_tabular(spec, manifest.dataset.sizes.shadow, shadow_rng);
    TabularDataset test =
        generate_tabular(spec, manifest.dataset.sizes.test, test_rng);
    write_csv(ctx.abs(kTrainCsv).string(), train);
    write_csv(ctx.abs(kShadowCsv).string(), shadow);
    write_csv(ctx.abs(kTestCsv).string(), test);
    for (const PropertyPredicate& predicate : manifest.predicates) {
      planted[predicate.id] = planted_proportion(spec, predicate);
      realized[predicate.id] = infer_proportion(train, predicate);
    }
  } else {
    RngStream train_rng = rng.split(0);
    RngStream shadow_rng = rng.split(1);
    RngStream test_rng = rng.split(2);
    const MixtureSpec& mixture = manifest.dataset.mixture;
    const double target = manifest.dataset.planted_proportion;
    Dataset2d train = make_dataset(mixture, manifest.dataset.sizes.train,
                                   target, train_rng);
    Dataset2d shadow = make_dataset(mixture, manifest.dataset.sizes.shadow,
                                    target, shadow_rng);
    Dataset2d test = make_dataset(mixture, manifest.dataset.sizes.test,
                                  target, test_rng);
    write_points_csv(ctx.abs(kTrainCsv), train.points, &train.labels);
    write_points_csv(ctx.abs(kShadowCsv), shadow.points, &shadow.labels);
    write_points_csv(ctx.abs(kTestCsv), test.points, &test.labels);
    const double fraction =
        train.labels.cast<double>().mean();
    for (const PropertyPredicate& predicate : manifest.predicates) {
      planted[predicate.id] = target;
      realized[predicate.id] = fraction;
    }
  }
  Json gt{{"format_version", kArtifactFormatVersion},
          {"provenance", provenance_block(ctx)},
          {"dataset_kind", manifest.is_tabular() ? "tabular" : "continuous2d"},
          {"sizes", Json{{"train", manifest.dataset.sizes.train},
                         {"shadow", manifest.dataset.sizes.shadow},
                         {"test", manifest.dataset.sizes.test}}},
          {"planted", std::move(planted)},
          {"realized", std::move(realized)}};
  write_json_file(ctx.abs(kGroundTruth).string(), gt);
  finish_stage(ctx);
}

void cmd_train(const ExperimentManifest& manifest,
               const StageOptions& options) {
  StageContext ctx = make_context(manifest, options, "train", "model");
  ctx.inputs = {{kTrainCsv, "dataset-gen"}};
  ctx.outputs = {kModelFile};
  if (!begin_stage(ctx)) {
    return;
  }
  RngStream rng(manifest.seed, kTrainStream);
  Json doc;
  if (manifest.is_tabular()) {
    const TabularDataset train = ingest_csv(
        ctx.abs(kTrainCsv).string(), manifest.dataset.tabular.schema);
    TabTrainConfig config;
    config.hidden_dims = manifest.model.hidden_dims;
    config.time_embed_dim = manifest.model.time_embed_dim;
    config.batch_size = manifest.model.batch_size;
    config.lr = manifest.model.lr;
    const TabularModel model = train_tabddpm(
        train, config, manifest.model.schedule, manifest.model.epochs, rng);
    doc = to_json(model);
  } else {
    const PointsFile train = read_points_csv(ctx.abs(kTrainCsv));
    ContTrainConfig config;
    config.hidden_dims = manifest.model.hidden_dims;
    config.time_embed_dim = manifest.model.time_embed_dim;
    config.batch_size = manifest.model.batch_size;
    config.lr = manifest.model.lr;
    config.epochs = manifest.model.epochs;
    config.steps = manifest.model.schedule.steps;
    const ContinuousModel model = train_continuous_model(
        train.points, manifest.model.schedule.kind, config, rng);
    doc = to_json(model);
  }
  doc["provenance"] = provenance_block(ctx);
  write_json_file(ctx.abs(kModelFile).string(), doc);
  finish_stage(ctx);
}

void cmd_sample(const ExperimentManifest& manifest,
                const StageOptions& options) {
  StageContext ctx = make_context(manifest, options, "sample", "samples");
  ctx.inputs = {{kModelFile, "train"}};
  for (const std::string& id : defense_sampler_ids(manifest)) {
    ctx.outputs.push_back(samples_csv(id));
  }
  if (!begin_stage(ctx)) {
    return;
  }
  RngStream rng(manifest.seed, kSampleStream);
  if (manifest.is_tabular()) {
    const TabularModel model = load_tabular_model(ctx);
    RngStream sampler_rng = rng.split(0);
    const TabularDataset samples =
        sample_tabular(model, manifest.sample_count, nullptr, sampler_rng);
    write_csv(ctx.abs(samples_csv(tabular_sampler_id())).string(), samples);
  } else {
    const ContinuousModel model = load_continuous_model(ctx);
    const NetScoreModel score = model.score_model();
    for (std::size_t i = 0; i < manifest.samplers.size(); ++i) {
      RngStream sampler_rng = rng.split(i);
      const Eigen::MatrixXd points =
          draw_samples(score, model.schedule, manifest.sample_count,
                       manifest.samplers[i].config, nullptr, sampler_rng);
      write_points_csv(ctx.abs(samples_csv(manifest.samplers[i].id)), points,
                       nullptr);
    }
  }
  finish_stage(ctx);
}

void cmd_attack(const ExperimentManifest& manifest,
                const StageOptions& options) {
  StageContext ctx = make_context(manifest, options, "attack", "attack");
  ctx.inputs = {{kGroundTruth, "dataset-gen"}};
  for (const std::string& id : defense_sampler_ids(manifest)) {
    ctx.inputs.emplace_back(samples_csv(id), "sample");
  }
  if (!manifest.is_tabular()) {
    ctx.inputs.emplace_back(kShadowCsv, "dataset-gen");
  }
  if (!manifest.stability_counts.empty()) {
    ctx.inputs.emplace_back(kModelFile, "train");
  }
  ctx.outputs = {kAttackReport};
  if (!manifest.stability_counts.empty()) {
    ctx.outputs.push_back(kStabilityFile);
  }
  if (!begin_stage(ctx)) {
    return;
  }
  const Json ground_truth = load_ground_truth(ctx);
  std::vector<AttackReport> rows;
  Json stability_series = Json::array();
  if (manifest.is_tabular()) {
    const TabularDataset samples =
        ingest_csv(ctx.abs(samples_csv(tabular_sampler_id())).string(),
                   manifest.dataset.tabular.schema);
    for (const PropertyPredicate& predicate : manifest.predicates) {
      const double real = planted_for(ground_truth, predicate.id);
      rows.push_back(run_attack(samples, predicate, real, manifest.name,
                                tabular_sampler_id()));
    }
    if (!manifest.stability_counts.empty()) {
      const TabularModel model = load_tabular_model(ctx);
      RngStream rng(manifest.seed, kStabilityStream);
      for (std::size_t p = 0; p < manifest.predicates.size(); ++p) {
        RngStream curve_rng = rng.split(p);
        const std::vector<StabilityPoint> curve = stability_curve(
            model, manifest.predicates[p], manifest.stability_counts,
            curve_rng);
        Json points = Json::array();
        for (const StabilityPoint& point : curve) {
          points.push_back(Json::array({point.m, point.inferred}));
        }
        stability_series.push_back(
            Json{{"predicate", manifest.predicates[p].id},
                 {"sampler", tabular_sampler_id()},
                 {"real", planted_for(ground_truth,
                                      manifest.predicates[p].id)},
                 {"points", std::move(points)}});
      }
    }
  } else {
    const PropertyClassifier classifier = shadow_classifier(manifest, ctx);
    std::optional<ContinuousModel> model;
    if (!manifest.stability_counts.empty()) {
      model = load_continuous_model(ctx);
    }
    RngStream stability_rng(manifest.seed, kStabilityStream);
    for (std::size_t i = 0; i < manifest.samplers.size(); ++i) {
      const SamplerSpec& sampler = manifest.samplers[i];
      const PointsFile samples =
          read_points_csv(ctx.abs(samples_csv(sampler.id)));
      for (std::size_t p = 0; p < manifest.predicates.size(); ++p) {
        const PropertyPredicate bound =
            bind_classifier(manifest.predicates[p], classifier);
        const double real = planted_for(ground_truth, bound.id);
        rows.push_back(
            run_attack(samples.points, bound, real, manifest.name,
                       sampler.id));
        if (model) {
          RngStream curve_rng = stability_rng.split(i).split(p);
          const std::vector<StabilityPoint> curve =
              stability_curve(*model, sampler.config, bound,
                              manifest.stability_counts, curve_rng);
          Json points = Json::array();
          for (const StabilityPoint& point : curve) {
            points.push_back(Json::array({point.m, point.inferred}));
          }
          stability_series.push_back(Json{{"predicate", bound.id},
                                          {"sampler", sampler.id},
                                          {"real", real},
                                          {"points", std::move(points)}});
        }
      }
    }
  }
  write_attack_csv(ctx.abs(kAttackReport), rows);
  if (!manifest.stability_counts.empty()) {
    Json doc{{"format_version", kArtifactFormatVersion},
             {"provenance", provenance_block(ctx)},
             {"series", std::move(stability_series)}};
    write_json_file(ctx.abs(kStabilityFile).string(), doc);
  }
  finish_stage(ctx);
}

void cmd_defend_fit(const ExperimentManifest& manifest,
                    const StageOptions& options) {
  if (!manifest.defense.enabled()) {
    throw InputError("manifest has no 'defense' block; nothing to fit");
  }
  StageContext ctx = make_context(manifest, options, "defend-fit", "defense");
  ctx.inputs = {{kModelFile, "train"}};
  if (!manifest.is_tabular()) {
    ctx.inputs.emplace_back(kShadowCsv, "dataset-gen");
  }
  const std::vector<std::string> sampler_ids = defense_sampler_ids(manifest);
  for (const std::string& sid : sampler_ids) {
    for (const DefendedProperty& prop : manifest.defense.properties) {
      for (const std::string& class_id : prop.class_ids) {
        ctx.outputs.push_back(hyperplane_file(sid, class_id));
      }
    }
  }
  if (!begin_stage(ctx)) {
    return;
  }
  RngStream rng(manifest.seed, kDefendFitStream);
  if (manifest.is_tabular()) {
    const TabularModel model = load_tabular_model(ctx);
    std::size_t class_index = 0;
    for (const DefendedProperty& prop : manifest.defense.properties) {
      const int step = prop.step.value_or(0);
      for (const std::string& class_id : prop.class_ids) {
        const PropertyPredicate& predicate = find_predicate(manifest, class_id);
        RngStream fit_rng = rng.split(class_index++);
        const PairedStates pairs = collect_paired_states(
            model, manifest.defense.pairs, step, predicate, fit_rng);
        const Hyperplane plane =
            fit_hyperplane(pairs.states, pairs.labels, step, class_id,
                           fit_rng, manifest.defense.svm);
        Json doc = to_json(plane);
        doc["provenance"] = provenance_block(ctx);
        write_json_file(
            ctx.abs(hyperplane_file(tabular_sampler_id(), class_id)).string(),
            doc);
      }
    }
  } else {
    const ContinuousModel model = load_continuous_model(ctx);
    const PropertyClassifier classifier = shadow_classifier(manifest, ctx);
    for (std::size_t i = 0; i < manifest.samplers.size(); ++i) {
      const SamplerSpec& sampler = manifest.samplers[i];
      std::size_t class_index = 0;
      for (const DefendedProperty& prop : manifest.defense.properties) {
        const int step = defense_step(manifest, prop, sampler.config);
        for (const std::string& class_id : prop.class_ids) {
          RngStream fit_rng = rng.split(i).split(class_index++);
          const PairedStates pairs =
              collect_paired_states(model, sampler.config,
                                    manifest.defense.pairs, step, classifier,
                                    fit_rng);
          const Hyperplane plane =
              fit_hyperplane(pairs.states, pairs.labels, step, class_id,
                             fit_rng, manifest.defense.svm);
          Json doc = to_json(plane);
          doc["provenance"] = provenance_block(ctx);
          write_json_file(ctx.abs(hyperplane_file(sampler.id, class_id)).string(),
                          doc);
        }
      }
    }
  }
  finish_stage(ctx);
}

void cmd_defend_sample(const ExperimentManifest& manifest,
                       const StageOptions& options) {
  if (!manifest.defense.enabled()) {
    throw InputError("manifest has no 'defense' block; nothing to sample");
  }
  StageContext ctx =
      make_context(manifest, options, "defend-sample", "defended");
  ctx.inputs = {{kModelFile, "train"}};
  const std::vector<std::string> sampler_ids = defense_sampler_ids(manifest);
  for (const std::string& sid : sampler_ids) {
    for (const DefendedProperty& prop : manifest.defense.properties) {
      for (const std::string& class_id : prop.class_ids) {
        ctx.inputs.emplace_back(hyperplane_file(sid, class_id), "defend-fit");
      }
    }
  }
  if (!manifest.is_tabular()) {
    ctx.inputs.emplace_back(kShadowCsv, "dataset-gen");
  }
  for (const std::string& sid : sampler_ids) {
    ctx.outputs.push_back(defended_csv(sid));
    ctx.outputs.push_back(defense_report_csv(sid));
  }
  if (!begin_stage(ctx)) {
    return;
  }
  DefenseConfig config;
  config.properties = manifest.defense.properties;
  RngStream rng(manifest.seed, kDefendSampleStream);
  if (manifest.is_tabular()) {
    const TabularModel model = load_tabular_model(ctx);
    std::vector<Hyperplane> planes;
    for (const DefendedProperty& prop : manifest.defense.properties) {
      for (const std::string& class_id : prop.class_ids) {
        planes.push_back(hyperplane_from_json(read_json_file(
            ctx.abs(hyperplane_file(tabular_sampler_id(), class_id))
                .string())));
      }
    }
    RngStream sample_rng = rng.split(0);
    const TabularDataset defended = guided_sample(
        model, planes, config, manifest.defense.sample_count, sample_rng);
    write_csv(ctx.abs(defended_csv(tabular_sampler_id())).string(), defended);
    std::vector<DefenseRow> rows;
    for (const DefendedProperty& prop : manifest.defense.properties) {
      for (std::size_t k = 0; k < prop.class_ids.size(); ++k) {
        const PropertyPredicate& predicate =
            find_predicate(manifest, prop.class_ids[k]);
        DefenseRow row;
        row.property_id = prop.property_id;
        row.class_id = prop.class_ids[k];
        row.gamma = prop.gammas[k];
        row.inferred = infer_proportion(defended, predicate);
        row.difference = abs_difference(row.inferred, row.gamma);
        rows.push_back(std::move(row));
      }
    }
    write_defense_csv(ctx.abs(defense_report_csv(tabular_sampler_id())), rows);
  } else {
    const ContinuousModel model = load_continuous_model(ctx);
    const PropertyClassifier classifier = shadow_classifier(manifest, ctx);
    for (std::size_t i = 0; i < manifest.samplers.size(); ++i) {
      const SamplerSpec& sampler = manifest.samplers[i];
      std::vector<Hyperplane> planes;
      for (const DefendedProperty& prop : manifest.defense.properties) {
        for (const std::string& class_id : prop.class_ids) {
          planes.push_back(hyperplane_from_json(read_json_file(
              ctx.abs(hyperplane_file(sampler.id, class_id)).string())));
        }
      }
      RngStream sample_rng = rng.split(i);
      const Eigen::MatrixXd defended =
          guided_sample(model, sampler.config, planes, config,
                        manifest.defense.sample_count, sample_rng);
      write_points_csv(ctx.abs(defended_csv(sampler.id)), defended, nullptr);
      std::vector<DefenseRow> rows;
      for (const DefendedProperty& prop : manifest.defense.properties) {
        for (std::size_t k = 0; k < prop.class_ids.size(); ++k) {
          const PropertyPredicate bound = bind_classifier(
              find_predicate(manifest, prop.class_ids[k]), classifier);
          DefenseRow row;
          row.property_id = prop.property_id;
          row.class_id = prop.class_ids[k];
          row.gamma = prop.gammas[k];
          row.inferred = infer_proportion(defended, bound);
          row.difference = abs_difference(row.inferred, row.gamma);
          rows.push_back(std::move(row));
        }
      }
      write_defense_csv(ctx.abs(defense_report_csv(sampler.id)), rows);
    }
  }
  finish_stage(ctx);
}

void cmd_eval(const ExperimentManifest& manifest,
              const StageOptions& options) {
  StageContext ctx = make_context(manifest, options, "eval", "eval");
  ctx.inputs = {{kTestCsv, "dataset-gen"}};
  if (manifest.is_tabular()) {
    ctx.inputs.emplace_back(kModelFile, "train");
  }
  std::vector<std::pair<std::string, std::string>> sources;
  for (const std::string& sid : defense_sampler_ids(manifest)) {
    sources.emplace_back(sid, samples_csv(sid));
    ctx.inputs.emplace_back(samples_csv(sid), "sample");
  }
  if (manifest.defense.enabled()) {
    for (const std::string& sid : defense_sampler_ids(manifest)) {
      sources.emplace_back("defended:" + sid, defended_csv(sid));
      ctx.inputs.emplace_back(defended_csv(sid), "defend-sample");
    }
  }
  ctx.outputs = {kUtilityReport};
  if (!begin_stage(ctx)) {
    return;
  }
  std::vector<UtilityReport> rows;
  if (manifest.is_tabular()) {
    const TabularModel model = load_tabular_model(ctx);
    const TabularDataset test = ingest_csv(ctx.abs(kTestCsv).string(),
                                           manifest.dataset.tabular.schema);
    const Eigen::MatrixXd test_encoded = model.codec.encode(test.raw);
    for (const auto& [source_id, rel] : sources) {
      const TabularDataset full =
          ingest_csv(ctx.abs(rel).string(), manifest.dataset.tabular.schema);
      const int n_used = std::min(manifest.metrics.n, full.rows());
      const TabularDataset synth = head_rows(full, n_used);
      if (!manifest.metrics.f1_label.empty()) {
        UtilityReport row;
        row.metric = "f1";
        row.value = f1_train_synth_test_real(synth, test,
                                             manifest.metrics.f1_label);
        row.dataset_id = "real_test";
        row.model_id = manifest.name;
        row.sampler_id = source_id;
        row.n_used = n_used;
        rows.push_back(std::move(row));
      }
      if (manifest.metrics.frechet) {
        UtilityReport row;
        row.metric = "frechet";
        row.value =
            frechet_distance(test_encoded, model.codec.encode(synth.raw));
        row.dataset_id = "real_test";
        row.model_id = manifest.name;
        row.sampler_id = source_id;
        row.n_used = n_used;
        rows.push_back(std::move(row));
      }
    }
  } else {
    const PointsFile test = read_points_csv(ctx.abs(kTestCsv));
    for (const auto& [source_id, rel] : sources) {
      const PointsFile synth = read_points_csv(ctx.abs(rel));
      const int n_used = std::min<int>(manifest.metrics.n,
                                       static_cast<int>(synth.points.rows()));
      if (manifest.metrics.frechet) {
        UtilityReport row;
        row.metric = "frechet";
        row.value =
            frechet_distance(test.points, synth.points.topRows(n_used));
        row.dataset_id = "real_test";
        row.model_id = manifest.name;
        row.sampler_id = source_id;
        row.n_used = n_used;
        rows.push_back(std::move(row));
      }
    }
  }
  write_utility_csv(ctx.abs(kUtilityReport), rows);
  finish_stage(ctx);
}

namespace {

struct ReportRow {
  std::string run;
  std::string stage;
  std::string metric;
  std::string subject;
  std::string sampler;
  std::string value;
  std::string reference;
  std::string difference;
  std::string n;
};

void check_version(const Json& doc, const std::string& source) {
  const int version = optional_int(doc, "format_version", -1);
  if (version != kArtifactFormatVersion) {
    throw InputError("conflicting schema versions: '" + source +
                     "' has format version " + std::to_string(version) +
                     ", this tool expects " +
                     std::to_string(kArtifactFormatVersion));
  }
}

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
  std::vector<std::string> names;
  if (!fs::exists(dir)) {
    return names;
  }
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

namespace {

// Report artifacts are cheap to recompute, so idempotence is enforced by
// comparing bytes: an unchanged artifact is left untouched unless forced.
void write_text_if_changed(const fs::path& path, const std::string& body,
                           bool force) {
  if (!force && fs::exists(path)) {
    std::ifstream existing(path);
    std::ostringstream current;
    current << existing.rdbuf();
    if (current.str() == body) {
      return;
    }
  }
  std::ofstream file(path);
  if (!file) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  file << body;
  if (!file) {
    throw InputError("write to '" + path.string() + "' failed");
  }
}

}  // namespace

void cmd_report(const std::vector<std::string>& run_dirs,
                const std::string& out_dir, bool force) {
  if (run_dirs.empty()) {
    throw InputError("report needs at least one run directory");
  }
  std::vector<ReportRow> rows;
  Json diagonal = Json::array();
  Json stability = Json::array();
  Json defense_bars = Json::array();
  Json utility = Json::array();
  for (const std::string& dir : run_dirs) {
    const fs::path run(dir);
    const fs::path manifest_path = run / kManifestFile;
    if (!fs::exists(manifest_path)) {
      throw InputError("run '" + dir +
                       "' has no manifest.json; run the pipeline first");
    }
    const Json manifest_doc = read_json_file(manifest_path.string());
    const std::string run_name =
        require_string(manifest_doc, "name", "run manifest");
    const fs::path gt_path = run / kGroundTruth;
    if (fs::exists(gt_path)) {
      const Json gt = read_json_file(gt_path.string());
      check_version(gt, gt_path.string());
      const Json planted = gt.value("planted", Json::object());
      const Json realized = gt.value("realized", Json::object());
      for (auto it = planted.begin(); it != planted.end(); ++it) {
        ReportRow row;
        row.run = run_name;
        row.stage = "dataset-gen";
        row.metric = "planted_proportion";
        row.subject = it.key();
        row.value = format_value(it.value().get<double>());
        rows.push_back(std::move(row));
      }
      for (auto it = realized.begin(); it != realized.end(); ++it) {
        ReportRow row;
        row.run = run_name;
        row.stage = "dataset-gen";
        row.metric = "realized_proportion";
        row.subject = it.key();
        row.value = format_value(it.value().get<double>());
        rows.push_back(std::move(row));
      }
    }
    const fs::path attack_path = run / kAttackReport;
    if (fs::exists(attack_path)) {
      const auto attack_rows = read_csv_rows(
          attack_path,
          "predicate_id,model_id,sampler_id,sample_count,inferred,"
          "real_proportion,difference");
      for (const std::vector<std::string>& cells : attack_rows) {
        if (cells.size() != 7) {
          throw InputError("'" + attack_path.string() + "': malformed row");
        }
        ReportRow row;
        row.run = run_name;
        row.stage = "attack";
        row.metric = "inferred_proportion";
        row.subject = cells[0];
        row.sampler = cells[2];
        row.value = cells[4];
        row.reference = cells[5];
        row.difference = cells[6];
        row.n = cells[3];
        rows.push_back(std::move(row));
        if (!cells[5].empty()) {
          diagonal.push_back(Json{{"run", run_name},
                                  {"predicate", cells[0]},
                                  {"sampler", cells[2]},
                                  {"real", parse_double(cells[5], "report")},
                                  {"inferred",
                                   parse_double(cells[4], "report")}});
        }
      }
    }
    const fs::path stability_path = run / kStabilityFile;
    if (fs::exists(stability_path)) {
      const Json doc = read_json_file(stability_path.string());
      check_version(doc, stability_path.string());
      for (const Json& series : doc.value("series", Json::array())) {
        Json entry = series;
        entry["run"] = run_name;
        stability.push_back(entry);
        for (const Json& point : series.value("points", Json::array())) {
          ReportRow row;
          row.run = run_name;
          row.stage = "attack";
          row.metric = "stability_proportion";
          row.subject = series.value("predicate", "");
          row.sampler = series.value("sampler", "");
          row.value = format_value(point[1].get<double>());
          row.reference = format_value(series.value("real", 0.0));
          row.n = std::to_string(point[0].get<int>());
          rows.push_back(std::move(row));
        }
      }
    }
    for (const std::string& sid : sorted_subdirs(run / "defended")) {
      const fs::path report_path = run / defense_report_csv(sid);
      if (!fs::exists(report_path)) {
        continue;
      }
      const auto defense_rows = read_csv_rows(
          report_path, "property_id,class_id,gamma,inferred,difference");
      for (const std::vector<std::string>& cells : defense_rows) {
        if (cells.size() != 5) {
          throw InputError("'" + report_path.string() + "': malformed row");
        }
        ReportRow row;
        row.run = run_name;
        row.stage = "defend-sample";
        row.metric = "defended_proportion";
        row.subject = cells[1];
        row.sampler = sid;
        row.value = cells[3];
        row.reference = cells[2];
        row.difference = cells[4];
        rows.push_back(std::move(row));
        defense_bars.push_back(
            Json{{"run", run_name},
                 {"property", cells[0]},
                 {"class", cells[1]},
                 {"sampler", sid},
                 {"gamma", parse_double(cells[2], "report")},
                 {"inferred", parse_double(cells[3], "report")},
                 {"difference", parse_double(cells[4], "report")}});
      }
    }
    const fs::path utility_path = run / kUtilityReport;
    if (fs::exists(utility_path)) {
      const auto utility_rows = read_csv_rows(
          utility_path, "metric,value,dataset_id,model_id,sampler_id,n_used");
      for (const std::vector<std::string>& cells : utility_rows) {
        if (cells.size() != 6) {
          throw InputError("'" + utility_path.string() + "': malformed row");
        }
        ReportRow row;
        row.run = run_name;
        row.stage = "eval";
        row.metric = cells[0];
        row.subject = cells[2];
        row.sampler = cells[4];
        row.value = cells[1];
        row.n = cells[5];
        rows.push_back(std::move(row));
        utility.push_back(Json{{"run", run_name},
                               {"metric", cells[0]},
                               {"sampler", cells[4]},
                               {"value", parse_double(cells[1], "report")},
                               {"n", static_cast<int>(
                                         parse_double(cells[5], "report"))}});
      }
    }
  }
  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    throw InputError("cannot create report directory '" + out_dir +
                     "': " + ec.message());
  }
  std::ostringstream csv;
  csv << "run,stage,metric,subject,sampler,value,reference,difference,n\n";
  for (const ReportRow& row : rows) {
    csv << csv_quote(row.run) << ',' << csv_quote(row.stage) << ','
        << csv_quote(row.metric) << ',' << csv_quote(row.subject) << ','
        << csv_quote(row.sampler) << ',' << row.value << ',' << row.reference
        << ',' << row.difference << ',' << row.n << '\n';
  }
  write_text_if_changed(out / "report.csv", csv.str(), force);
  Json plots{{"format_version", kArtifactFormatVersion},
             {"diagonal", std::move(diagonal)},
             {"stability", std::move(stability)},
             {"defense_bars", std::move(defense_bars)},
             {"utility", std::move(utility)}};
  write_text_if_changed(out / "plots.json", plots.dump(2) + "\n", force);
}

}  // namespace prisampler
