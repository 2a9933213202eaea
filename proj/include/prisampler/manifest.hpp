#ifndef PRISAMPLER_MANIFEST_HPP
#define PRISAMPLER_MANIFEST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prisampler/attack.hpp"
#include "prisampler/continuous2d.hpp"
#include "prisampler/defense.hpp"
#include "prisampler/samplers.hpp"
#include "prisampler/serialize.hpp"
#include "prisampler/tabular.hpp"

namespace prisampler {

enum class DatasetKind { kTabular, kContinuous2d };

struct SplitSizes {
  int train = 0;
  int shadow = 0;
  int test = 0;
};

// Dataset recipe for one experiment: a synthetic tabular generator or a 2D
// Gaussian mixture, plus the split sizes drawn from it.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::kTabular;
  SplitSizes sizes;
  TabularGenSpec tabular;
  MixtureSpec mixture;
  double planted_proportion = 0.5;
};

struct ModelSpec {
  NoiseSchedule schedule;
  std::vector<int> hidden_dims = {64, 64};
  int time_embed_dim = 32;
  int batch_size = 256;
  double lr = 1e-3;
  int epochs = 100;
};

struct SamplerSpec {
  std::string id;
  SamplerConfig config;
};

struct DefenseSpec {
  int sample_count = 5000;
  int pairs = 2000;
  SvmConfig svm;
  std::vector<DefendedProperty> properties;

  bool enabled() const { return !properties.empty(); }
};

struct MetricsSpec {
  std::string f1_label;
  bool frechet = true;
  int n = 50000;
};

// One experiment end to end: what to generate, what to train, how to sample,
// which properties to attack and defend, and which metrics to report. Every
// random decision downstream derives from `seed`, so a manifest plus a seed
// pins the whole run.
struct ExperimentManifest {
  std::string name;
  std::uint64_t seed = 0;
  std::string output_dir;
  DatasetSpec dataset;
  ModelSpec model;
  std::vector<SamplerSpec> samplers;
  int sample_count = 1000;
  std::vector<PropertyPredicate> predicates;
  std::vector<int> stability_counts;
  ClassifierConfig classifier;
  DefenseSpec defense;
  MetricsSpec metrics;

  void validate() const;
  bool is_tabular() const { return dataset.kind == DatasetKind::kTabular; }
};

ExperimentManifest manifest_from_json(const Json& j);
Json to_json(const ExperimentManifest& manifest);
ExperimentManifest load_manifest(const std::string& path);

// Identity of the resolved manifest (defaults filled in, seed included):
// stages compare it to decide whether cached artifacts still apply.
std::string manifest_hash(const ExperimentManifest& manifest);

}  // namespace prisampler

#endif  // PRISAMPLER_MANIFEST_HPP
