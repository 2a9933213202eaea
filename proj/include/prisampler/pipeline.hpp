#ifndef PRISAMPLER_PIPELINE_HPP
#define PRISAMPLER_PIPELINE_HPP

#include <string>
#include <vector>

#include "prisampler/manifest.hpp"

namespace prisampler {

// Version stamp written into every JSON artifact and checked when runs are
// merged, so reports never silently mix incompatible layouts.
inline constexpr int kArtifactFormatVersion = 1;

struct StageOptions {
  std::string run_dir;
  bool force = false;
};

// Each stage reads its upstream artifacts from the run directory, writes its
// own outputs plus a provenance file, and is a no-op when the provenance
// shows the same manifest, seed, and input hashes (unless forced). A missing
// upstream artifact raises InputError naming the stage that produces it.
void cmd_dataset_gen(const ExperimentManifest& manifest,
                     const StageOptions& options);
void cmd_train(const ExperimentManifest& manifest,
               const StageOptions& options);
void cmd_sample(const ExperimentManifest& manifest,
                const StageOptions& options);
void cmd_attack(const ExperimentManifest& manifest,
                const StageOptions& options);
void cmd_defend_fit(const ExperimentManifest& manifest,
                    const StageOptions& options);
void cmd_defend_sample(const ExperimentManifest& manifest,
                       const StageOptions& options);
void cmd_eval(const ExperimentManifest& manifest,
              const StageOptions& options);

// Merges one or more completed run directories into a long-format CSV plus
// plot-ready JSON series (proportion diagonals, stability curves, defense
// bars, utility rows).
void cmd_report(const std::vector<std::string>& run_dirs,
                const std::string& out_dir, bool force);

// The sampler id under which tabular pipelines file their generated data.
std::string tabular_sampler_id();

}  // namespace prisampler

#endif  // PRISAMPLER_PIPELINE_HPP
