#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "prisampler/errors.hpp"
#include "prisampler/manifest.hpp"
#include "prisampler/pipeline.hpp"

namespace {

using prisampler::ExperimentManifest;
using prisampler::StageOptions;

struct CommonArgs {
  std::string manifest_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--manifest", args->manifest_path, "Experiment manifest")
      ->required();
  cmd->add_option("--seed", args->seed,
                  "Override the manifest seed for this run");
  cmd->add_option("--out", args->out,
                  "Run directory (defaults to the manifest's output_dir)");
  cmd->add_flag("--force", args->force, "Redo the stage even if up to date");
}

int run_stage(const CommonArgs& args,
              void (*stage)(const ExperimentManifest&, const StageOptions&)) {
  ExperimentManifest manifest = prisampler::load_manifest(args.manifest_path);
  if (args.seed) {
    manifest.seed = *args.seed;
  }
  StageOptions options;
  options.run_dir = args.out.empty() ? manifest.output_dir : args.out;
  options.force = args.force;
  stage(manifest, options);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Diffusion-model property inference pipeline: generate data, train, "
      "sample, attack, defend, and report."};
  app.require_subcommand(1);

  struct StageCommand {
    const char* name;
    const char* help;
    void (*fn)(const ExperimentManifest&, const StageOptions&);
  };
  const StageCommand stages[] = {
      {"dataset-gen", "Generate train/shadow/test splits with ground truth",
       prisampler::cmd_dataset_gen},
      {"train", "Train the diffusion model on the train split",
       prisampler::cmd_train},
      {"sample", "Draw generated samples with each configured sampler",
       prisampler::cmd_sample},
      {"attack", "Infer property proportions from the generated samples",
       prisampler::cmd_attack},
      {"defend-fit", "Fit property hyperplanes for the sampling defense",
       prisampler::cmd_defend_fit},
      {"defend-sample", "Draw defended samples steered to the target gammas",
       prisampler::cmd_defend_sample},
      {"eval", "Compute utility metrics against the real test split",
       prisampler::cmd_eval},
  };

  std::vector<CommonArgs> stage_args(std::size(stages));
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    CLI::App* cmd = app.add_subcommand(stages[i].name, stages[i].help);
    add_common(cmd, &stage_args[i]);
  }

  std::vector<std::string> report_runs;
  std::string report_out;
  bool report_force = false;
  CLI::App* report =
      app.add_subcommand("report", "Merge run directories into a report");
  report->add_option("runs", report_runs, "Completed run directories")
      ->required();
  report->add_option("--out", report_out, "Report output directory")
      ->required();
  report->add_flag("--force", report_force,
                   "Rewrite report artifacts even if unchanged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (std::size_t i = 0; i < std::size(stages); ++i) {
      if (app.got_subcommand(stages[i].name)) {
        return run_stage(stage_args[i], stages[i].fn);
      }
    }
    if (app.got_subcommand("report")) {
      prisampler::cmd_report(report_runs, report_out, report_force);
      return 0;
    }
  } catch (const prisampler::TrainingError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return 2;
  } catch (const prisampler::SolverError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const prisampler::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const prisampler::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
