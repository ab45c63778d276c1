// Command-line front end: runs one pipeline stage (or the whole chain) from a
// JSON config. Exit codes: 0 success, 1 config error, 2 runtime error.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dualms/error.hpp"
#include "dualms/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dual-skeleton minimal-surface pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  const char* stages[] = {"sample-graph", "maxcut", "train",    "extract",
                          "diagnose",     "tpms",   "baseline", "pipeline"};
  for (const char* name : stages) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "pipeline config file (JSON)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
  }

  CLI11_PARSE(app, argc, argv);
  std::string stage = app.get_subcommands().front()->get_name();

  try {
    dualms::PipelineConfig cfg = dualms::load_pipeline_config(config_path, seed, out_dir);
    dualms::run_stage(stage, cfg);
  } catch (const dualms::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == dualms::ErrorCode::ConfigInvalid ? 1 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
