#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dualms/field.hpp"
#include "dualms/graph.hpp"
#include "dualms/mesh.hpp"

namespace dualms {

/// Everything a stage run needs; loaded from a JSON file, validated up front.
struct PipelineConfig {
  std::string domain_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;  // FNV-1a over the effective config text

  GraphBuildOptions graph;
  int maxcut_rounds = 100000;

  TrainConfig train;
  double skeleton_points_per_edge = 4.0;

  int resolution = 128;
  double tau = 0.0;  // 0 disables shell thickening

  TpmsKind tpms_kind = TpmsKind::Gyroid;
  int tpms_periods = 1;

  int baseline_smooth_iterations = 10;
  double baseline_smooth_step = 0.5;
};

/// Parses and validates the config; `seed`/`out_dir` overrides (from the
/// command line) are folded in before the config hash is taken.
PipelineConfig load_pipeline_config(const std::string& path,
                                    std::optional<std::uint64_t> seed_override = {},
                                    std::optional<std::string> out_dir_override = {});

/// Runs one stage (sample-graph | maxcut | train | extract | diagnose | tpms |
/// baseline) or the full `pipeline` chain, writing artifacts into out_dir.
/// Throws MissingArtifact when a prerequisite file is absent.
void run_stage(const std::string& stage, const PipelineConfig& cfg);

}  // namespace dualms
