#include "dualms/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dualms/error.hpp"
#include "dualms/io.hpp"
#include "dualms/maxcut.hpp"

namespace dualms {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TpmsKind parse_tpms_kind(const std::string& s) {
  if (s == "gyroid") return TpmsKind::Gyroid;
  if (s == "schwarz_p") return TpmsKind::SchwarzP;
  if (s == "iwp") return TpmsKind::Iwp;
  throw Error(ErrorCode::ConfigInvalid, "tpms.kind must be gyroid | schwarz_p | iwp");
}

void validate(const PipelineConfig& cfg) {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::ConfigInvalid, "config: " + what);
  };
  if (cfg.domain_path.empty()) bad("domain path is required");
  if (cfg.graph.vertex_count < 4) bad("graph.vertex_count must be >= 4");
  if (cfg.graph.cvt_iterations < 0) bad("graph.cvt_iterations must be >= 0");
  if (cfg.graph.cvt_density_samples < 1) bad("graph.cvt_density_samples must be >= 1");
  if (cfg.graph.weights.penalty <= 1.0) bad("graph.penalty must be > 1");
  if (cfg.maxcut_rounds < 0) bad("maxcut.max_rounds must be >= 0");
  if (cfg.train.model.num_frequencies < 1) bad("train.num_frequencies must be >= 1");
  if (cfg.train.model.width < 1) bad("train.width must be >= 1");
  if (cfg.train.model.sigma_b <= 0.0) bad("train.sigma_b must be > 0");
  if (cfg.train.lambda_skeleton < 0.0 || cfg.train.lambda_smooth < 0.0)
    bad("train loss weights must be >= 0");
  if (cfg.train.learning_rate <= 0.0) bad("train.learning_rate must be > 0");
  if (cfg.train.iterations < 0) bad("train.iterations must be >= 0");
  if (cfg.train.omega_batch < 1 || cfg.train.skeleton_batch < 1)
    bad("train batch sizes must be >= 1");
  if (cfg.train.sigma_noise < 0.0) bad("train.sigma_noise must be >= 0");
  if (cfg.skeleton_points_per_edge <= 0.0) bad("train.skeleton_points_per_edge must be > 0");
  if (cfg.resolution < 2) bad("extract.resolution must be >= 2");
  if (cfg.tau < 0.0) bad("extract.tau must be >= 0");
  if (cfg.tpms_periods < 1) bad("tpms.periods must be >= 1");
  if (cfg.baseline_smooth_iterations < 0) bad("baseline.smooth_iterations must be >= 0");
  if (cfg.baseline_smooth_step <= 0.0 || cfg.baseline_smooth_step > 1.0)
    bad("baseline.smooth_step must be in (0, 1]");
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path,
                                    std::optional<std::uint64_t> seed_override,
                                    std::optional<std::string> out_dir_override) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }

  if (seed_override) j["seed"] = *seed_override;
  if (out_dir_override) j["out_dir"] = *out_dir_override;

  PipelineConfig cfg;
  // The output location does not affect what gets computed, so it stays out
  // of the fingerprint: reruns into different directories stay comparable.
  json fingerprint = j;
  fingerprint.erase("out_dir");
  cfg.config_hash = fnv1a(fingerprint.dump());
  try {
    cfg.domain_path = j.at("domain").get<std::string>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out_dir = j.value("out_dir", std::string("out"));

    if (j.contains("graph")) {
      const json& g = j["graph"];
      cfg.graph.vertex_count = g.value("vertex_count", cfg.graph.vertex_count);
      cfg.graph.cvt_iterations = g.value("cvt_iterations", cfg.graph.cvt_iterations);
      cfg.graph.cvt_density_samples =
          g.value("cvt_density_samples", cfg.graph.cvt_density_samples);
      cfg.graph.weights.penalty = g.value("penalty", cfg.graph.weights.penalty);
      cfg.graph.weights.interior_samples =
          g.value("interior_samples", cfg.graph.weights.interior_samples);
    }
    if (j.contains("maxcut")) cfg.maxcut_rounds = j["maxcut"].value("max_rounds", cfg.maxcut_rounds);
    if (j.contains("train")) {
      const json& t = j["train"];
      cfg.train.model.num_frequencies =
          t.value("num_frequencies", cfg.train.model.num_frequencies);
      cfg.train.model.width = t.value("width", cfg.train.model.width);
      cfg.train.model.sigma_b = t.value("sigma_b", cfg.train.model.sigma_b);
      cfg.train.lambda_skeleton = t.value("lambda_skeleton", cfg.train.lambda_skeleton);
      cfg.train.lambda_smooth = t.value("lambda_smooth", cfg.train.lambda_smooth);
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.iterations = t.value("iterations", cfg.train.iterations);
      cfg.train.omega_batch = t.value("omega_batch", cfg.train.omega_batch);
      cfg.train.skeleton_batch = t.value("skeleton_batch", cfg.train.skeleton_batch);
      cfg.train.sigma_noise = t.value("sigma_noise", cfg.train.sigma_noise);
      cfg.train.trace_stride = t.value("trace_stride", cfg.train.trace_stride);
      cfg.skeleton_points_per_edge =
          t.value("skeleton_points_per_edge", cfg.skeleton_points_per_edge);
    }
    if (j.contains("extract")) {
      cfg.resolution = j["extract"].value("resolution", cfg.resolution);
      cfg.tau = j["extract"].value("tau", cfg.tau);
    }
    if (j.contains("tpms")) {
      cfg.tpms_kind = parse_tpms_kind(j["tpms"].value("kind", std::string("gyroid")));
      cfg.tpms_periods = j["tpms"].value("periods", cfg.tpms_periods);
    }
    if (j.contains("baseline")) {
      cfg.baseline_smooth_iterations =
          j["baseline"].value("smooth_iterations", cfg.baseline_smooth_iterations);
      cfg.baseline_smooth_step = j["baseline"].value("smooth_step", cfg.baseline_smooth_step);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;

  // Relative paths resolve against the config file's directory.
  fs::path base = fs::path(path).parent_path();
  if (!fs::path(cfg.domain_path).is_absolute())
    cfg.domain_path = (base / cfg.domain_path).string();
  if (!fs::exists(cfg.domain_path))
    throw Error(ErrorCode::ConfigInvalid, "config: domain file not found: " + cfg.domain_path);

  validate(cfg);
  return cfg;
}

namespace {

struct StageContext {
  const PipelineConfig& cfg;
  fs::path out;

  std::string artifact(const char* name) const { return (out / name).string(); }

  void require(const char* name) const {
    if (!fs::exists(out / name))
      throw Error(ErrorCode::MissingArtifact,
                  std::string("missing prerequisite artifact: ") + (out / name).string());
  }

  void note(const std::string& msg) const {
    std::fprintf(stderr, "[dualms] %s\n", msg.c_str());
  }
};

void stage_sample_graph(const StageContext& ctx) {
  DesignDomain domain = load_domain(ctx.cfg.domain_path);
  validate_ports(domain.ports);
  ctx.note("sample-graph: building " + std::to_string(ctx.cfg.graph.vertex_count) +
           "-vertex graph");
  SpatialGraph graph = build_graph(domain, ctx.cfg.graph, ctx.cfg.seed);
  save_graph(graph, ctx.artifact("graph.txt"), ctx.cfg.config_hash, ctx.cfg.seed);
}

void stage_maxcut(const StageContext& ctx) {
  ctx.require("graph.txt");
  SpatialGraph graph = load_graph(ctx.artifact("graph.txt"));
  Partition part = initial_partition(graph, ctx.cfg.seed);
  auto [best, trace] = optimize(graph, std::move(part), ctx.cfg.maxcut_rounds);
  ctx.note("maxcut: " + std::to_string(trace.size() - 1) + " flips, objective " +
           std::to_string(trace.back().objective));
  save_skeleton(induced_skeleton(graph, best, Partition::kA), ctx.artifact("skeleton_A.txt"),
                ctx.cfg.config_hash, ctx.cfg.seed);
  save_skeleton(induced_skeleton(graph, best, Partition::kB), ctx.artifact("skeleton_B.txt"),
                ctx.cfg.config_hash, ctx.cfg.seed);
  save_cut_trace(trace, ctx.artifact("cut_trace.csv"), ctx.cfg.config_hash, ctx.cfg.seed);
}

SkeletonSamples load_skeleton_samples(const StageContext& ctx) {
  ctx.require("skeleton_A.txt");
  ctx.require("skeleton_B.txt");
  Skeleton a = load_skeleton(ctx.artifact("skeleton_A.txt"));
  Skeleton b = load_skeleton(ctx.artifact("skeleton_B.txt"));
  SkeletonSamples samples;
  samples.points_a = sample_polyline_edges(a.vertices, a.edges, ctx.cfg.skeleton_points_per_edge);
  samples.points_b = sample_polyline_edges(b.vertices, b.edges, ctx.cfg.skeleton_points_per_edge);
  return samples;
}

void stage_train(const StageContext& ctx) {
  SkeletonSamples samples = load_skeleton_samples(ctx);
  DesignDomain domain = load_domain(ctx.cfg.domain_path);
  ctx.note("train: " + std::to_string(ctx.cfg.train.iterations) + " iterations, " +
           std::to_string(samples.points_a.size()) + "+" +
           std::to_string(samples.points_b.size()) + " skeleton samples");
  auto [model, trace] = train(samples, domain, ctx.cfg.train);
  save_checkpoint(model, ctx.artifact("field.ckpt"), ctx.cfg.config_hash, ctx.cfg.seed);
  save_train_trace(trace, ctx.artifact("train_trace.csv"), ctx.cfg.config_hash, ctx.cfg.seed);
}

ScalarGrid field_grid(const StageContext& ctx, const FieldModel& model,
                      const DesignDomain& domain) {
  BatchScalarFn fn = [&](std::span<const Vec3> pts, std::span<double> out) {
    evaluate_batch(model, pts, out);
  };
  const DesignDomain* mask = domain.shape_kind == DesignDomain::ShapeKind::Csg &&
                                     domain.csg.kind == Csg::Kind::Box
                                 ? nullptr
                                 : &domain;
  return sample_grid_batched(fn, domain.bbox, ctx.cfg.resolution, mask);
}

void write_thicken(const StageContext& ctx, const ScalarGrid& grid,
                   const DesignDomain& domain) {
  std::vector<Vec3> ports_a, ports_b;
  for (const Port& p : domain.ports)
    (p.fluid == Fluid::A ? ports_a : ports_b).push_back(p.position);
  ThickenResult shell = thicken(grid, ctx.cfg.tau, ports_a, ports_b);
  char header[128];
  std::snprintf(header, sizeof(header), "%s wall_volume_fraction=%.17g",
                artifact_header(ctx.cfg.config_hash, ctx.cfg.seed).c_str(),
                shell.wall_volume_fraction);
  export_mesh(shell.wall, ctx.artifact("wall.obj"), MeshFormat::Obj, header);
  export_mesh(shell.channel_a, ctx.artifact("channel_A.obj"), MeshFormat::Obj, header);
  export_mesh(shell.channel_b, ctx.artifact("channel_B.obj"), MeshFormat::Obj, header);
}

void stage_extract(const StageContext& ctx) {
  ctx.require("field.ckpt");
  FieldModel model = load_checkpoint(ctx.artifact("field.ckpt"));
  DesignDomain domain = load_domain(ctx.cfg.domain_path);
  ctx.note("extract: sampling " + std::to_string(ctx.cfg.resolution) + "^3 grid");
  ScalarGrid grid = field_grid(ctx, model, domain);
  TriangleMesh mesh = marching_cubes(grid, 0.0);
  export_mesh(mesh, ctx.artifact("surface.obj"), MeshFormat::Obj,
              artifact_header(ctx.cfg.config_hash, ctx.cfg.seed));
  if (ctx.cfg.tau > 0.0) write_thicken(ctx, grid, domain);
}

double parse_wall_fraction(const std::string& obj_path) {
  std::ifstream in(obj_path);
  std::string line;
  if (in && std::getline(in, line)) {
    auto pos = line.find("wall_volume_fraction=");
    if (pos != std::string::npos)
      return std::strtod(line.c_str() + pos + std::strlen("wall_volume_fraction="), nullptr);
  }
  return -1.0;
}

void stage_diagnose(const StageContext& ctx) {
  ctx.require("surface.obj");
  std::vector<SurfaceDiagnostics> rows;
  rows.push_back(diagnose_mesh(import_obj(ctx.artifact("surface.obj")), "surface"));
  if (ctx.cfg.tau > 0.0) {
    for (const char* name : {"wall.obj", "channel_A.obj", "channel_B.obj"}) ctx.require(name);
    SurfaceDiagnostics wall = diagnose_mesh(import_obj(ctx.artifact("wall.obj")), "wall");
    wall.wall_volume_fraction = parse_wall_fraction(ctx.artifact("wall.obj"));
    rows.push_back(wall);
    rows.push_back(diagnose_mesh(import_obj(ctx.artifact("channel_A.obj")), "channel_A"));
    rows.push_back(diagnose_mesh(import_obj(ctx.artifact("channel_B.obj")), "channel_B"));
  }
  save_diagnostics(rows, ctx.artifact("diagnostics.csv"), ctx.cfg.config_hash, ctx.cfg.seed);
}

void stage_tpms(const StageContext& ctx) {
  DesignDomain domain = load_domain(ctx.cfg.domain_path);
  ScalarFn fn = tpms_field(ctx.cfg.tpms_kind, ctx.cfg.tpms_periods);
  ScalarGrid grid = sample_grid(fn, domain.bbox, ctx.cfg.resolution);
  TriangleMesh mesh = marching_cubes(grid, 0.0);
  export_mesh(mesh, ctx.artifact("tpms.obj"), MeshFormat::Obj,
              artifact_header(ctx.cfg.config_hash, ctx.cfg.seed));
  save_diagnostics({diagnose_mesh(mesh, "tpms")}, ctx.artifact("tpms_diagnostics.csv"),
                   ctx.cfg.config_hash, ctx.cfg.seed);
}

void stage_baseline(const StageContext& ctx) {
  SkeletonSamples samples = load_skeleton_samples(ctx);
  DesignDomain domain = load_domain(ctx.cfg.domain_path);
  ScalarFn fn = equidistant_field(samples.points_a, samples.points_b);
  const DesignDomain* mask = domain.shape_kind == DesignDomain::ShapeKind::Csg &&
                                     domain.csg.kind == Csg::Kind::Box
                                 ? nullptr
                                 : &domain;
  ScalarGrid grid = sample_grid(fn, domain.bbox, ctx.cfg.resolution, mask);
  TriangleMesh mesh = laplacian_smooth(marching_cubes(grid, 0.0),
                                       ctx.cfg.baseline_smooth_iterations,
                                       ctx.cfg.baseline_smooth_step);
  export_mesh(mesh, ctx.artifact("baseline.obj"), MeshFormat::Obj,
              artifact_header(ctx.cfg.config_hash, ctx.cfg.seed));
  save_diagnostics({diagnose_mesh(mesh, "baseline")}, ctx.artifact("baseline_diagnostics.csv"),
                   ctx.cfg.config_hash, ctx.cfg.seed);
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + cfg.out_dir);
  StageContext ctx{cfg, fs::path(cfg.out_dir)};

  auto dispatch = [&](const std::string& name) {
    try {
      if (name == "sample-graph") stage_sample_graph(ctx);
      else if (name == "maxcut") stage_maxcut(ctx);
      else if (name == "train") stage_train(ctx);
      else if (name == "extract") stage_extract(ctx);
      else if (name == "diagnose") stage_diagnose(ctx);
      else if (name == "tpms") stage_tpms(ctx);
      else if (name == "baseline") stage_baseline(ctx);
      else
        throw Error(ErrorCode::ConfigInvalid, "unknown stage '" + name + "'");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::MissingArtifact) throw;
      throw Error(e.code(), name + ": " + e.what());
    }
  };

  if (stage == "pipeline") {
    for (const char* s : {"sample-graph", "maxcut", "train", "extract", "diagnose"})
      dispatch(s);
    return;
  }
  dispatch(stage);
}

}  // namespace dualms
