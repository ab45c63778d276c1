#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dualms/error.hpp"
#include "dualms/io.hpp"
#include "dualms/pipeline.hpp"

using namespace dualms;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = DUALMS_DATA_DIR;

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, const std::string& json) {
  fs::path p = dir / "config.json";
  std::ofstream(p) << json;
  return p;
}

// A fast config over the unit cube: small graph, tiny model, few iterations.
std::string small_config_json(const std::string& domain_path) {
  return R"({
  "domain": ")" + domain_path + R"(",
  "seed": 5,
  "graph": {"vertex_count": 50, "cvt_iterations": 3, "cvt_density_samples": 5000},
  "train": {"num_frequencies": 16, "width": 16, "iterations": 10,
            "omega_batch": 256, "skeleton_batch": 64, "learning_rate": 0.001},
  "extract": {"resolution": 24}
})";
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(DUALMS_BIN) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config loading applies defaults, values, and overrides") {
  PipelineConfig cfg = load_pipeline_config(kDataDir + "/unit_cube/config.json");
  CHECK(cfg.seed == 42);
  CHECK(cfg.graph.vertex_count == 120);
  CHECK(cfg.train.model.num_frequencies == 64);
  CHECK(cfg.resolution == 48);
  CHECK(cfg.maxcut_rounds == 100000);  // default
  CHECK(cfg.config_hash != 0);
  CHECK(fs::path(cfg.domain_path).is_absolute());

  PipelineConfig o = load_pipeline_config(kDataDir + "/unit_cube/config.json", 7, "/tmp/x");
  CHECK(o.seed == 7);
  CHECK(o.out_dir == "/tmp/x");
  CHECK(o.config_hash != cfg.config_hash);  // overrides change the hash

  PipelineConfig same = load_pipeline_config(kDataDir + "/unit_cube/config.json");
  CHECK(same.config_hash == cfg.config_hash);
}

TEST_CASE("invalid configs raise ConfigInvalid") {
  fs::path dir = fresh_dir("dualms_badcfg");
  auto check_invalid = [&](const std::string& json) {
    fs::path p = write_config(dir, json);
    try {
      load_pipeline_config(p.string());
      FAIL("expected ConfigInvalid for: ", json);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigInvalid);
    }
  };
  check_invalid("{ not json");
  check_invalid(R"({"seed": 1})");  // missing domain
  check_invalid(R"({"domain": "does_not_exist.json"})");
  check_invalid(R"({"domain": ")" + kDataDir +
                R"(/unit_cube/domain.json", "extract": {"resolution": 1}})");
  check_invalid(R"({"domain": ")" + kDataDir +
                R"(/unit_cube/domain.json", "train": {"iterations": -5}})");
  fs::remove_all(dir);
}

TEST_CASE("train stage without skeletons reports MissingArtifact") {
  fs::path dir = fresh_dir("dualms_missing");
  fs::path cfg_path = write_config(dir, small_config_json(kDataDir + "/unit_cube/domain.json"));
  PipelineConfig cfg = load_pipeline_config(cfg_path.string(), {}, (dir / "out").string());
  try {
    run_stage("train", cfg);
    FAIL("expected MissingArtifact");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingArtifact);
  }
  fs::remove_all(dir);
}

TEST_CASE("unknown stage is rejected") {
  fs::path dir = fresh_dir("dualms_badstage");
  fs::path cfg_path = write_config(dir, small_config_json(kDataDir + "/unit_cube/domain.json"));
  PipelineConfig cfg = load_pipeline_config(cfg_path.string(), {}, (dir / "out").string());
  CHECK_THROWS_AS(run_stage("polish", cfg), Error);
  fs::remove_all(dir);
}

TEST_CASE("graph and maxcut stages are deterministic and stamped") {
  fs::path dir = fresh_dir("dualms_det");
  fs::path cfg_path = write_config(dir, small_config_json(kDataDir + "/unit_cube/domain.json"));

  PipelineConfig a = load_pipeline_config(cfg_path.string(), {}, (dir / "a").string());
  PipelineConfig b = load_pipeline_config(cfg_path.string(), {}, (dir / "b").string());
  for (const auto* cfg : {&a, &b}) {
    run_stage("sample-graph", *cfg);
    run_stage("maxcut", *cfg);
  }
  for (const char* name : {"graph.txt", "skeleton_A.txt", "skeleton_B.txt", "cut_trace.csv"}) {
    std::string fa = slurp(dir / "a" / name);
    std::string fb = slurp(dir / "b" / name);
    CHECK(!fa.empty());
    CHECK(fa == fb);
  }
  // Stamps carry the seed from the config.
  CHECK(slurp(dir / "a" / "graph.txt").find("seed=5") != std::string::npos);

  // A different seed changes the artifacts.
  PipelineConfig c = load_pipeline_config(cfg_path.string(), 6, (dir / "c").string());
  run_stage("sample-graph", c);
  CHECK(slurp(dir / "c" / "graph.txt") != slurp(dir / "a" / "graph.txt"));
  fs::remove_all(dir);
}

TEST_CASE("tpms and baseline stages write meshes and diagnostics") {
  fs::path dir = fresh_dir("dualms_aux");
  fs::path cfg_path = write_config(dir, small_config_json(kDataDir + "/unit_cube/domain.json"));
  PipelineConfig cfg = load_pipeline_config(cfg_path.string(), {}, (dir / "out").string());

  run_stage("tpms", cfg);
  CHECK(fs::exists(dir / "out" / "tpms.obj"));
  CHECK(fs::exists(dir / "out" / "tpms_diagnostics.csv"));

  run_stage("sample-graph", cfg);
  run_stage("maxcut", cfg);
  run_stage("baseline", cfg);
  CHECK(fs::exists(dir / "out" / "baseline.obj"));
  CHECK(fs::exists(dir / "out" / "baseline_diagnostics.csv"));
  TriangleMesh m = import_obj((dir / "out" / "baseline.obj").string());
  CHECK(!m.empty());
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes: success 0, bad config 1, runtime failure 2") {
  fs::path dir = fresh_dir("dualms_cli");
  fs::path cfg_path = write_config(dir, small_config_json(kDataDir + "/unit_cube/domain.json"));
  std::string out = (dir / "out").string();

  CHECK(run_cli("sample-graph --config " + cfg_path.string() + " --out " + out) == 0);
  CHECK(run_cli("maxcut --config " + cfg_path.string() + " --out " + out) == 0);
  CHECK(fs::exists(dir / "out" / "skeleton_A.txt"));

  fs::path bad = write_config(fresh_dir("dualms_cli_bad"), "{ nope");
  CHECK(run_cli("sample-graph --config " + bad.string()) == 1);

  // Extract without a checkpoint: runtime failure.
  CHECK(run_cli("extract --config " + cfg_path.string() + " --out " + out) == 2);

  // Unknown subcommand / missing required flag are CLI parse errors (nonzero).
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("train") != 0);
  fs::remove_all(dir);
  fs::remove_all(bad.parent_path());
}

TEST_CASE("full pipeline runs end to end and reruns byte-identically") {
  fs::path dir = fresh_dir("dualms_full");
  // Slightly larger training budget so the zero set exists at extraction.
  std::string json = R"({
  "domain": ")" + kDataDir + R"(/unit_cube/domain.json",
  "seed": 3,
  "graph": {"vertex_count": 60, "cvt_iterations": 3, "cvt_density_samples": 5000},
  "train": {"num_frequencies": 32, "width": 32, "iterations": 400,
            "omega_batch": 512, "skeleton_batch": 128, "learning_rate": 0.002,
            "sigma_b": 1.0},
  "extract": {"resolution": 32}
})";
  fs::path cfg_path = write_config(dir, json);

  const char* artifacts[] = {"graph.txt",      "skeleton_A.txt", "skeleton_B.txt",
                             "cut_trace.csv",  "field.ckpt",     "train_trace.csv",
                             "surface.obj",    "diagnostics.csv"};

  PipelineConfig a = load_pipeline_config(cfg_path.string(), {}, (dir / "a").string());
  run_stage("pipeline", a);
  for (const char* name : artifacts) CHECK(fs::exists(dir / "a" / name));

  TriangleMesh surface = import_obj((dir / "a" / "surface.obj").string());
  CHECK(!surface.empty());

  PipelineConfig b = load_pipeline_config(cfg_path.string(), {}, (dir / "b").string());
  run_stage("pipeline", b);
  for (const char* name : artifacts) {
    INFO(name);
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  fs::remove_all(dir);
}
