#include "dualms/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dualms/error.hpp"

namespace dualms {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string artifact_header(std::uint64_t config_hash, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "config_hash=%016llx seed=%llu",
                static_cast<unsigned long long>(config_hash),
                static_cast<unsigned long long>(seed));
  return buf;
}

namespace {

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw Error(ErrorCode::ConfigInvalid, std::string(what) + ": expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Csg parse_csg(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "box") return Csg::box(parse_vec3(j.at("min"), "box.min"), parse_vec3(j.at("max"), "box.max"));
  if (kind == "sphere")
    return Csg::sphere(parse_vec3(j.at("center"), "sphere.center"), j.at("radius").get<double>());
  if (kind == "cylinder")
    return Csg::cylinder(parse_vec3(j.at("center"), "cylinder.center"),
                         parse_vec3(j.at("axis"), "cylinder.axis"),
                         j.at("radius").get<double>(), j.at("half_height").get<double>());
  if (kind == "union" || kind == "intersect") {
    std::vector<Csg> parts;
    for (const json& c : j.at("children")) parts.push_back(parse_csg(c));
    if (parts.empty())
      throw Error(ErrorCode::ConfigInvalid, "shape: boolean node needs children");
    return kind == "union" ? Csg::unite(std::move(parts)) : Csg::intersect(std::move(parts));
  }
  if (kind == "difference")
    return Csg::subtract(parse_csg(j.at("base")), parse_csg(j.at("tool")));
  throw Error(ErrorCode::ConfigInvalid, "shape: unknown kind '" + kind + "'");
}

FlowField parse_flow(const json& j) {
  FlowField f;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    f.kind = FlowField::Kind::Constant;
    f.direction = parse_vec3(j.at("direction"), "flow.direction");
  } else if (kind == "polyline") {
    f.kind = FlowField::Kind::Polyline;
    for (const json& p : j.at("points")) f.polyline.push_back(parse_vec3(p, "flow.points"));
    if (f.polyline.size() < 2)
      throw Error(ErrorCode::ConfigInvalid, "flow: polyline needs at least 2 points");
  } else if (kind == "uturn") {
    f.kind = FlowField::Kind::UTurn;
    f.center = parse_vec3(j.at("center"), "flow.center");
    f.axis = parse_vec3(j.at("axis"), "flow.axis");
    f.approach = parse_vec3(j.at("approach"), "flow.approach");
  } else {
    throw Error(ErrorCode::ConfigInvalid, "flow: unknown kind '" + kind + "'");
  }
  return f;
}

std::vector<Port> parse_ports(const json& j) {
  std::vector<Port> ports;
  for (const json& p : j) {
    Port port;
    port.position = parse_vec3(p.at("position"), "port.position");
    std::string fluid = p.at("fluid").get<std::string>();
    if (fluid != "A" && fluid != "B")
      throw Error(ErrorCode::ConfigInvalid, "port: fluid must be 'A' or 'B'");
    port.fluid = fluid == "A" ? Fluid::A : Fluid::B;
    std::string kind = p.value("kind", "inlet");
    if (kind != "inlet" && kind != "outlet")
      throw Error(ErrorCode::ConfigInvalid, "port: kind must be 'inlet' or 'outlet'");
    port.kind = kind == "inlet" ? PortKind::Inlet : PortKind::Outlet;
    ports.push_back(port);
  }
  return ports;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

DesignDomain parse_domain(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("domain: ") + e.what());
  }
  try {
    std::vector<Port> ports = parse_ports(j.at("ports"));
    FlowField flow = parse_flow(j.at("flow"));
    const json& shape = j.at("shape");
    if (shape.at("kind").get<std::string>() == "voxels") {
      auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? p : (std::filesystem::path(base_dir) / fp).string();
      };
      VoxelGrid grid = load_voxels(resolve(shape.at("raw").get<std::string>()),
                                   resolve(shape.at("sidecar").get<std::string>()));
      return DesignDomain::from_voxels(std::move(grid), std::move(ports), std::move(flow));
    }
    return DesignDomain::from_csg(parse_csg(shape), std::move(ports), std::move(flow));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("domain: ") + e.what());
  }
}

DesignDomain load_domain(const std::string& path) {
  return parse_domain(read_file(path), std::filesystem::path(path).parent_path().string());
}

VoxelGrid load_voxels(const std::string& raw_path, const std::string& sidecar_path) {
  json j;
  try {
    j = json::parse(read_file(sidecar_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("voxel sidecar: ") + e.what());
  }
  VoxelGrid grid;
  try {
    const json& dims = j.at("dims");
    grid.nx = dims[0].get<int>();
    grid.ny = dims[1].get<int>();
    grid.nz = dims[2].get<int>();
    grid.origin = parse_vec3(j.at("origin"), "voxel origin");
    grid.spacing = parse_vec3(j.at("spacing"), "voxel spacing");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("voxel sidecar: ") + e.what());
  }
  if (grid.nx < 1 || grid.ny < 1 || grid.nz < 1 || grid.spacing.minCoeff() <= 0.0)
    throw Error(ErrorCode::ConfigInvalid, "voxel sidecar: bad dims or spacing");
  std::string raw = read_file(raw_path);
  std::size_t expected = static_cast<std::size_t>(grid.nx) * grid.ny * grid.nz;
  if (raw.size() != expected)
    throw Error(ErrorCode::ConfigInvalid, "voxel raw size does not match sidecar dims");
  grid.occupancy.assign(raw.begin(), raw.end());
  return grid;
}

void save_voxels(const VoxelGrid& grid, const std::string& raw_path,
                 const std::string& sidecar_path) {
  json j;
  j["dims"] = {grid.nx, grid.ny, grid.nz};
  j["origin"] = {grid.origin.x(), grid.origin.y(), grid.origin.z()};
  j["spacing"] = {grid.spacing.x(), grid.spacing.y(), grid.spacing.z()};
  std::ofstream side(sidecar_path);
  if (!side) throw Error(ErrorCode::IoError, "cannot open " + sidecar_path);
  side << j.dump(2) << "\n";
  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) throw Error(ErrorCode::IoError, "cannot open " + raw_path);
  raw.write(reinterpret_cast<const char*>(grid.occupancy.data()),
            static_cast<std::streamsize>(grid.occupancy.size()));
}

void save_graph(const SpatialGraph& graph, const std::string& path,
                std::uint64_t config_hash, std::uint64_t seed) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::fprintf(f, "# %s\n", artifact_header(config_hash, seed).c_str());
  std::fprintf(f, "vertices %d\n", graph.num_vertices());
  for (const Vec3& v : graph.vertices)
    std::fprintf(f, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  std::fprintf(f, "edges %zu\n", graph.edges.size());
  for (const Edge& e : graph.edges) std::fprintf(f, "%d %d %.17g\n", e.u, e.v, e.w);
  std::fprintf(f, "pins %zu\n", graph.pinned.size());
  for (const auto& [idx, fluid] : graph.pinned)
    std::fprintf(f, "%d %c\n", idx, fluid == Fluid::A ? 'A' : 'B');
  std::fclose(f);
}

namespace {

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

void skip_comments(std::ifstream& in) {
  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
  }
}

void expect_token(std::ifstream& in, const char* token, const std::string& path) {
  std::string word;
  if (!(in >> word) || word != token)
    throw Error(ErrorCode::IoError, path + ": expected '" + token + "'");
}

}  // namespace

SpatialGraph load_graph(const std::string& path) {
  std::ifstream in = open_text(path);
  skip_comments(in);
  SpatialGraph g;
  int n = 0;
  expect_token(in, "vertices", path);
  in >> n;
  g.vertices.resize(n);
  for (Vec3& v : g.vertices) in >> v.x() >> v.y() >> v.z();
  std::size_t m = 0;
  expect_token(in, "edges", path);
  in >> m;
  g.edges.resize(m);
  for (Edge& e : g.edges) in >> e.u >> e.v >> e.w;
  std::size_t k = 0;
  expect_token(in, "pins", path);
  in >> k;
  for (std::size_t i = 0; i < k; ++i) {
    int idx;
    char fluid;
    in >> idx >> fluid;
    g.pinned[idx] = fluid == 'A' ? Fluid::A : Fluid::B;
  }
  if (!in) throw Error(ErrorCode::IoError, path + ": truncated graph file");
  g.rebuild_adjacency();
  return g;
}

Skeleton induced_skeleton(const SpatialGraph& graph, const Partition& part, std::int8_t side) {
  Skeleton s;
  std::vector<int> remap(graph.num_vertices(), -1);
  for (int v = 0; v < graph.num_vertices(); ++v) {
    if (part.labels[v] != side) continue;
    remap[v] = static_cast<int>(s.vertices.size());
    s.vertices.push_back(graph.vertices[v]);
  }
  for (const Edge& e : graph.edges)
    if (remap[e.u] >= 0 && remap[e.v] >= 0) s.edges.emplace_back(remap[e.u], remap[e.v]);
  return s;
}

void save_skeleton(const Skeleton& skeleton, const std::string& path,
                   std::uint64_t config_hash, std::uint64_t seed) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::fprintf(f, "# %s\n", artifact_header(config_hash, seed).c_str());
  std::fprintf(f, "vertices %zu\n", skeleton.vertices.size());
  for (const Vec3& v : skeleton.vertices)
    std::fprintf(f, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  std::fprintf(f, "edges %zu\n", skeleton.edges.size());
  for (auto [u, v] : skeleton.edges) std::fprintf(f, "%d %d\n", u, v);
  std::fclose(f);
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream in = open_text(path);
  skip_comments(in);
  Skeleton s;
  std::size_t n = 0;
  expect_token(in, "vertices", path);
  in >> n;
  s.vertices.resize(n);
  for (Vec3& v : s.vertices) in >> v.x() >> v.y() >> v.z();
  std::size_t m = 0;
  expect_token(in, "edges", path);
  in >> m;
  s.edges.resize(m);
  for (auto& [u, v] : s.edges) in >> u >> v;
  if (!in) throw Error(ErrorCode::IoError, path + ": truncated skeleton file");
  return s;
}

void save_cut_trace(const CutTrace& trace, const std::string& path,
                    std::uint64_t config_hash, std::uint64_t seed) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::fprintf(f, "# %s\n", artifact_header(config_hash, seed).c_str());
  std::fprintf(f, "iteration,objective,moved_vertex\n");
  for (const CutRecord& r : trace)
    std::fprintf(f, "%d,%.17g,%d\n", r.iteration, r.objective, r.moved_vertex);
  std::fclose(f);
}

void save_train_trace(const TrainTrace& trace, const std::string& path,
                      std::uint64_t config_hash, std::uint64_t seed) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::fprintf(f, "# %s\n", artifact_header(config_hash, seed).c_str());
  std::fprintf(f, "iteration,loss_skeleton,loss_smooth\n");
  for (const TrainRecord& r : trace)
    std::fprintf(f, "%d,%.17g,%.17g\n", r.iteration, r.loss_skeleton, r.loss_smooth);
  std::fclose(f);
}

namespace {

constexpr char kCkptMagic[4] = {'D', 'M', 'S', 'F'};
constexpr std::uint32_t kCkptVersion = 1;

void write_f32(std::FILE* f, const float* data, std::size_t count) {
  if (std::fwrite(data, 4, count, f) != count)
    throw Error(ErrorCode::IoError, "short checkpoint write");
}

void read_exact(std::FILE* f, void* data, std::size_t bytes, const std::string& path) {
  if (std::fread(data, 1, bytes, f) != bytes)
    throw Error(ErrorCode::IoError, path + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const FieldModel& model, const std::string& path,
                     std::uint64_t config_hash, std::uint64_t seed) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::fwrite(kCkptMagic, 1, 4, f);
  std::uint32_t version = kCkptVersion;
  std::uint32_t m = static_cast<std::uint32_t>(model.num_frequencies());
  std::uint32_t width = static_cast<std::uint32_t>(model.width());
  std::fwrite(&version, 4, 1, f);
  std::fwrite(&m, 4, 1, f);
  std::fwrite(&width, 4, 1, f);
  std::fwrite(&config_hash, 8, 1, f);
  std::fwrite(&seed, 8, 1, f);
  double norm[4] = {model.norm_offset.x(), model.norm_offset.y(), model.norm_offset.z(),
                    model.norm_scale};
  std::fwrite(norm, 8, 4, f);

  auto write_mat = [&](const FieldModel::Mat& w) {
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        float x = w(i, j);
        write_f32(f, &x, 1);
      }
  };
  for (Eigen::Index i = 0; i < model.freq.rows(); ++i)
    for (int j = 0; j < 3; ++j) {
      float x = model.freq(i, j);
      write_f32(f, &x, 1);
    }
  for (int k = 0; k < FieldModel::kHiddenLayers; ++k) {
    write_mat(model.weights[k]);
    write_f32(f, model.biases[k].data(), model.biases[k].size());
  }
  write_f32(f, model.out_weights.data(), model.out_weights.size());
  write_f32(f, &model.out_bias, 1);
  std::fclose(f);
}

FieldModel load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  struct Closer {
    std::FILE* f;
    ~Closer() { std::fclose(f); }
  } closer{f};

  char magic[4];
  read_exact(f, magic, 4, path);
  if (std::memcmp(magic, kCkptMagic, 4) != 0)
    throw Error(ErrorCode::IoError, path + ": not a checkpoint file");
  std::uint32_t version, m, width;
  read_exact(f, &version, 4, path);
  read_exact(f, &m, 4, path);
  read_exact(f, &width, 4, path);
  if (version != kCkptVersion)
    throw Error(ErrorCode::IoError, path + ": unsupported checkpoint version");
  if (m < 1 || width < 1 || m > (1u << 20) || width > (1u << 16))
    throw Error(ErrorCode::IoError, path + ": implausible checkpoint dimensions");
  std::uint64_t hash, seed;
  read_exact(f, &hash, 8, path);
  read_exact(f, &seed, 8, path);

  FieldModel model;
  double norm[4];
  read_exact(f, norm, 32, path);
  model.norm_offset = Vec3(norm[0], norm[1], norm[2]);
  model.norm_scale = norm[3];

  auto read_mat = [&](FieldModel::Mat& w, int rows, int cols) {
    w.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        float x;
        read_exact(f, &x, 4, path);
        w(i, j) = x;
      }
  };
  model.freq.resize(m, 3);
  for (std::uint32_t i = 0; i < m; ++i)
    for (int j = 0; j < 3; ++j) {
      float x;
      read_exact(f, &x, 4, path);
      model.freq(i, j) = x;
    }
  int wi = static_cast<int>(width);
  int dims[FieldModel::kHiddenLayers] = {2 * static_cast<int>(m), wi, wi};
  for (int k = 0; k < FieldModel::kHiddenLayers; ++k) {
    read_mat(model.weights[k], wi, dims[k]);
    model.biases[k].resize(wi);
    read_exact(f, model.biases[k].data(), 4u * width, path);
  }
  model.out_weights.resize(wi);
  read_exact(f, model.out_weights.data(), 4u * width, path);
  read_exact(f, &model.out_bias, 4, path);
  return model;
}

SurfaceDiagnostics diagnose_mesh(const TriangleMesh& mesh, const std::string& name) {
  SurfaceDiagnostics d;
  d.name = name;
  d.vertex_count = static_cast<int>(mesh.vertices.size());
  d.triangle_count = static_cast<int>(mesh.triangles.size());
  d.area = surface_area(mesh);
  d.volume = signed_volume(mesh);

  std::vector<double> h = mean_curvature(mesh);
  std::erase_if(h, [](double x) { return !std::isfinite(x); });
  if (!h.empty()) {
    std::sort(h.begin(), h.end());
    auto quantile = [&](double q) {
      double pos = q * (h.size() - 1);
      std::size_t lo = static_cast<std::size_t>(pos);
      std::size_t hi = std::min(lo + 1, h.size() - 1);
      double t = pos - lo;
      return h[lo] * (1.0 - t) + h[hi] * t;
    };
    double sum = 0.0;
    for (double x : h) sum += x;
    d.h_mean = sum / static_cast<double>(h.size());
    d.h_median = quantile(0.5);
    d.h_iqr = quantile(0.75) - quantile(0.25);
    d.h_min = h.front();
    d.h_max = h.back();
  }
  return d;
}

void save_diagnostics(const std::vector<SurfaceDiagnostics>& rows, const std::string& path,
                      std::uint64_t config_hash, std::uint64_t seed) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::fprintf(f, "# %s\n", artifact_header(config_hash, seed).c_str());
  std::fprintf(f,
               "name,vertex_count,triangle_count,area,volume,h_mean,h_median,h_iqr,"
               "h_min,h_max,wall_volume_fraction\n");
  for (const SurfaceDiagnostics& d : rows)
    std::fprintf(f, "%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                 d.name.c_str(), d.vertex_count, d.triangle_count, d.area, d.volume, d.h_mean,
                 d.h_median, d.h_iqr, d.h_min, d.h_max, d.wall_volume_fraction);
  std::fclose(f);
}

}  // namespace dualms
