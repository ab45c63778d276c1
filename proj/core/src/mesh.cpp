#include "dualms/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "dualms/error.hpp"
#include "marching_tables.hpp"

namespace dualms {

namespace {

ScalarGrid make_grid(const Aabb& bbox, int resolution) {
  if (resolution < 2)
    throw Error(ErrorCode::InvalidArgument, "sample_grid: resolution must be >= 2");
  ScalarGrid g;
  g.nx = g.ny = g.nz = resolution;
  g.origin = bbox.min;
  g.spacing = bbox.extent() / static_cast<double>(resolution - 1);
  for (int c = 0; c < 3; ++c)
    if (g.spacing[c] <= 0.0) g.spacing[c] = 1e-12;
  g.values.resize(static_cast<std::size_t>(resolution) * resolution * resolution);
  return g;
}

void fill_mask(ScalarGrid& g, const DesignDomain* mask) {
  if (!mask) return;
  g.mask.resize(g.values.size());
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        g.mask[g.index(i, j, k)] = mask->contains(g.position(i, j, k)) ? 1 : 0;
}

}  // namespace

ScalarGrid sample_grid(const ScalarFn& f, const Aabb& bbox, int resolution,
                       const DesignDomain* mask) {
  ScalarGrid g = make_grid(bbox, resolution);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) g.values[g.index(i, j, k)] = f(g.position(i, j, k));
  fill_mask(g, mask);
  return g;
}

ScalarGrid sample_grid_batched(const BatchScalarFn& f, const Aabb& bbox, int resolution,
                               const DesignDomain* mask) {
  ScalarGrid g = make_grid(bbox, resolution);
  constexpr std::size_t kChunk = 16384;
  std::vector<Vec3> pts;
  pts.reserve(kChunk);
  std::size_t base = 0;
  auto flush = [&]() {
    if (pts.empty()) return;
    f(pts, std::span<double>(g.values.data() + base, pts.size()));
    base += pts.size();
    pts.clear();
  };
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        pts.push_back(g.position(i, j, k));
        if (pts.size() == kChunk) flush();
      }
  flush();
  fill_mask(g, mask);
  return g;
}

TriangleMesh marching_cubes(const ScalarGrid& grid, double iso) {
  for (double v : grid.values)
    if (!std::isfinite(v) && grid.mask.empty())
      throw Error(ErrorCode::InvalidArgument, "marching_cubes: non-finite grid value");

  // Cube corner offsets, classic numbering.
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static constexpr int kEdgeCorner[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                             {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                             {0, 4}, {1, 5}, {2, 6}, {3, 7}};

  TriangleMesh mesh;
  // Global edge key -> mesh vertex id, so shared cell edges share vertices.
  std::unordered_map<std::uint64_t, int> edge_vertex;
  edge_vertex.reserve(grid.values.size() / 4);

  auto node_id = [&](int i, int j, int k) -> std::uint64_t {
    return static_cast<std::uint64_t>(grid.index(i, j, k));
  };

  bool any_crossing = false;
  std::array<std::size_t, 8> nid;
  std::array<Vec3, 8> pos;
  std::array<double, 8> val;

  for (int k = 0; k + 1 < grid.nz; ++k) {
    for (int j = 0; j + 1 < grid.ny; ++j) {
      for (int i = 0; i + 1 < grid.nx; ++i) {
        bool skip = false;
        for (int c = 0; c < 8 && !skip; ++c) {
          int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = k + kCorner[c][2];
          if (!grid.inside(ci, cj, ck)) skip = true;
          nid[c] = node_id(ci, cj, ck);
          pos[c] = grid.position(ci, cj, ck);
          val[c] = grid.values[nid[c]];
        }
        if (skip) continue;

        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (val[c] < iso) cube |= 1 << c;
        if (detail::kMcEdgeTable[cube] == 0) continue;
        any_crossing = true;

        std::array<int, 12> ev{};
        for (int e = 0; e < 12; ++e) {
          if (!(detail::kMcEdgeTable[cube] & (1 << e))) continue;
          int a = kEdgeCorner[e][0], b = kEdgeCorner[e][1];
          std::uint64_t ka = nid[a], kb = nid[b];
          if (ka > kb) std::swap(ka, kb);
          std::uint64_t key = (ka << 32) | kb;
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            double denom = val[b] - val[a];
            double t = std::abs(denom) > 0.0 ? (iso - val[a]) / denom : 0.5;
            t = std::clamp(t, 0.0, 1.0);
            mesh.vertices.push_back(pos[a] + t * (pos[b] - pos[a]));
            it = edge_vertex.emplace(key, static_cast<int>(mesh.vertices.size()) - 1).first;
          }
          ev[e] = it->second;
        }

        const int* tri = detail::kMcTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3) {
          // Table winding faces the below-iso region; flip so normals follow
          // the field gradient (toward increasing values).
          mesh.triangles.push_back({ev[tri[t]], ev[tri[t + 2]], ev[tri[t + 1]]});
        }
      }
    }
  }
  if (!any_crossing)
    throw Error(ErrorCode::EmptySurface, "marching_cubes: no sign change at the isovalue");
  return cleanup(std::move(mesh));
}

TriangleMesh cleanup(TriangleMesh mesh) {
  if (mesh.vertices.empty()) return mesh;
  Aabb bb{mesh.vertices[0], mesh.vertices[0]};
  for (const Vec3& v : mesh.vertices) {
    bb.min = bb.min.cwiseMin(v);
    bb.max = bb.max.cwiseMax(v);
  }
  double min_area = 1e-12 * bb.diagonal() * bb.diagonal();
  std::erase_if(mesh.triangles, [&](const std::array<int, 3>& t) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
    Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                 .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    return 0.5 * n.norm() <= min_area;
  });
  return mesh;
}

double surface_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                 .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    area += 0.5 * n.norm();
  }
  return area;
}

double signed_volume(const TriangleMesh& mesh) {
  double vol = 0.0;
  for (const auto& t : mesh.triangles)
    vol += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]])) / 6.0;
  return vol;
}

std::vector<double> mean_curvature(const TriangleMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<Vec3> laplace(nv, Vec3::Zero());
  std::vector<Vec3> normal(nv, Vec3::Zero());
  std::vector<double> area(nv, 0.0);
  std::vector<char> boundary(nv, 0);

  std::unordered_map<std::uint64_t, int> edge_count;
  auto ekey = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  };

  for (const auto& t : mesh.triangles) {
    const Vec3& p0 = mesh.vertices[t[0]];
    const Vec3& p1 = mesh.vertices[t[1]];
    const Vec3& p2 = mesh.vertices[t[2]];
    Vec3 n = (p1 - p0).cross(p2 - p0);
    double a2 = n.norm();  // twice the area
    if (a2 <= 0.0) continue;
    for (int c = 0; c < 3; ++c) {
      normal[t[c]] += 0.5 * n;
      area[t[c]] += a2 / 6.0;  // one third of the triangle area
      ++edge_count[ekey(t[c], t[(c + 1) % 3])];
    }
    // Cotangent of the angle at each corner scales the opposite edge.
    for (int c = 0; c < 3; ++c) {
      int iv = t[c], ia = t[(c + 1) % 3], ib = t[(c + 2) % 3];
      Vec3 u = mesh.vertices[ia] - mesh.vertices[iv];
      Vec3 v = mesh.vertices[ib] - mesh.vertices[iv];
      double cot = u.dot(v) / a2;
      laplace[ia] += cot * (mesh.vertices[ib] - mesh.vertices[ia]);
      laplace[ib] += cot * (mesh.vertices[ia] - mesh.vertices[ib]);
    }
  }
  for (const auto& [key, count] : edge_count) {
    if (count != 2) {
      boundary[static_cast<int>(key >> 32)] = 1;
      boundary[static_cast<int>(key & 0xffffffffull)] = 1;
    }
  }

  std::vector<double> h(nv, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < nv; ++i) {
    if (boundary[i] || area[i] <= 0.0) continue;
    Vec3 lap = laplace[i] / (2.0 * area[i]);
    double mag = 0.5 * lap.norm();
    // Mean curvature vector points against the outward normal on convex
    // regions; H_sphere = +1/r with outward normals.
    h[i] = lap.dot(normal[i]) <= 0.0 ? mag : -mag;
  }
  return h;
}

ScalarFn tpms_field(TpmsKind kind, const Eigen::Vector3i& periods) {
  if (periods.minCoeff() < 1)
    throw Error(ErrorCode::InvalidArgument, "tpms_field: periods must be >= 1");
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  Vec3 freq(kTwoPi * periods.x(), kTwoPi * periods.y(), kTwoPi * periods.z());
  switch (kind) {
    case TpmsKind::Gyroid:
      return [freq](const Vec3& p) {
        double x = freq.x() * p.x(), y = freq.y() * p.y(), z = freq.z() * p.z();
        return std::sin(x) * std::cos(y) + std::sin(y) * std::cos(z) +
               std::sin(z) * std::cos(x);
      };
    case TpmsKind::SchwarzP:
      return [freq](const Vec3& p) {
        return std::cos(freq.x() * p.x()) + std::cos(freq.y() * p.y()) +
               std::cos(freq.z() * p.z());
      };
    case TpmsKind::Iwp:
      return [freq](const Vec3& p) {
        double x = freq.x() * p.x(), y = freq.y() * p.y(), z = freq.z() * p.z();
        return 2.0 * (std::cos(x) * std::cos(y) + std::cos(y) * std::cos(z) +
                      std::cos(z) * std::cos(x)) -
               (std::cos(2 * x) + std::cos(2 * y) + std::cos(2 * z));
      };
  }
  throw Error(ErrorCode::InvalidArgument, "tpms_field: unknown kind");
}

ScalarFn tpms_field(TpmsKind kind, int periods) {
  return tpms_field(kind, Eigen::Vector3i(periods, periods, periods));
}

namespace {

/// Minimal static kd-tree for nearest-distance queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> pts) : pts_(std::move(pts)) {
    idx_.resize(pts_.size());
    for (std::size_t i = 0; i < idx_.size(); ++i) idx_[i] = static_cast<int>(i);
    build(0, static_cast<int>(idx_.size()), 0);
  }

  double nearest_dist2(const Vec3& q) const {
    double best = std::numeric_limits<double>::max();
    query(q, 0, static_cast<int>(idx_.size()), 0, best);
    return best;
  }

 private:
  void build(int lo, int hi, int axis) {
    if (hi - lo <= 1) return;
    int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void query(const Vec3& q, int lo, int hi, int axis, double& best) const {
    if (lo >= hi) return;
    int mid = (lo + hi) / 2;
    const Vec3& p = pts_[idx_[mid]];
    best = std::min(best, (q - p).squaredNorm());
    double d = q[axis] - p[axis];
    int next = (axis + 1) % 3;
    if (d < 0) {
      query(q, lo, mid, next, best);
      if (d * d < best) query(q, mid + 1, hi, next, best);
    } else {
      query(q, mid + 1, hi, next, best);
      if (d * d < best) query(q, lo, mid, next, best);
    }
  }

  std::vector<Vec3> pts_;
  std::vector<int> idx_;
};

}  // namespace

ScalarFn equidistant_field(std::vector<Vec3> skeleton_a, std::vector<Vec3> skeleton_b) {
  if (skeleton_a.empty() || skeleton_b.empty())
    throw Error(ErrorCode::EmptySkeleton, "equidistant_field: empty skeleton");
  auto ta = std::make_shared<KdTree>(std::move(skeleton_a));
  auto tb = std::make_shared<KdTree>(std::move(skeleton_b));
  return [ta, tb](const Vec3& p) {
    return std::sqrt(tb->nearest_dist2(p)) - std::sqrt(ta->nearest_dist2(p));
  };
}

TriangleMesh laplacian_smooth(TriangleMesh mesh, int iterations, double step) {
  if (step <= 0.0 || step > 1.0)
    throw Error(ErrorCode::InvalidArgument, "laplacian_smooth: step must be in (0, 1]");

  const std::size_t nv = mesh.vertices.size();
  std::vector<std::vector<int>> neighbors(nv);
  std::vector<char> boundary(nv, 0);
  std::unordered_map<std::uint64_t, int> edge_count;
  auto ekey = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  };
  for (const auto& t : mesh.triangles) {
    for (int c = 0; c < 3; ++c) {
      int a = t[c], b = t[(c + 1) % 3];
      ++edge_count[ekey(a, b)];
    }
  }
  for (const auto& [key, count] : edge_count) {
    int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffull);
    neighbors[a].push_back(b);
    neighbors[b].push_back(a);
    if (count != 2) boundary[a] = boundary[b] = 1;
  }

  std::vector<Vec3> next(nv);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < nv; ++i) {
      if (boundary[i] || neighbors[i].empty()) {
        next[i] = mesh.vertices[i];
        continue;
      }
      Vec3 c = Vec3::Zero();
      for (int j : neighbors[i]) c += mesh.vertices[j];
      c /= static_cast<double>(neighbors[i].size());
      next[i] = mesh.vertices[i] + step * (c - mesh.vertices[i]);
    }
    mesh.vertices.swap(next);
  }
  return mesh;
}

void export_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format,
                 const std::string& header_comment) {
  if (format == MeshFormat::Obj) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
    if (!header_comment.empty()) std::fprintf(f, "# %s\n", header_comment.c_str());
    for (const Vec3& v : mesh.vertices)
      std::fprintf(f, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    for (const auto& t : mesh.triangles)
      std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    std::fclose(f);
    return;
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  char header[80] = {};
  std::snprintf(header, sizeof(header), "%s", header_comment.c_str());
  std::fwrite(header, 1, 80, f);
  std::uint32_t count = static_cast<std::uint32_t>(mesh.triangles.size());
  std::fwrite(&count, 4, 1, f);
  for (const auto& t : mesh.triangles) {
    Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                 .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    double len = n.norm();
    if (len > 0) n /= len;
    float rec[12] = {
        float(n.x()), float(n.y()), float(n.z()),
        float(mesh.vertices[t[0]].x()), float(mesh.vertices[t[0]].y()),
        float(mesh.vertices[t[0]].z()),
        float(mesh.vertices[t[1]].x()), float(mesh.vertices[t[1]].y()),
        float(mesh.vertices[t[1]].z()),
        float(mesh.vertices[t[2]].x()), float(mesh.vertices[t[2]].y()),
        float(mesh.vertices[t[2]].z()),
    };
    std::fwrite(rec, 4, 12, f);
    std::uint16_t attr = 0;
    std::fwrite(&attr, 2, 1, f);
  }
  std::fclose(f);
}

TriangleMesh import_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) {
      Vec3 v;
      if (std::sscanf(line.c_str(), "v %lf %lf %lf", &v.x(), &v.y(), &v.z()) == 3)
        mesh.vertices.push_back(v);
    } else if (line.rfind("f ", 0) == 0) {
      int a, b, c;
      if (std::sscanf(line.c_str(), "f %d %d %d", &a, &b, &c) == 3)
        mesh.triangles.push_back({a - 1, b - 1, c - 1});
    }
  }
  return mesh;
}

}  // namespace dualms
