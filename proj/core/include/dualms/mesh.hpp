#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualms/domain.hpp"

namespace dualms {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  // Optional per-vertex scalar channel (mean curvature); NaN marks vertices
  // where it is not evaluated.
  std::vector<double> vertex_scalar;

  bool empty() const { return triangles.empty(); }
};

/// Node-centered scalar samples over a box; node (i,j,k) sits at
/// origin + (i,j,k) * spacing, with (nx,ny,nz) nodes per axis.
struct ScalarGrid {
  int nx = 0, ny = 0, nz = 0;
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::vector<double> values;       // x-fastest
  std::vector<std::uint8_t> mask;   // empty = all inside; else 1 = inside

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  Vec3 position(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }
  bool inside(int i, int j, int k) const { return mask.empty() || mask[index(i, j, k)] != 0; }
};

using ScalarFn = std::function<double(const Vec3&)>;
/// Batched evaluator: fills out[i] = f(pts[i]).
using BatchScalarFn = std::function<void(std::span<const Vec3>, std::span<double>)>;

ScalarGrid sample_grid(const ScalarFn& f, const Aabb& bbox, int resolution,
                       const DesignDomain* mask = nullptr);
ScalarGrid sample_grid_batched(const BatchScalarFn& f, const Aabb& bbox, int resolution,
                               const DesignDomain* mask = nullptr);

/// Standard 256-case marching cubes with linear edge interpolation and global
/// edge-keyed vertex dedup; cells touching a masked node are skipped.
/// Triangles are wound so normals point toward increasing field values.
/// Throws EmptySurface when no cell crosses the isovalue.
TriangleMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

double surface_area(const TriangleMesh& mesh);

/// Signed volume (divergence theorem); meaningful for closed meshes.
double signed_volume(const TriangleMesh& mesh);

/// Cotangent-Laplacian mean curvature per vertex, sign convention
/// H = +1/r for a sphere with outward normals. Boundary vertices get NaN.
std::vector<double> mean_curvature(const TriangleMesh& mesh);

enum class TpmsKind { Gyroid, SchwarzP, Iwp };

/// Classical triply periodic implicit fields over the unit cube, `periods`
/// cells per axis.
ScalarFn tpms_field(TpmsKind kind, const Eigen::Vector3i& periods);
ScalarFn tpms_field(TpmsKind kind, int periods = 1);

/// g(x) = dist(x, B) - dist(x, A); the zero set is the equidistant surface
/// between the two skeleton point sets.
ScalarFn equidistant_field(std::vector<Vec3> skeleton_a, std::vector<Vec3> skeleton_b);

/// Uniform-weight Laplacian smoothing, boundary vertices fixed; step in (0,1].
TriangleMesh laplacian_smooth(TriangleMesh mesh, int iterations, double step);

/// Drops degenerate triangles (area below 1e-12 of the bbox-diagonal squared).
TriangleMesh cleanup(TriangleMesh mesh);

struct ThickenResult {
  TriangleMesh wall;
  TriangleMesh channel_a;  // bounds the region where the field is positive
  TriangleMesh channel_b;
  double wall_volume_fraction = 0.0;
};

/// Redistances the zero set on the grid (fast sweeping, signed by the field),
/// then extracts the +tau / -tau offsets. Throws ThicknessTooLarge when a
/// channel vanishes or falls apart into several components (checked by voxel
/// flood fill seeded at the given ports, or anywhere when ports are absent).
ThickenResult thicken(const ScalarGrid& grid, double tau,
                      const std::vector<Vec3>& ports_a = {},
                      const std::vector<Vec3>& ports_b = {});

/// Unsigned-distance-to-zero-set transform used by thicken; exposed for tests.
std::vector<double> redistance(const ScalarGrid& grid);

enum class MeshFormat { Obj, StlBinary };

void export_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format,
                 const std::string& header_comment = "");
TriangleMesh import_obj(const std::string& path);

}  // namespace dualms
