#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualms/domain.hpp"
#include "dualms/field.hpp"
#include "dualms/graph.hpp"
#include "dualms/maxcut.hpp"
#include "dualms/mesh.hpp"

namespace dualms {

/// 64-bit FNV-1a; used to stamp artifacts with a config fingerprint.
std::uint64_t fnv1a(std::string_view s);

/// Canonical "config_hash=<hex16> seed=<dec>" stamp embedded in every artifact.
std::string artifact_header(std::uint64_t config_hash, std::uint64_t seed);

/// Domain description: JSON with `shape` (CSG tree or voxel-grid reference),
/// `ports`, and `flow` sections. Voxel paths resolve relative to the file.
DesignDomain load_domain(const std::string& path);
DesignDomain parse_domain(const std::string& json_text, const std::string& base_dir);

/// Raw little-endian uint8 occupancy plus a JSON sidecar (dims, origin, spacing).
VoxelGrid load_voxels(const std::string& raw_path, const std::string& sidecar_path);
void save_voxels(const VoxelGrid& grid, const std::string& raw_path,
                 const std::string& sidecar_path);

void save_graph(const SpatialGraph& graph, const std::string& path,
                std::uint64_t config_hash, std::uint64_t seed);
SpatialGraph load_graph(const std::string& path);

struct Skeleton {
  std::vector<Vec3> vertices;
  std::vector<std::pair<int, int>> edges;  // induced edges, reindexed
};

/// The subgraph induced by one side of a partition, vertices reindexed densely.
Skeleton induced_skeleton(const SpatialGraph& graph, const Partition& part, std::int8_t side);

void save_skeleton(const Skeleton& skeleton, const std::string& path,
                   std::uint64_t config_hash, std::uint64_t seed);
Skeleton load_skeleton(const std::string& path);

void save_cut_trace(const CutTrace& trace, const std::string& path,
                    std::uint64_t config_hash, std::uint64_t seed);
void save_train_trace(const TrainTrace& trace, const std::string& path,
                      std::uint64_t config_hash, std::uint64_t seed);

void save_checkpoint(const FieldModel& model, const std::string& path,
                     std::uint64_t config_hash, std::uint64_t seed);
FieldModel load_checkpoint(const std::string& path);

struct SurfaceDiagnostics {
  std::string name;
  int vertex_count = 0;
  int triangle_count = 0;
  double area = 0.0;
  double volume = 0.0;
  double h_mean = 0.0;
  double h_median = 0.0;
  double h_iqr = 0.0;
  double h_min = 0.0;
  double h_max = 0.0;
  double wall_volume_fraction = -1.0;  // -1 when not applicable
};

/// Area, signed volume, and mean-curvature statistics over interior vertices.
SurfaceDiagnostics diagnose_mesh(const TriangleMesh& mesh, const std::string& name);

void save_diagnostics(const std::vector<SurfaceDiagnostics>& rows, const std::string& path,
                      std::uint64_t config_hash, std::uint64_t seed);

}  // namespace dualms
