#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "dualms/domain.hpp"

namespace dualms {

struct Edge {
  int u = 0;  // u < v
  int v = 0;
  double w = 1.0;
};

/// Immutable once built; safe for concurrent reads.
struct SpatialGraph {
  std::vector<Vec3> vertices;
  std::vector<Edge> edges;
  std::map<int, Fluid> pinned;
  std::vector<std::vector<int>> adjacency;        // neighbor vertex ids
  std::vector<std::vector<int>> incident_edges;   // edge ids, aligned with adjacency

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  double total_weight() const;
  bool is_connected() const;
  void rebuild_adjacency();
};

/// Lloyd relaxation with fresh Monte-Carlo density samples each iteration.
/// Sites with no assigned samples stay put; centroids that escape the domain
/// are projected to the nearest assigned sample.
std::vector<Vec3> cvt_relax(std::vector<Vec3> points, const DesignDomain& domain,
                            int iterations, std::size_t density_samples, std::uint64_t seed);

/// Edge set of the 3D Delaunay tetrahedralization (incremental Bowyer-Watson,
/// exact-arithmetic fallback for near-degenerate predicates). A coplanar input
/// gets one deterministic jitter retry; a collinear one is DegenerateInput.
std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Vec3>& points);

struct WeightOptions {
  double penalty = 5.0;       // a in the two-level scheme
  int interior_samples = 1;   // 1 = midpoint test, 3 = three-point test
};

/// Two-level flow-alignment weights: penalty when the edge is closer to
/// perpendicular than parallel to the local flow (angle strictly inside
/// (pi/4, 3pi/4)), 1 otherwise. Edges sampling outside the domain are dropped.
SpatialGraph assign_weights(const std::vector<Vec3>& points,
                            const std::vector<std::pair<int, int>>& edges,
                            const DesignDomain& domain, const WeightOptions& opt = {});

/// Pins the nearest vertex to every port to that port's fluid.
SpatialGraph pin_ports(SpatialGraph graph, const DesignDomain& domain);

/// Full construction: sample, relax, triangulate, weight, pin. Throws
/// GraphDisconnected if the weighted graph is not connected.
struct GraphBuildOptions {
  int vertex_count = 500;
  int cvt_iterations = 20;
  std::size_t cvt_density_samples = 100000;
  WeightOptions weights;
};

SpatialGraph build_graph(const DesignDomain& domain, const GraphBuildOptions& opt,
                         std::uint64_t seed);

}  // namespace dualms
