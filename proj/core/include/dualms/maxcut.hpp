#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualms/graph.hpp"

namespace dualms {

/// Two-coloring of the graph vertices; +1 and -1 are the two fluids
/// (A maps to +1, B to -1).
struct Partition {
  std::vector<std::int8_t> labels;

  static constexpr std::int8_t kA = +1;
  static constexpr std::int8_t kB = -1;
  static std::int8_t label_of(Fluid f) { return f == Fluid::A ? kA : kB; }
};

struct CutRecord {
  int iteration = 0;
  double objective = 0.0;
  int moved_vertex = -1;  // -1 for the initial record
};

using CutTrace = std::vector<CutRecord>;

struct FeasibilityReport {
  bool feasible = true;
  std::string constraint;       // which constraint failed
  std::vector<int> vertices;    // offending vertices, when applicable
};

/// Total weight of edges whose endpoints carry different labels.
double cut_value(const SpatialGraph& graph, const Partition& part);

/// Both induced subgraphs connected and nonempty, every induced degree >= 2,
/// pins respected.
FeasibilityReport check_feasible(const SpatialGraph& graph, const Partition& part);
bool is_feasible(const SpatialGraph& graph, const Partition& part);

/// Alternating BFS growth from the pinned vertices of each fluid, followed by
/// a bounded repair loop for degree-1 violations. When the greedy start fails
/// on a graph of at most 20 vertices, an exhaustive scan for any feasible
/// labeling runs before InfeasibleStart is thrown.
Partition initial_partition(const SpatialGraph& graph, std::uint64_t seed);

/// Greedy best-improvement single-vertex flips under the connectivity and
/// degree constraints; ties break toward the lowest vertex index. The trace
/// starts with the input objective and is non-decreasing.
std::pair<Partition, CutTrace> optimize(const SpatialGraph& graph, Partition part,
                                        int max_rounds);

/// Exhaustive oracle over all labelings respecting pins; |V| <= 20.
/// Returns nothing when no feasible labeling exists.
std::optional<std::pair<Partition, double>> brute_force(const SpatialGraph& graph);

}  // namespace dualms
