#include "dualms/maxcut.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "dualms/error.hpp"
#include "dualms/rng.hpp"

namespace dualms {
namespace {

// Induced same-side degree for every vertex.
std::vector<int> same_side_degree(const SpatialGraph& g, const std::vector<std::int8_t>& labels) {
  std::vector<int> deg(g.vertices.size(), 0);
  for (const Edge& e : g.edges) {
    if (labels[e.u] == labels[e.v]) {
      ++deg[e.u];
      ++deg[e.v];
    }
  }
  return deg;
}

// Is the side holding `label` connected, optionally pretending `skip` left it?
bool side_connected(const SpatialGraph& g, const std::vector<std::int8_t>& labels,
                    std::int8_t label, int skip = -1) {
  int n = g.num_vertices();
  int start = -1, total = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] == label && i != skip) {
      if (start < 0) start = i;
      ++total;
    }
  }
  if (total == 0) return false;
  std::vector<char> seen(n, 0);
  std::vector<int> stack = {start};
  seen[start] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : g.adjacency[u]) {
      if (v == skip || seen[v] || labels[v] != label) continue;
      seen[v] = 1;
      ++count;
      stack.push_back(v);
    }
  }
  return count == total;
}

int count_label(const std::vector<std::int8_t>& labels, std::int8_t label) {
  return static_cast<int>(std::count(labels.begin(), labels.end(), label));
}

}  // namespace

double cut_value(const SpatialGraph& graph, const Partition& part) {
  if (part.labels.size() != graph.vertices.size())
    throw Error(ErrorCode::InvalidArgument, "cut_value: label count != vertex count");
  double s = 0.0;
  for (const Edge& e : graph.edges)
    if (part.labels[e.u] != part.labels[e.v]) s += e.w;
  return s;
}

FeasibilityReport check_feasible(const SpatialGraph& graph, const Partition& part) {
  FeasibilityReport rep;
  const auto& labels = part.labels;
  if (labels.size() != graph.vertices.size()) {
    rep.feasible = false;
    rep.constraint = "label count mismatch";
    return rep;
  }
  for (const auto& [v, fluid] : graph.pinned) {
    if (labels[v] != Partition::label_of(fluid)) {
      rep.feasible = false;
      rep.constraint = "pinned vertex relabeled";
      rep.vertices.push_back(v);
    }
  }
  if (!rep.feasible) return rep;

  if (count_label(labels, Partition::kA) == 0 || count_label(labels, Partition::kB) == 0) {
    rep.feasible = false;
    rep.constraint = "empty side";
    return rep;
  }
  std::vector<int> deg = same_side_degree(graph, labels);
  for (int v = 0; v < graph.num_vertices(); ++v) {
    if (deg[v] < 2) {
      rep.feasible = false;
      rep.constraint = "induced degree < 2";
      rep.vertices.push_back(v);
    }
  }
  if (!rep.feasible) return rep;

  for (std::int8_t side : {Partition::kA, Partition::kB}) {
    if (!side_connected(graph, labels, side)) {
      rep.feasible = false;
      rep.constraint = side == Partition::kA ? "side A disconnected" : "side B disconnected";
      return rep;
    }
  }
  return rep;
}

bool is_feasible(const SpatialGraph& graph, const Partition& part) {
  return check_feasible(graph, part).feasible;
}

namespace {

// A repair / optimization flip is admissible when the moved vertex gains
// induced degree >= 2 on its new side, neither side empties, and the old side
// stays connected without it. (Adding a vertex adjacent to a connected side
// cannot disconnect it.)
bool flip_keeps_structure(const SpatialGraph& g, const std::vector<std::int8_t>& labels,
                          const std::vector<int>& deg_same, int v) {
  int deg_total = static_cast<int>(g.adjacency[v].size());
  int deg_new = deg_total - deg_same[v];
  if (deg_new < 2) return false;
  std::int8_t old_label = labels[v];
  int old_count = count_label(labels, old_label);
  if (old_count <= 1) return false;
  return side_connected(g, labels, old_label, v);
}

// Strict per-neighbor degree condition used by the optimizer: old-side
// neighbors must keep induced degree >= 2 after losing v.
bool flip_keeps_degrees(const SpatialGraph& g, const std::vector<std::int8_t>& labels,
                        const std::vector<int>& deg_same, int v) {
  for (int u : g.adjacency[v])
    if (labels[u] == labels[v] && deg_same[u] - 1 < 2) return false;
  return true;
}

void apply_flip(const SpatialGraph& g, std::vector<std::int8_t>& labels,
                std::vector<int>& deg_same, int v) {
  std::int8_t old_label = labels[v];
  labels[v] = static_cast<std::int8_t>(-old_label);
  int same = 0;
  for (int u : g.adjacency[v]) {
    if (u == v) continue;
    if (labels[u] == old_label) {
      --deg_same[u];
    } else {
      ++deg_same[u];
      ++same;
    }
  }
  deg_same[v] = same;
}

// Deterministic exhaustive scan for a feasible labeling; small graphs only.
// XOR-ing the scan order with a seeded mask keeps the scan a bijection while
// letting different seeds land on different feasible labelings.
std::optional<Partition> exhaustive_feasible(const SpatialGraph& graph, std::uint64_t seed) {
  const int n = graph.num_vertices();
  if (n > 20) return std::nullopt;
  Rng rng(seed, rng_stream::kMaxcutInit);
  const std::uint32_t scramble = static_cast<std::uint32_t>(rng.next_u64()) & ((1u << n) - 1);
  for (std::uint32_t i = 0; i < (1u << n); ++i) {
    std::uint32_t mask = i ^ scramble;
    Partition part;
    part.labels.resize(n);
    for (int v = 0; v < n; ++v)
      part.labels[v] = (mask >> v) & 1 ? Partition::kA : Partition::kB;
    if (is_feasible(graph, part)) return part;
  }
  return std::nullopt;
}

Partition heuristic_partition(const SpatialGraph& graph, std::uint64_t seed);

}  // namespace

Partition initial_partition(const SpatialGraph& graph, std::uint64_t seed) {
  try {
    return heuristic_partition(graph, seed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InfeasibleStart) throw;
    // The greedy growth can stall on small dense graphs that still admit a
    // feasible split; fall back to an exhaustive scan when that is cheap.
    if (auto part = exhaustive_feasible(graph, seed)) return *part;
    throw;
  }
}

namespace {

Partition heuristic_partition(const SpatialGraph& graph, std::uint64_t seed) {
  const int n = graph.num_vertices();
  if (n < 2) throw Error(ErrorCode::InfeasibleStart, "graph too small to partition");

  std::vector<std::int8_t> labels(n, 0);
  std::deque<int> frontier[2];

  auto seed_side = [&](int v, std::int8_t label) {
    labels[v] = label;
    for (int u : graph.adjacency[v]) frontier[label == Partition::kA ? 0 : 1].push_back(u);
  };

  bool have[2] = {false, false};
  for (const auto& [v, fluid] : graph.pinned) {
    seed_side(v, Partition::label_of(fluid));
    have[fluid == Fluid::A ? 0 : 1] = true;
  }
  Rng rng(seed, rng_stream::kMaxcutInit);
  for (int side = 0; side < 2; ++side) {
    if (have[side]) continue;
    int v;
    do {
      v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    } while (labels[v] != 0);
    seed_side(v, side == 0 ? Partition::kA : Partition::kB);
  }

  // Alternating region growth: each side claims one adjacent unlabeled vertex
  // per turn, so neither side floods the graph.
  int remaining = n - count_label(labels, Partition::kA) - count_label(labels, Partition::kB);
  int side = 0, idle = 0;
  while (remaining > 0 && idle < 2) {
    std::int8_t label = side == 0 ? Partition::kA : Partition::kB;
    bool claimed = false;
    while (!frontier[side].empty()) {
      int v = frontier[side].front();
      frontier[side].pop_front();
      if (labels[v] != 0) continue;
      labels[v] = label;
      --remaining;
      for (int u : graph.adjacency[v])
        if (labels[u] == 0) frontier[side].push_back(u);
      claimed = true;
      break;
    }
    idle = claimed ? 0 : idle + 1;
    side = 1 - side;
  }
  if (remaining > 0)
    throw Error(ErrorCode::InfeasibleStart, "graph not reachable from the seed vertices");

  // Repair loop for degree-1 violations.
  std::vector<int> deg_same = same_side_degree(graph, labels);
  int budget = 10 * n;
  while (budget > 0) {
    bool moved = false;
    bool any_violation = false;
    for (int v = 0; v < n && !moved; ++v) {
      if (deg_same[v] >= 2) continue;
      any_violation = true;
      if (graph.pinned.contains(v)) continue;
      if (!flip_keeps_structure(graph, labels, deg_same, v)) continue;
      apply_flip(graph, labels, deg_same, v);
      moved = true;
      --budget;
    }
    if (!any_violation) break;
    if (!moved) throw Error(ErrorCode::InfeasibleStart, "degree repair stalled");
  }

  Partition part{std::move(labels)};
  FeasibilityReport rep = check_feasible(graph, part);
  if (!rep.feasible)
    throw Error(ErrorCode::InfeasibleStart, "no feasible start found: " + rep.constraint);
  return part;
}

}  // namespace

std::pair<Partition, CutTrace> optimize(const SpatialGraph& graph, Partition part,
                                        int max_rounds) {
  FeasibilityReport rep = check_feasible(graph, part);
  if (!rep.feasible)
    throw Error(ErrorCode::NotFeasible, "optimize: input partition infeasible: " + rep.constraint);

  const int n = graph.num_vertices();
  std::vector<std::int8_t>& labels = part.labels;
  std::vector<int> deg_same = same_side_degree(graph, labels);
  double value = cut_value(graph, part);

  CutTrace trace;
  trace.push_back({0, value, -1});

  for (int round = 0; round < max_rounds; ++round) {
    // Cut deltas of all candidate flips, best first; ties toward low index.
    std::vector<std::pair<double, int>> candidates;
    candidates.reserve(n);
    for (int v = 0; v < n; ++v) {
      if (graph.pinned.contains(v)) continue;
      double delta = 0.0;
      for (int ei : graph.incident_edges[v]) {
        const Edge& e = graph.edges[ei];
        int u = e.u == v ? e.v : e.u;
        delta += labels[u] == labels[v] ? e.w : -e.w;
      }
      if (delta > 0.0) candidates.emplace_back(delta, v);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
              });

    int chosen = -1;
    double chosen_delta = 0.0;
    for (const auto& [delta, v] : candidates) {
      if (!flip_keeps_degrees(graph, labels, deg_same, v)) continue;
      if (!flip_keeps_structure(graph, labels, deg_same, v)) continue;
      chosen = v;
      chosen_delta = delta;
      break;
    }
    if (chosen < 0) break;

    apply_flip(graph, labels, deg_same, chosen);
    value += chosen_delta;
    trace.push_back({round + 1, value, chosen});
  }
  return {std::move(part), std::move(trace)};
}

std::optional<std::pair<Partition, double>> brute_force(const SpatialGraph& graph) {
  const int n = graph.num_vertices();
  if (n > 20) throw Error(ErrorCode::TooLarge, "brute_force is limited to |V| <= 20");

  std::vector<int> free_vertices;
  std::vector<std::int8_t> base(n, 0);
  for (const auto& [v, fluid] : graph.pinned) base[v] = Partition::label_of(fluid);
  for (int v = 0; v < n; ++v)
    if (base[v] == 0) free_vertices.push_back(v);

  // With no pins the cut is label-swap symmetric; fix the first free vertex.
  std::size_t fixed = graph.pinned.empty() && !free_vertices.empty() ? 1 : 0;
  if (fixed == 1) base[free_vertices[0]] = Partition::kA;
  std::size_t bits = free_vertices.size() - fixed;

  std::optional<std::pair<Partition, double>> best;
  for (std::uint64_t mask = 0; mask < (1ull << bits); ++mask) {
    Partition part{base};
    for (std::size_t i = 0; i < bits; ++i) {
      part.labels[free_vertices[i + fixed]] =
          (mask >> i) & 1 ? Partition::kA : Partition::kB;
    }
    if (fixed == 0) {
      // nothing extra
    }
    if (!is_feasible(graph, part)) continue;
    double v = cut_value(graph, part);
    if (!best || v > best->second) best = {std::move(part), v};
  }
  return best;
}

}  // namespace dualms
