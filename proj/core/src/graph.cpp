#include "dualms/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dualms/error.hpp"
#include "dualms/rng.hpp"

namespace dualms {

double SpatialGraph::total_weight() const {
  double s = 0.0;
  for (const Edge& e : edges) s += e.w;
  return s;
}

void SpatialGraph::rebuild_adjacency() {
  adjacency.assign(vertices.size(), {});
  incident_edges.assign(vertices.size(), {});
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    adjacency[e.u].push_back(e.v);
    adjacency[e.v].push_back(e.u);
    incident_edges[e.u].push_back(static_cast<int>(i));
    incident_edges[e.v].push_back(static_cast<int>(i));
  }
}

bool SpatialGraph::is_connected() const {
  if (vertices.empty()) return true;
  std::vector<char> seen(vertices.size(), 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == vertices.size();
}

std::vector<Vec3> cvt_relax(std::vector<Vec3> points, const DesignDomain& domain,
                            int iterations, std::size_t density_samples, std::uint64_t seed) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "cvt_relax: no points");
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "cvt_relax: iterations < 0");
  for (const Vec3& p : points) {
    if (!domain.contains(p))
      throw Error(ErrorCode::InvalidArgument, "cvt_relax: input point outside the domain");
  }

  const std::size_t n = points.size();
  std::vector<Vec3> sums(n);
  std::vector<std::size_t> counts(n);
  std::vector<Vec3> nearest_sample(n);
  std::vector<double> nearest_d2(n);

  for (int it = 0; it < iterations; ++it) {
    // Fresh density samples every iteration; a distinct stream per iteration
    // keeps the assignment independent of how many samples earlier runs drew.
    std::vector<Vec3> samples =
        sample_interior(domain, density_samples, seed ^ (0xc5a11ull + static_cast<std::uint64_t>(it) * 0x9e3779b9ull));
    std::fill(sums.begin(), sums.end(), Vec3::Zero());
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(nearest_d2.begin(), nearest_d2.end(), std::numeric_limits<double>::max());

    for (const Vec3& s : samples) {
      int best = 0;
      double bd = (s - points[0]).squaredNorm();
      for (std::size_t j = 1; j < n; ++j) {
        double d = (s - points[j]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = static_cast<int>(j);
        }
      }
      sums[best] += s;
      ++counts[best];
      if (bd < nearest_d2[best]) {
        nearest_d2[best] = bd;
        nearest_sample[best] = s;
      }
    }

    for (std::size_t j = 0; j < n; ++j) {
      if (counts[j] == 0) continue;  // empty cell: site stays fixed
      Vec3 c = sums[j] / static_cast<double>(counts[j]);
      points[j] = domain.contains(c) ? c : nearest_sample[j];
    }
  }
  return points;
}

SpatialGraph assign_weights(const std::vector<Vec3>& points,
                            const std::vector<std::pair<int, int>>& edges,
                            const DesignDomain& domain, const WeightOptions& opt) {
  if (opt.penalty <= 1.0)
    throw Error(ErrorCode::InvalidArgument, "assign_weights: penalty must be > 1");

  SpatialGraph g;
  g.vertices = points;

  // One flow query per vertex, cached.
  std::vector<Vec3> flow(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    flow[i] = flow_at(domain.flow, domain, points[i]);

  constexpr double kQuarterPi = 0.78539816339744830962;
  for (auto [u, v] : edges) {
    if (u > v) std::swap(u, v);
    bool inside = true;
    int ns = std::max(1, opt.interior_samples);
    for (int s = 1; s <= ns && inside; ++s) {
      double t = static_cast<double>(s) / (ns + 1);
      inside = domain.contains(points[u] + t * (points[v] - points[u]));
    }
    if (!inside) continue;

    Vec3 f = flow[u] + flow[v];
    double fn = f.norm();
    if (fn <= 1e-12)
      throw Error(ErrorCode::ZeroFlow, "flow field vanishes on edge (" + std::to_string(u) +
                                           "," + std::to_string(v) + ")");
    Vec3 d = (points[v] - points[u]).normalized();
    double c = std::clamp(d.dot(f / fn), -1.0, 1.0);
    double theta = std::acos(c);
    double w = (theta > kQuarterPi && theta < 3.0 * kQuarterPi) ? opt.penalty : 1.0;
    g.edges.push_back({u, v, w});
  }
  g.rebuild_adjacency();
  return g;
}

SpatialGraph pin_ports(SpatialGraph graph, const DesignDomain& domain) {
  for (const Port& port : domain.ports) {
    int best = -1;
    double bd = std::numeric_limits<double>::max();
    for (int i = 0; i < graph.num_vertices(); ++i) {
      double d = (graph.vertices[i] - port.position).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    if (best < 0) throw Error(ErrorCode::InvalidArgument, "pin_ports: graph has no vertices");
    auto [it, inserted] = graph.pinned.emplace(best, port.fluid);
    if (!inserted && it->second != port.fluid) {
      throw Error(ErrorCode::PortConflict,
                  "ports of both fluids bind to vertex " + std::to_string(best));
    }
  }
  return graph;
}

SpatialGraph build_graph(const DesignDomain& domain, const GraphBuildOptions& opt,
                         std::uint64_t seed) {
  std::vector<Vec3> pts = sample_interior(domain, opt.vertex_count, seed);
  pts = cvt_relax(std::move(pts), domain, opt.cvt_iterations, opt.cvt_density_samples,
                  seed ^ 0x11d0full);
  auto edges = delaunay_edges(pts);
  SpatialGraph g = assign_weights(pts, edges, domain, opt.weights);
  g = pin_ports(std::move(g), domain);
  if (!g.is_connected())
    throw Error(ErrorCode::GraphDisconnected,
                "graph is disconnected after interior-edge filtering");
  return g;
}

}  // namespace dualms
