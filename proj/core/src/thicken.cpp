#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "dualms/error.hpp"
#include "dualms/mesh.hpp"

namespace dualms {

namespace {

constexpr double kInf = std::numeric_limits<double>::max();

// Eikonal update |grad d| = 1 from the per-axis neighbor minima.
double eikonal_solve(double ax, double ay, double az, const Vec3& h) {
  std::array<std::pair<double, double>, 3> a = {
      std::pair{ax, h.x()}, std::pair{ay, h.y()}, std::pair{az, h.z()}};
  std::sort(a.begin(), a.end());
  double d = a[0].first + a[0].second;
  if (d <= a[1].first) return d;
  {
    // Two-term quadratic: sum((d - a_i)/h_i)^2 = 1.
    double p = 1.0 / (a[0].second * a[0].second) + 1.0 / (a[1].second * a[1].second);
    double q = a[0].first / (a[0].second * a[0].second) +
               a[1].first / (a[1].second * a[1].second);
    double r = a[0].first * a[0].first / (a[0].second * a[0].second) +
               a[1].first * a[1].first / (a[1].second * a[1].second) - 1.0;
    double disc = q * q - p * r;
    d = (q + std::sqrt(std::max(disc, 0.0))) / p;
    if (d <= a[2].first) return d;
  }
  double p = 0.0, q = 0.0, r = -1.0;
  for (const auto& [ai, hi] : a) {
    p += 1.0 / (hi * hi);
    q += ai / (hi * hi);
    r += ai * ai / (hi * hi);
  }
  double disc = q * q - p * r;
  return (q + std::sqrt(std::max(disc, 0.0))) / p;
}

}  // namespace

std::vector<double> redistance(const ScalarGrid& grid) {
  const int nx = grid.nx, ny = grid.ny, nz = grid.nz;
  if (nx < 2 || ny < 2 || nz < 2)
    throw Error(ErrorCode::InvalidArgument, "redistance: grid too small");
  std::vector<double> d(grid.values.size(), kInf);

  auto inside = [&](int i, int j, int k) { return grid.inside(i, j, k); };

  // Initialize from sign changes along grid edges.
  static constexpr int kAxis[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!inside(i, j, k)) continue;
        std::size_t idx = grid.index(i, j, k);
        double f0 = grid.values[idx];
        if (f0 == 0.0) d[idx] = 0.0;
        for (int ax = 0; ax < 3; ++ax) {
          int ni = i + kAxis[ax][0], nj = j + kAxis[ax][1], nk = k + kAxis[ax][2];
          if (ni >= nx || nj >= ny || nk >= nz || !inside(ni, nj, nk)) continue;
          std::size_t nidx = grid.index(ni, nj, nk);
          double f1 = grid.values[nidx];
          if (f0 * f1 >= 0.0) continue;
          double frac = std::abs(f0) / (std::abs(f0) + std::abs(f1));
          double h = grid.spacing[ax];
          d[idx] = std::min(d[idx], frac * h);
          d[nidx] = std::min(d[nidx], (1.0 - frac) * h);
        }
      }

  // Fast sweeping over the eight axis orderings, two rounds.
  auto neighbor_min = [&](int i, int j, int k, int ax) {
    double lo = kInf;
    int pi = i - kAxis[ax][0], pj = j - kAxis[ax][1], pk = k - kAxis[ax][2];
    int qi = i + kAxis[ax][0], qj = j + kAxis[ax][1], qk = k + kAxis[ax][2];
    if (pi >= 0 && pj >= 0 && pk >= 0 && inside(pi, pj, pk))
      lo = std::min(lo, d[grid.index(pi, pj, pk)]);
    if (qi < nx && qj < ny && qk < nz && inside(qi, qj, qk))
      lo = std::min(lo, d[grid.index(qi, qj, qk)]);
    return lo;
  };

  for (int round = 0; round < 2; ++round) {
    for (int sweep = 0; sweep < 8; ++sweep) {
      int si = (sweep & 1) ? -1 : 1;
      int sj = (sweep & 2) ? -1 : 1;
      int sk = (sweep & 4) ? -1 : 1;
      for (int kk = 0; kk < nz; ++kk) {
        int k = sk > 0 ? kk : nz - 1 - kk;
        for (int jj = 0; jj < ny; ++jj) {
          int j = sj > 0 ? jj : ny - 1 - jj;
          for (int ii = 0; ii < nx; ++ii) {
            int i = si > 0 ? ii : nx - 1 - ii;
            if (!inside(i, j, k)) continue;
            std::size_t idx = grid.index(i, j, k);
            double upd = eikonal_solve(neighbor_min(i, j, k, 0), neighbor_min(i, j, k, 1),
                                       neighbor_min(i, j, k, 2), grid.spacing);
            if (upd < d[idx]) d[idx] = upd;
          }
        }
      }
    }
  }
  return d;
}

namespace {

// Single-component check by 6-connected flood fill over the nodes where
// `in_region` holds; the seed is the region node nearest to `anchor` when
// given, else the first region node.
void check_region_connected(const ScalarGrid& grid, const std::vector<char>& in_region,
                            const std::vector<Vec3>& anchors, const char* which) {
  const int nx = grid.nx, ny = grid.ny, nz = grid.nz;
  std::size_t total = 0;
  for (char c : in_region) total += c != 0;
  if (total == 0)
    throw Error(ErrorCode::ThicknessTooLarge,
                std::string("thicken: channel ") + which + " vanished");

  auto nearest_region_node = [&](const Vec3& p) {
    double best = kInf;
    std::size_t best_idx = 0;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          std::size_t idx = grid.index(i, j, k);
          if (!in_region[idx]) continue;
          double d2 = (grid.position(i, j, k) - p).squaredNorm();
          if (d2 < best) best = d2, best_idx = idx;
        }
    return best_idx;
  };

  std::size_t seed;
  if (!anchors.empty()) {
    seed = nearest_region_node(anchors.front());
  } else {
    seed = 0;
    while (!in_region[seed]) ++seed;
  }

  std::vector<char> seen(in_region.size(), 0);
  std::deque<std::size_t> queue{seed};
  seen[seed] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    std::size_t idx = queue.front();
    queue.pop_front();
    ++reached;
    int i = static_cast<int>(idx % nx);
    int j = static_cast<int>((idx / nx) % ny);
    int k = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
    static constexpr int kStep[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                        {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
    for (const auto& s : kStep) {
      int ni = i + s[0], nj = j + s[1], nk = k + s[2];
      if (ni < 0 || nj < 0 || nk < 0 || ni >= nx || nj >= ny || nk >= nz) continue;
      std::size_t nidx = grid.index(ni, nj, nk);
      if (seen[nidx] || !in_region[nidx]) continue;
      seen[nidx] = 1;
      queue.push_back(nidx);
    }
  }
  if (reached != total)
    throw Error(ErrorCode::ThicknessTooLarge,
                std::string("thicken: channel ") + which + " split into several components");

  // Every anchor must land on the same component.
  for (std::size_t a = 1; a < anchors.size(); ++a) {
    if (!seen[nearest_region_node(anchors[a])])
      throw Error(ErrorCode::ThicknessTooLarge,
                  std::string("thicken: channel ") + which + " does not reach all ports");
  }
}

}  // namespace

ThickenResult thicken(const ScalarGrid& grid, double tau, const std::vector<Vec3>& ports_a,
                      const std::vector<Vec3>& ports_b) {
  double h_max = grid.spacing.maxCoeff();
  if (tau <= 0.0 || tau < 2.0 * h_max)
    throw Error(ErrorCode::InvalidArgument,
                "thicken: tau must be positive and at least two grid spacings");

  std::vector<double> dist = redistance(grid);

  // Signed distance, sign taken from the input field.
  ScalarGrid sd = grid;
  std::size_t inside_count = 0, wall_count = 0;
  for (std::size_t idx = 0; idx < sd.values.size(); ++idx) {
    double s = grid.values[idx] < 0.0 ? -dist[idx] : dist[idx];
    sd.values[idx] = s;
    if (!grid.mask.empty() && grid.mask[idx] == 0) continue;
    ++inside_count;
    if (std::abs(s) <= tau) ++wall_count;
  }

  ThickenResult result;
  result.wall_volume_fraction =
      inside_count > 0 ? static_cast<double>(wall_count) / inside_count : 0.0;

  std::vector<char> region_a(sd.values.size(), 0), region_b(sd.values.size(), 0);
  for (std::size_t idx = 0; idx < sd.values.size(); ++idx) {
    if (!grid.mask.empty() && grid.mask[idx] == 0) continue;
    if (sd.values[idx] > tau) region_a[idx] = 1;
    if (sd.values[idx] < -tau) region_b[idx] = 1;
  }
  check_region_connected(sd, region_a, ports_a, "A");
  check_region_connected(sd, region_b, ports_b, "B");

  // Wall is bounded by |s| = tau; channels by the signed offsets.
  ScalarGrid abs_grid = sd;
  for (double& v : abs_grid.values) v = std::abs(v) - tau;
  result.wall = marching_cubes(abs_grid, 0.0);
  result.channel_a = marching_cubes(sd, tau);
  ScalarGrid neg = sd;
  for (double& v : neg.values) v = -v;
  result.channel_b = marching_cubes(neg, tau);
  return result;
}

}  // namespace dualms
