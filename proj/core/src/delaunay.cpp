#include <algorithm>
#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "dualms/error.hpp"
#include "dualms/graph.hpp"
#include "dualms/rng.hpp"

namespace dualms {
namespace {

using Rat = boost::multiprecision::cpp_rational;

// Determinant evaluated alongside its absolute-term magnitude; the magnitude
// bounds the floating-point error and decides when to fall back to exact
// rational arithmetic.
struct Det {
  double value;
  double mag;
};

Det det3m(double a, double b, double c, double d, double e, double f, double g, double h,
          double i) {
  double v = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  double m = std::abs(a) * (std::abs(e * i) + std::abs(f * h)) +
             std::abs(b) * (std::abs(d * i) + std::abs(f * g)) +
             std::abs(c) * (std::abs(d * h) + std::abs(e * g));
  return {v, m};
}

Rat det3r(const Rat& a, const Rat& b, const Rat& c, const Rat& d, const Rat& e, const Rat& f,
          const Rat& g, const Rat& h, const Rat& i) {
  return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
}

constexpr double kDetEps = 1e-12;

/// Sign of det [b-a; c-a; d-a]; > 0 when d lies on the positive side of the
/// oriented plane (a,b,c).
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Vec3 ab = b - a, ac = c - a, ad = d - a;
  Det r = det3m(ab.x(), ab.y(), ab.z(), ac.x(), ac.y(), ac.z(), ad.x(), ad.y(), ad.z());
  if (std::abs(r.value) > kDetEps * r.mag) return r.value > 0 ? 1 : -1;
  // Exact fallback.
  auto rx = [](double t) { return Rat(t); };
  Rat v = det3r(rx(b.x()) - rx(a.x()), rx(b.y()) - rx(a.y()), rx(b.z()) - rx(a.z()),
                rx(c.x()) - rx(a.x()), rx(c.y()) - rx(a.y()), rx(c.z()) - rx(a.z()),
                rx(d.x()) - rx(a.x()), rx(d.y()) - rx(a.y()), rx(d.z()) - rx(a.z()));
  if (v == 0) return 0;
  return v > 0 ? 1 : -1;
}

/// Sign of the insphere determinant: > 0 when p is strictly inside the
/// circumsphere of the positively oriented tetrahedron (a,b,c,d).
int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& p) {
  auto row = [&](const Vec3& q, std::array<double, 4>& r) {
    Vec3 dq = q - p;
    r = {dq.x(), dq.y(), dq.z(), dq.squaredNorm()};
  };
  std::array<double, 4> ra, rb, rc, rd;
  row(a, ra);
  row(b, rb);
  row(c, rc);
  row(d, rd);

  // Cofactor expansion along the last column.
  Det m0 = det3m(rb[0], rb[1], rb[2], rc[0], rc[1], rc[2], rd[0], rd[1], rd[2]);
  Det m1 = det3m(ra[0], ra[1], ra[2], rc[0], rc[1], rc[2], rd[0], rd[1], rd[2]);
  Det m2 = det3m(ra[0], ra[1], ra[2], rb[0], rb[1], rb[2], rd[0], rd[1], rd[2]);
  Det m3 = det3m(ra[0], ra[1], ra[2], rb[0], rb[1], rb[2], rc[0], rc[1], rc[2]);
  // Cofactor value is negative for interior points under our orient3d
  // convention (det over rows b-a, c-a, d-a), so negate to get ">0 = inside".
  double v = ra[3] * m0.value - rb[3] * m1.value + rc[3] * m2.value - rd[3] * m3.value;
  double mag = std::abs(ra[3]) * m0.mag + std::abs(rb[3]) * m1.mag + std::abs(rc[3]) * m2.mag +
               std::abs(rd[3]) * m3.mag;
  if (std::abs(v) > kDetEps * mag) return v > 0 ? 1 : -1;

  // Exact fallback.
  auto rrow = [&](const Vec3& q, std::array<Rat, 4>& r) {
    Rat x = Rat(q.x()) - Rat(p.x());
    Rat y = Rat(q.y()) - Rat(p.y());
    Rat z = Rat(q.z()) - Rat(p.z());
    r = {x, y, z, x * x + y * y + z * z};
  };
  std::array<Rat, 4> qa, qb, qc, qd;
  rrow(a, qa);
  rrow(b, qb);
  rrow(c, qc);
  rrow(d, qd);
  Rat e0 = det3r(qb[0], qb[1], qb[2], qc[0], qc[1], qc[2], qd[0], qd[1], qd[2]);
  Rat e1 = det3r(qa[0], qa[1], qa[2], qc[0], qc[1], qc[2], qd[0], qd[1], qd[2]);
  Rat e2 = det3r(qa[0], qa[1], qa[2], qb[0], qb[1], qb[2], qd[0], qd[1], qd[2]);
  Rat e3 = det3r(qa[0], qa[1], qa[2], qb[0], qb[1], qb[2], qc[0], qc[1], qc[2]);
  Rat ev = qa[3] * e0 - qb[3] * e1 + qc[3] * e2 - qd[3] * e3;
  if (ev == 0) return 0;
  return ev > 0 ? 1 : -1;
}

struct Tet {
  std::array<int, 4> v;
  bool alive = true;
};

// Effective dimension of the point cloud from the covariance spectrum. The
// tolerance sits well above the eigensolver's noise floor (~1e-15 relative).
int point_rank(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : pts) {
    Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  double lo = es.eigenvalues()(0), mid = es.eigenvalues()(1), hi = es.eigenvalues()(2);
  if (hi <= 0.0 || mid <= 1e-12 * hi) return 1;
  if (lo <= 1e-12 * hi) return 2;
  return 3;
}

std::vector<std::pair<int, int>> bowyer_watson(const std::vector<Vec3>& input) {
  const int n = static_cast<int>(input.size());
  std::vector<Vec3> pts = input;

  // Enclosing super-tetrahedron, far enough out that its facets never shadow
  // interior circumspheres of the real points.
  Aabb bb{pts[0], pts[0]};
  for (const Vec3& p : pts) {
    bb.min = bb.min.cwiseMin(p);
    bb.max = bb.max.cwiseMax(p);
  }
  Vec3 c = 0.5 * (bb.min + bb.max);
  double L = 1e5 * std::max(bb.diagonal(), 1.0);
  pts.push_back(c + Vec3(L, L, L));
  pts.push_back(c + Vec3(L, -L, -L));
  pts.push_back(c + Vec3(-L, L, -L));
  pts.push_back(c + Vec3(-L, -L, L));

  std::vector<Tet> tets;
  {
    Tet t{{n, n + 1, n + 2, n + 3}, true};
    if (orient3d(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], pts[t.v[3]]) < 0)
      std::swap(t.v[0], t.v[1]);
    tets.push_back(t);
  }

  using FacetKey = std::array<int, 3>;
  std::map<FacetKey, std::pair<int, std::array<int, 3>>> facets;  // key -> (count, oriented)

  for (int i = 0; i < n; ++i) {
    const Vec3& p = pts[i];
    facets.clear();
    bool any_bad = false;
    for (Tet& t : tets) {
      if (!t.alive) continue;
      if (insphere(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], pts[t.v[3]], p) <= 0) continue;
      any_bad = true;
      t.alive = false;
      // Outward-oriented facets of a positively oriented tet.
      const std::array<std::array<int, 3>, 4> fo = {{{t.v[0], t.v[2], t.v[1]},
                                                     {t.v[0], t.v[1], t.v[3]},
                                                     {t.v[1], t.v[2], t.v[3]},
                                                     {t.v[0], t.v[3], t.v[2]}}};
      for (const auto& f : fo) {
        FacetKey key = {f[0], f[1], f[2]};
        std::sort(key.begin(), key.end());
        auto [it, inserted] = facets.try_emplace(key, std::make_pair(0, f));
        it->second.first += 1;
      }
    }
    if (!any_bad)
      throw Error(ErrorCode::DegenerateInput, "point falls in no circumsphere (duplicate point?)");

    for (const auto& [key, cf] : facets) {
      if (cf.first != 1) continue;  // interior facet of the cavity
      const auto& f = cf.second;
      int o = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], p);
      if (o == 0)
        throw Error(ErrorCode::DegenerateInput, "degenerate cavity facet during retriangulation");
      Tet t{{f[0], f[1], f[2], i}, true};
      if (o < 0) std::swap(t.v[0], t.v[1]);
      tets.push_back(t);
    }

    // Periodic compaction keeps the scan over alive tets linear.
    if (tets.size() > 4096 && tets.size() > 4 * static_cast<std::size_t>(n)) {
      std::erase_if(tets, [](const Tet& t) { return !t.alive; });
    }
  }

  std::vector<std::pair<int, int>> edges;
  for (const Tet& t : tets) {
    if (!t.alive) continue;
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n || t.v[3] >= n) continue;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        edges.emplace_back(std::min(t.v[a], t.v[b]), std::max(t.v[a], t.v[b]));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace

std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Vec3>& points) {
  if (points.size() < 4)
    throw Error(ErrorCode::DegenerateInput, "delaunay_edges needs at least 4 points");

  int rank = point_rank(points);
  if (rank <= 1)
    throw Error(ErrorCode::DegenerateInput, "points are essentially collinear");

  if (rank == 3) {
    try {
      return bowyer_watson(points);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateInput) throw;
      // fall through to the single jitter retry
    }
  }

  Aabb bb{points[0], points[0]};
  for (const Vec3& p : points) {
    bb.min = bb.min.cwiseMin(p);
    bb.max = bb.max.cwiseMax(p);
  }
  double amp = 1e-6 * std::max(bb.diagonal(), 1.0);
  Rng rng(0x2d17ull ^ points.size(), 0);
  std::vector<Vec3> jittered = points;
  for (Vec3& p : jittered)
    p += amp * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return bowyer_watson(jittered);
}

}  // namespace dualms
