#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualms/error.hpp"
#include "dualms/field.hpp"
#include "dualms/rng.hpp"
#include "field_batch.hpp"

using namespace dualms;

namespace {

Aabb unit_box() { return {Vec3::Zero(), Vec3::Ones()}; }

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.num_frequencies = 8;
  cfg.width = 16;
  cfg.sigma_b = 2.0;
  return cfg;
}

// Two small square skeletons at z = 0.25 and z = 0.75.
SkeletonSamples plane_skeletons(int n = 5) {
  SkeletonSamples s;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = (i + 0.5) / n, y = (j + 0.5) / n;
      s.points_a.push_back({x, y, 0.25});
      s.points_b.push_back({x, y, 0.75});
    }
  return s;
}

std::vector<Vec3> random_points(int n, std::uint64_t seed) {
  Rng rng(seed, 0);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  return pts;
}

double dot_grads(const ParamGrads<double>& g, const ParamGrads<double>& dir) {
  double s = g.out_bias * dir.out_bias + g.out_weights.dot(dir.out_weights);
  for (int l = 0; l < FieldModelD::kHiddenLayers; ++l) {
    s += (g.weights[l].array() * dir.weights[l].array()).sum();
    s += g.biases[l].dot(dir.biases[l]);
  }
  return s;
}

void perturb(FieldModelD& m, const ParamGrads<double>& dir, double eps) {
  m.out_bias += eps * dir.out_bias;
  m.out_weights += eps * dir.out_weights;
  for (int l = 0; l < FieldModelD::kHiddenLayers; ++l) {
    m.weights[l] += eps * dir.weights[l];
    m.biases[l] += eps * dir.biases[l];
  }
}

ParamGrads<double> random_direction(const FieldModelD& m, std::uint64_t seed) {
  ParamGrads<double> d = ParamGrads<double>::zeros_like(m);
  Rng rng(seed, 3);
  auto fill = [&](auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = rng.gaussian();
  };
  for (int l = 0; l < FieldModelD::kHiddenLayers; ++l) {
    fill(d.weights[l]);
    fill(d.biases[l]);
  }
  fill(d.out_weights);
  d.out_bias = rng.gaussian();
  return d;
}

}  // namespace

TEST_CASE("model construction is deterministic and seed-sensitive") {
  auto a = make_model<float>(small_config(), unit_box(), 42);
  auto b = make_model<float>(small_config(), unit_box(), 42);
  auto c = make_model<float>(small_config(), unit_box(), 43);
  CHECK(a.freq == b.freq);
  CHECK(a.weights[0] == b.weights[0]);
  CHECK(a.out_weights == b.out_weights);
  CHECK(a.freq != c.freq);
  CHECK(a.num_frequencies() == 8);
  CHECK(a.width() == 16);

  Vec3 p(0.3, 0.6, 0.9);
  CHECK(forward(a, p) == forward(b, p));
}

TEST_CASE("normalization maps the bbox into the unit cube") {
  Aabb box{Vec3(-2, -2, -2), Vec3(6, 2, 0)};
  auto m = make_model<double>(small_config(), box, 1);
  CHECK(m.norm_scale == doctest::Approx(1.0 / 8.0));  // largest extent wins
  Vec3 lo = (box.min - m.norm_offset) * m.norm_scale;
  Vec3 hi = (box.max - m.norm_offset) * m.norm_scale;
  for (int k = 0; k < 3; ++k) {
    CHECK(lo[k] >= -1e-12);
    CHECK(hi[k] <= 1.0 + 1e-12);
  }
}

TEST_CASE("evaluate_batch agrees with pointwise forward") {
  auto m = make_model<float>(small_config(), unit_box(), 7);
  auto pts = random_points(100, 2);
  std::vector<double> out(pts.size());
  evaluate_batch(m, pts, out);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK(out[i] == doctest::Approx(double(forward(m, pts[i]))).epsilon(1e-6));
}

TEST_CASE("spatial gradient matches central finite differences") {
  auto m = make_model<double>(small_config(), unit_box(), 17);
  const double h = 1e-6;
  for (const Vec3& p : random_points(20, 5)) {
    Vec3 g = spatial_gradient(m, p);
    for (int k = 0; k < 3; ++k) {
      Vec3 pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      double fd = (forward(m, pp) - forward(m, pm)) / (2 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("sample_polyline_edges keeps vertices and spaces interior points") {
  std::vector<Vec3> verts = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}};
  auto pts = sample_polyline_edges(verts, edges, 4.0);
  REQUIRE(pts.size() >= verts.size());
  CHECK(pts[0] == verts[0]);
  CHECK(pts[1] == verts[1]);
  CHECK(pts[2] == verts[2]);
  // Mean edge length 1, step 0.25 -> 4 interior points per edge (floor(1/0.25)
  // at t = i/5).
  CHECK(pts.size() == 3 + 2 * 4);
  // No samples without edges.
  CHECK(sample_polyline_edges(verts, {}, 4.0).size() == 3);
}

TEST_CASE("augment adds fresh gaussian offsets per step") {
  auto pts = random_points(2000, 8);
  auto same1 = augment(pts, 0.01, 5, 3);
  auto same2 = augment(pts, 0.01, 5, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(same1[i] == same2[i]);

  auto other = augment(pts, 0.01, 5, 4);
  bool any_diff = false;
  for (std::size_t i = 0; i < pts.size(); ++i) any_diff |= other[i] != same1[i];
  CHECK(any_diff);

  // Sigma zero is the identity.
  auto id = augment(pts, 0.0, 5, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(id[i] == pts[i]);

  // Offset moments.
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      double d = same1[i][k] - pts[i][k];
      sum += d;
      sum2 += d * d;
    }
  double n = 3.0 * pts.size();
  CHECK(std::abs(sum / n) < 5e-4);
  CHECK(std::sqrt(sum2 / n) == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("loss_skeleton matches a pointwise oracle") {
  auto m = make_model<float>(small_config(), unit_box(), 23);
  SkeletonSamples s = plane_skeletons();
  double expect = 0.0;
  for (const Vec3& p : s.points_a) expect += std::abs(double(forward(m, p)) - 1.0);
  expect /= s.points_a.size();
  double eb = 0.0;
  for (const Vec3& p : s.points_b) eb += std::abs(double(forward(m, p)) + 1.0);
  expect += eb / s.points_b.size();
  CHECK(loss_skeleton(m, s) == doctest::Approx(expect).epsilon(1e-6));

  SkeletonSamples missing;
  missing.points_a = s.points_a;
  CHECK_THROWS_AS(loss_skeleton(m, missing), Error);
}

TEST_CASE("loss_smooth matches the mean spatial gradient norm") {
  auto m = make_model<double>(small_config(), unit_box(), 29);
  auto omega = random_points(64, 31);
  double expect = 0.0;
  for (const Vec3& p : omega) expect += spatial_gradient(m, p).norm();
  expect /= omega.size();
  CHECK(loss_smooth(m, omega) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("total_loss_and_grads reports the individual losses") {
  auto m = make_model<double>(small_config(), unit_box(), 37);
  SkeletonSamples s = plane_skeletons();
  auto omega = random_points(128, 41);
  auto grads = ParamGrads<double>::zeros_like(m);
  LossValues lv = total_loss_and_grads<double>(m, s.points_a, s.points_b, omega, 5000.0, 1.0,
                                               &grads);
  CHECK(lv.skeleton == doctest::Approx(loss_skeleton(m, s)).epsilon(1e-9));
  CHECK(lv.smooth == doctest::Approx(loss_smooth<double>(m, omega)).epsilon(1e-9));
  CHECK(lv.total(5000.0, 1.0) == doctest::Approx(5000.0 * lv.skeleton + lv.smooth));
}

TEST_CASE("parameter gradient matches directional finite differences") {
  ModelConfig cfg;
  cfg.num_frequencies = 16;
  cfg.width = 32;
  cfg.sigma_b = 2.0;
  auto m = make_model<double>(cfg, unit_box(), 53);
  SkeletonSamples s = plane_skeletons(4);
  auto omega = random_points(64, 59);

  auto grads = ParamGrads<double>::zeros_like(m);
  const double l1 = 10.0, l2 = 1.0;
  total_loss_and_grads<double>(m, s.points_a, s.points_b, omega, l1, l2, &grads);

  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    ParamGrads<double> dir = random_direction(m, 100 + trial);
    double analytic = dot_grads(grads, dir);

    const double eps = 1e-6;
    FieldModelD mp = m, mm = m;
    perturb(mp, dir, eps);
    perturb(mm, dir, -eps);
    LossValues lp = total_loss_and_grads<double>(mp, s.points_a, s.points_b, omega, l1, l2,
                                                 nullptr);
    LossValues lm = total_loss_and_grads<double>(mm, s.points_a, s.points_b, omega, l1, l2,
                                                 nullptr);
    double fd = (lp.total(l1, l2) - lm.total(l1, l2)) / (2 * eps);
    CHECK(std::abs(analytic - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
  }
}

TEST_CASE("workspace reuse is bitwise identical to fresh buffers") {
  auto m = make_model<float>(small_config(), unit_box(), 61);
  SkeletonSamples s = plane_skeletons();
  auto omega = random_points(256, 67);
  auto g1 = ParamGrads<float>::zeros_like(m);
  auto g2 = ParamGrads<float>::zeros_like(m);
  detail::LossWorkspace<float> ws;
  LossValues a = total_loss_and_grads<float>(m, s.points_a, s.points_b, omega, 5000.0, 1.0,
                                             &g1, &ws);
  // Reuse the (now sized) workspace a second time.
  LossValues b = total_loss_and_grads<float>(m, s.points_a, s.points_b, omega, 5000.0, 1.0,
                                             &g2, &ws);
  CHECK(a.skeleton == b.skeleton);
  CHECK(a.smooth == b.smooth);
  CHECK(g1.out_weights == g2.out_weights);
  for (int l = 0; l < FieldModel::kHiddenLayers; ++l) CHECK(g1.weights[l] == g2.weights[l]);
}

TEST_CASE("train runs deterministically and zero iterations is a no-op") {
  DesignDomain d = DesignDomain::from_csg(Csg::box(Vec3::Zero(), Vec3::Ones()), {}, {});
  SkeletonSamples s = plane_skeletons();

  TrainConfig cfg;
  cfg.model = small_config();
  cfg.iterations = 0;
  cfg.seed = 5;
  auto [m0, trace0] = train(s, d, cfg);
  auto fresh = make_model<float>(cfg.model, d.bbox, 5);
  CHECK(m0.weights[0] == fresh.weights[0]);
  CHECK(trace0.empty());

  cfg.iterations = 20;
  cfg.omega_batch = 256;
  cfg.skeleton_batch = 16;
  cfg.learning_rate = 1e-3;
  cfg.trace_stride = 5;
  auto [ma, ta] = train(s, d, cfg);
  auto [mb, tb] = train(s, d, cfg);
  CHECK(ma.weights[0] == mb.weights[0]);
  CHECK(ma.out_weights == mb.out_weights);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta[i].iteration == tb[i].iteration);
    CHECK(ta[i].loss_skeleton == tb[i].loss_skeleton);
    CHECK(ta[i].loss_smooth == tb[i].loss_smooth);
  }
  // Skeleton loss should drop from its ~2.0 start within 20 steps at 1e-3.
  CHECK(ta.back().loss_skeleton < ta.front().loss_skeleton);
}

TEST_CASE("train rejects an empty skeleton side") {
  DesignDomain d = DesignDomain::from_csg(Csg::box(Vec3::Zero(), Vec3::Ones()), {}, {});
  SkeletonSamples s;
  s.points_a = random_points(10, 3);
  TrainConfig cfg;
  cfg.model = small_config();
  cfg.iterations = 1;
  try {
    train(s, d, cfg);
    FAIL("expected EmptySkeleton");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySkeleton);
  }
}
