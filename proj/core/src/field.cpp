#include "dualms/field.hpp"

#include <cmath>

#include "dualms/error.hpp"
#include "dualms/rng.hpp"
#include "field_batch.hpp"

namespace dualms {

template <typename S>
ParamGrads<S> ParamGrads<S>::zeros_like(const FieldModelT<S>& model) {
  ParamGrads<S> g;
  for (int k = 0; k < FieldModelT<S>::kHiddenLayers; ++k) {
    g.weights[k] = FieldModelT<S>::Mat::Zero(model.weights[k].rows(), model.weights[k].cols());
    g.biases[k] = FieldModelT<S>::Vec::Zero(model.biases[k].size());
  }
  g.out_weights = FieldModelT<S>::Vec::Zero(model.out_weights.size());
  g.out_bias = S(0);
  return g;
}

template <typename S>
FieldModelT<S> make_model(const ModelConfig& cfg, const Aabb& bbox, std::uint64_t seed) {
  if (cfg.num_frequencies < 1 || cfg.width < 1)
    throw Error(ErrorCode::InvalidArgument, "make_model: bad architecture sizes");

  FieldModelT<S> model;
  Rng rng(seed, rng_stream::kModelInit);

  model.freq.resize(cfg.num_frequencies, 3);
  for (int i = 0; i < cfg.num_frequencies; ++i)
    for (int j = 0; j < 3; ++j) model.freq(i, j) = S(cfg.sigma_b * rng.gaussian());

  auto init_layer = [&](int rows, int cols, typename FieldModelT<S>::Mat& w,
                        typename FieldModelT<S>::Vec& b) {
    double s = 1.0 / std::sqrt(static_cast<double>(cols));
    w.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = S(rng.uniform(-s, s));
    b = FieldModelT<S>::Vec::Zero(rows);
  };
  init_layer(cfg.width, 2 * cfg.num_frequencies, model.weights[0], model.biases[0]);
  init_layer(cfg.width, cfg.width, model.weights[1], model.biases[1]);
  init_layer(cfg.width, cfg.width, model.weights[2], model.biases[2]);

  double s = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  model.out_weights.resize(cfg.width);
  for (int i = 0; i < cfg.width; ++i) model.out_weights(i) = S(rng.uniform(-s, s));
  model.out_bias = S(0);

  model.norm_offset = bbox.min;
  double ext = bbox.extent().maxCoeff();
  model.norm_scale = ext > 0.0 ? 1.0 / ext : 1.0;
  return model;
}

namespace {

template <typename S>
typename FieldModelT<S>::Mat to_matrix(std::span<const Vec3> pts) {
  typename FieldModelT<S>::Mat x(3, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int c = 0; c < 3; ++c) x(c, static_cast<Eigen::Index>(i)) = S(pts[i][c]);
  return x;
}

}  // namespace

template <typename S>
S forward(const FieldModelT<S>& model, const Vec3& p) {
  detail::BatchWork<S> w;
  detail::forward_batch(model, to_matrix<S>(std::span<const Vec3>(&p, 1)), w);
  return w.f(0);
}

template <typename S>
Vec3 spatial_gradient(const FieldModelT<S>& model, const Vec3& p) {
  detail::BatchWork<S> w;
  typename FieldModelT<S>::Mat g;
  detail::forward_batch(model, to_matrix<S>(std::span<const Vec3>(&p, 1)), w);
  detail::input_gradient_batch(model, w, g);
  return Vec3(double(g(0, 0)), double(g(1, 0)), double(g(2, 0))) * model.norm_scale;
}

template <typename S>
void evaluate_batch(const FieldModelT<S>& model, std::span<const Vec3> pts,
                    std::span<double> out) {
  if (pts.size() != out.size())
    throw Error(ErrorCode::InvalidArgument, "evaluate_batch: size mismatch");
  // Chunked so the work matrices stay cache-friendly.
  constexpr std::size_t kChunk = 8192;
  detail::BatchWork<S> w;
  for (std::size_t off = 0; off < pts.size(); off += kChunk) {
    std::size_t n = std::min(kChunk, pts.size() - off);
    detail::forward_batch(model, to_matrix<S>(pts.subspan(off, n)), w);
    for (std::size_t i = 0; i < n; ++i) out[off + i] = double(w.f(static_cast<Eigen::Index>(i)));
  }
}

std::vector<Vec3> sample_polyline_edges(const std::vector<Vec3>& vertices,
                                        const std::vector<std::pair<int, int>>& edges,
                                        double points_per_mean_edge) {
  std::vector<Vec3> out = vertices;
  if (edges.empty() || points_per_mean_edge <= 0.0) return out;

  double mean_len = 0.0;
  for (auto [u, v] : edges) mean_len += (vertices[v] - vertices[u]).norm();
  mean_len /= static_cast<double>(edges.size());
  if (mean_len <= 0.0) return out;

  double step = mean_len / points_per_mean_edge;
  for (auto [u, v] : edges) {
    Vec3 a = vertices[u], b = vertices[v];
    double len = (b - a).norm();
    int k = static_cast<int>(std::floor(len / step));
    for (int i = 1; i <= k; ++i) {
      double t = static_cast<double>(i) / (k + 1);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

template <typename S>
double loss_skeleton(const FieldModelT<S>& model, const SkeletonSamples& samples) {
  if (samples.points_a.empty() || samples.points_b.empty())
    throw Error(ErrorCode::EmptySkeleton, "loss_skeleton: both skeleton sides must be nonempty");
  detail::BatchWork<S> w;
  double loss = 0.0;
  detail::forward_batch(model, to_matrix<S>(samples.points_a), w);
  double sa = 0.0;
  for (Eigen::Index i = 0; i < w.f.cols(); ++i) sa += std::abs(double(w.f(i)) - 1.0);
  loss += sa / static_cast<double>(samples.points_a.size());
  detail::forward_batch(model, to_matrix<S>(samples.points_b), w);
  double sb = 0.0;
  for (Eigen::Index i = 0; i < w.f.cols(); ++i) sb += std::abs(double(w.f(i)) + 1.0);
  loss += sb / static_cast<double>(samples.points_b.size());
  return loss;
}

template <typename S>
double loss_smooth(const FieldModelT<S>& model, std::span<const Vec3> omega) {
  if (omega.empty()) throw Error(ErrorCode::InvalidArgument, "loss_smooth: empty sample set");
  detail::BatchWork<S> w;
  typename FieldModelT<S>::Mat g;
  detail::forward_batch(model, to_matrix<S>(omega), w);
  detail::input_gradient_batch(model, w, g);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < g.cols(); ++i) sum += double(g.col(i).norm());
  return model.norm_scale * sum / static_cast<double>(omega.size());
}

std::vector<Vec3> augment(std::span<const Vec3> points, double sigma, std::uint64_t seed,
                          std::uint64_t step) {
  if (sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "augment: sigma must be >= 0");
  std::vector<Vec3> out(points.begin(), points.end());
  if (sigma == 0.0) return out;
  Rng rng(seed, rng_stream::kTrainNoise + (step + 1) * 0x10001ull);
  for (Vec3& p : out)
    p += sigma * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  return out;
}

template <typename S>
LossValues total_loss_and_grads(const FieldModelT<S>& model,
                                std::span<const Vec3> skeleton_a,
                                std::span<const Vec3> skeleton_b,
                                std::span<const Vec3> omega, double lambda_skeleton,
                                double lambda_smooth, ParamGrads<S>* grads,
                                detail::LossWorkspace<S>* workspace) {
  using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
  if (skeleton_a.empty() || skeleton_b.empty())
    throw Error(ErrorCode::EmptySkeleton, "total_loss: both skeleton sides must be nonempty");
  if (omega.empty()) throw Error(ErrorCode::InvalidArgument, "total_loss: empty omega set");

  detail::LossWorkspace<S> local;
  detail::LossWorkspace<S>& ws = workspace ? *workspace : local;

  LossValues losses;

  // Skeleton term: d/df mean|f -+ 1| = sign(f -+ 1) / count.
  auto skeleton_side = [&](std::span<const Vec3> pts, double target,
                           detail::BatchWork<S>& w) {
    detail::forward_batch(model, to_matrix<S>(pts), w);
    double sum = 0.0;
    RowVec seed(pts.size());
    S scale = S(lambda_skeleton / static_cast<double>(pts.size()));
    for (Eigen::Index i = 0; i < w.f.cols(); ++i) {
      double r = double(w.f(i)) - target;
      sum += std::abs(r);
      seed(i) = r > 0 ? scale : (r < 0 ? -scale : S(0));
    }
    if (grads) detail::backward_value(model, w, seed, *grads);
    return sum / static_cast<double>(pts.size());
  };
  losses.skeleton = skeleton_side(skeleton_a, 1.0, ws.skel_a) +
                    skeleton_side(skeleton_b, -1.0, ws.skel_b);

  // Smoothness term: s_n = scale * |g_n|; d s_n / d g_n = scale * g_n / |g_n|.
  detail::BatchWork<S>& w = ws.omega;
  detail::forward_batch(model, to_matrix<S>(omega), w);
  detail::input_gradient_batch(model, w, ws.grad);
  const auto& g = ws.grad;
  ws.u.resize(3, g.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < g.cols(); ++i) {
    double nrm = double(g.col(i).norm());
    sum += nrm;
    ws.u.col(i) = nrm > 0.0 ? (g.col(i) / S(nrm)).eval() : (g.col(i) * S(0)).eval();
  }
  losses.smooth = model.norm_scale * sum / static_cast<double>(omega.size());

  if (grads) {
    detail::tangent_batch(model, w, ws.u, ws.tangent);
    RowVec seed = RowVec::Constant(
        g.cols(), S(lambda_smooth * model.norm_scale / static_cast<double>(omega.size())));
    detail::backward_tangent(model, w, ws.tangent, seed, *grads);
  }
  return losses;
}

// Explicit instantiations: float for production, double for gradient checks.
template struct ParamGrads<float>;
template struct ParamGrads<double>;
template FieldModelT<float> make_model<float>(const ModelConfig&, const Aabb&, std::uint64_t);
template FieldModelT<double> make_model<double>(const ModelConfig&, const Aabb&, std::uint64_t);
template float forward<float>(const FieldModelT<float>&, const Vec3&);
template double forward<double>(const FieldModelT<double>&, const Vec3&);
template Vec3 spatial_gradient<float>(const FieldModelT<float>&, const Vec3&);
template Vec3 spatial_gradient<double>(const FieldModelT<double>&, const Vec3&);
template void evaluate_batch<float>(const FieldModelT<float>&, std::span<const Vec3>,
                                    std::span<double>);
template void evaluate_batch<double>(const FieldModelT<double>&, std::span<const Vec3>,
                                     std::span<double>);
template double loss_skeleton<float>(const FieldModelT<float>&, const SkeletonSamples&);
template double loss_skeleton<double>(const FieldModelT<double>&, const SkeletonSamples&);
template double loss_smooth<float>(const FieldModelT<float>&, std::span<const Vec3>);
template double loss_smooth<double>(const FieldModelT<double>&, std::span<const Vec3>);
template LossValues total_loss_and_grads<float>(const FieldModelT<float>&, std::span<const Vec3>,
                                                std::span<const Vec3>, std::span<const Vec3>,
                                                double, double, ParamGrads<float>*,
                                                detail::LossWorkspace<float>*);
template LossValues total_loss_and_grads<double>(const FieldModelT<double>&,
                                                 std::span<const Vec3>, std::span<const Vec3>,
                                                 std::span<const Vec3>, double, double,
                                                 ParamGrads<double>*,
                                                 detail::LossWorkspace<double>*);

}  // namespace dualms
