#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dualms/domain.hpp"

namespace dualms {

namespace detail {
template <typename S>
struct LossWorkspace;  // reusable batch buffers for the training loop
}

/// Random-Fourier-feature coordinate network: encode(x) =
/// [sin(2 pi B x), cos(2 pi B x)] into three softplus hidden layers and an
/// affine scalar head. The frequency matrix B is fixed at construction.
/// Coordinates are mapped into the unit cube (uniform scale) before encoding.
template <typename S>
struct FieldModelT {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  static constexpr int kHiddenLayers = 3;

  Eigen::Matrix<S, Eigen::Dynamic, 3> freq;  // B, m x 3, frozen
  std::array<Mat, kHiddenLayers> weights;    // W1: width x 2m, W2/W3: width x width
  std::array<Vec, kHiddenLayers> biases;
  Vec out_weights;  // width
  S out_bias = S(0);

  Vec3 norm_offset = Vec3::Zero();  // x_n = (x - offset) * scale
  double norm_scale = 1.0;

  int num_frequencies() const { return static_cast<int>(freq.rows()); }
  int width() const { return static_cast<int>(weights[0].rows()); }
};

using FieldModel = FieldModelT<float>;
using FieldModelD = FieldModelT<double>;

struct ModelConfig {
  int num_frequencies = 1024;  // m; feature width is 2m
  int width = 256;
  double sigma_b = 6.0;  // std-dev of the Gaussian frequency entries
};

/// Fresh model with Gaussian frequencies and scaled-uniform weight init;
/// bitwise reproducible for a fixed seed. Normalization maps `bbox` into the
/// unit cube with a uniform scale.
template <typename S>
FieldModelT<S> make_model(const ModelConfig& cfg, const Aabb& bbox, std::uint64_t seed);

template <typename S>
S forward(const FieldModelT<S>& model, const Vec3& p);

/// Exact world-space gradient of the field at p (chain rule through the
/// encoder and the MLP).
template <typename S>
Vec3 spatial_gradient(const FieldModelT<S>& model, const Vec3& p);

/// Batched evaluation; out.size() == pts.size().
template <typename S>
void evaluate_batch(const FieldModelT<S>& model, std::span<const Vec3> pts,
                    std::span<double> out);

struct SkeletonSamples {
  std::vector<Vec3> points_a;
  std::vector<Vec3> points_b;
};

/// Points along skeleton edges at `points_per_mean_edge` spacing fractions of
/// the mean edge length, plus the skeleton vertices themselves.
std::vector<Vec3> sample_polyline_edges(const std::vector<Vec3>& vertices,
                                        const std::vector<std::pair<int, int>>& edges,
                                        double points_per_mean_edge);

/// Mean |f-1| over A plus mean |f+1| over B.
template <typename S>
double loss_skeleton(const FieldModelT<S>& model, const SkeletonSamples& samples);

/// Mean world-space gradient norm over the sample set (total variation).
template <typename S>
double loss_smooth(const FieldModelT<S>& model, std::span<const Vec3> omega);

/// Adds i.i.d. Gaussian(0, sigma^2 I) offsets; fresh draw per (seed, step).
std::vector<Vec3> augment(std::span<const Vec3> points, double sigma, std::uint64_t seed,
                          std::uint64_t step = 0);

template <typename S>
struct ParamGrads {
  std::array<typename FieldModelT<S>::Mat, FieldModelT<S>::kHiddenLayers> weights;
  std::array<typename FieldModelT<S>::Vec, FieldModelT<S>::kHiddenLayers> biases;
  typename FieldModelT<S>::Vec out_weights;
  S out_bias = S(0);

  static ParamGrads zeros_like(const FieldModelT<S>& model);
};

struct LossValues {
  double skeleton = 0.0;
  double smooth = 0.0;
  double total(double lambda_skeleton, double lambda_smooth) const {
    return lambda_skeleton * skeleton + lambda_smooth * smooth;
  }
};

/// Loss values and the analytic parameter gradient of
/// lambda_1 * L_skeleton + lambda_2 * L_smooth. Points are world-space; the
/// smoothness term's parameter gradient differentiates through the spatial
/// gradient computation.
template <typename S>
LossValues total_loss_and_grads(const FieldModelT<S>& model,
                                std::span<const Vec3> skeleton_a,
                                std::span<const Vec3> skeleton_b,
                                std::span<const Vec3> omega, double lambda_skeleton,
                                double lambda_smooth, ParamGrads<S>* grads,
                                detail::LossWorkspace<S>* workspace = nullptr);

struct TrainConfig {
  ModelConfig model;
  double lambda_skeleton = 5000.0;
  double lambda_smooth = 1.0;
  double learning_rate = 3e-5;
  int iterations = 51200;
  int omega_batch = 32768;
  int skeleton_batch = 8192;  // full batch when a side has fewer points
  double sigma_noise = 0.002;  // in normalized coordinates
  int trace_stride = 100;
  std::uint64_t seed = 0;
};

struct TrainRecord {
  int iteration = 0;
  double loss_skeleton = 0.0;
  double loss_smooth = 0.0;
};

using TrainTrace = std::vector<TrainRecord>;

/// Adam optimization (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) of the combined
/// loss; fresh omega and noise-augmented skeleton batches every step, encoder
/// frozen. Throws NonFiniteLoss with the offending iteration.
std::pair<FieldModel, TrainTrace> train(const SkeletonSamples& skeletons,
                                        const DesignDomain& domain, const TrainConfig& cfg);

}  // namespace dualms
