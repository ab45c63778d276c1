#include <cmath>

#include "dualms/error.hpp"
#include "dualms/field.hpp"
#include "dualms/rng.hpp"
#include "field_batch.hpp"

namespace dualms {

namespace {

struct AdamState {
  ParamGrads<float> m;
  ParamGrads<float> v;
  int step = 0;

  static AdamState zeros_like(const FieldModel& model) {
    return {ParamGrads<float>::zeros_like(model), ParamGrads<float>::zeros_like(model), 0};
  }
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename M>
void adam_tensor(M& param, M& m, M& v, const M& g, double lr, double bc1, double bc2) {
  m = float(kBeta1) * m + float(1.0 - kBeta1) * g;
  v = (float(kBeta2) * v.array() + float(1.0 - kBeta2) * g.array().square()).matrix();
  param.array() -=
      float(lr) * (m.array() / float(bc1)) /
      ((v.array() / float(bc2)).sqrt() + float(kAdamEps));
}

void adam_step(FieldModel& model, AdamState& st, const ParamGrads<float>& g, double lr) {
  ++st.step;
  double bc1 = 1.0 - std::pow(kBeta1, st.step);
  double bc2 = 1.0 - std::pow(kBeta2, st.step);
  for (int k = 0; k < FieldModel::kHiddenLayers; ++k) {
    adam_tensor(model.weights[k], st.m.weights[k], st.v.weights[k], g.weights[k], lr, bc1, bc2);
    adam_tensor(model.biases[k], st.m.biases[k], st.v.biases[k], g.biases[k], lr, bc1, bc2);
  }
  adam_tensor(model.out_weights, st.m.out_weights, st.v.out_weights, g.out_weights, lr, bc1, bc2);
  {
    float gb = g.out_bias;
    st.m.out_bias = float(kBeta1) * st.m.out_bias + float(1.0 - kBeta1) * gb;
    st.v.out_bias = float(kBeta2) * st.v.out_bias + float(1.0 - kBeta2) * gb * gb;
    model.out_bias -= float(lr) * (st.m.out_bias / float(bc1)) /
                      (std::sqrt(st.v.out_bias / float(bc2)) + float(kAdamEps));
  }
}

void zero_grads(ParamGrads<float>& g) {
  for (int k = 0; k < FieldModel::kHiddenLayers; ++k) {
    g.weights[k].setZero();
    g.biases[k].setZero();
  }
  g.out_weights.setZero();
  g.out_bias = 0.0f;
}

// Uniform minibatch without replacement when the side exceeds the batch size.
std::vector<Vec3> pick_batch(const std::vector<Vec3>& pts, int batch, Rng& rng) {
  if (static_cast<int>(pts.size()) <= batch) return pts;
  std::vector<Vec3> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) out.push_back(pts[rng.below(pts.size())]);
  return out;
}

}  // namespace

std::pair<FieldModel, TrainTrace> train(const SkeletonSamples& skeletons,
                                        const DesignDomain& domain, const TrainConfig& cfg) {
  if (skeletons.points_a.empty() || skeletons.points_b.empty())
    throw Error(ErrorCode::EmptySkeleton, "train: both skeletons must be nonempty");
  if (cfg.learning_rate <= 0.0 || cfg.lambda_skeleton < 0.0 || cfg.lambda_smooth < 0.0 ||
      cfg.sigma_noise < 0.0 || cfg.iterations < 0 || cfg.omega_batch < 1)
    throw Error(ErrorCode::InvalidArgument, "train: invalid config");

  FieldModel model = make_model<float>(cfg.model, domain.bbox, cfg.seed);
  AdamState adam = AdamState::zeros_like(model);
  ParamGrads<float> grads = ParamGrads<float>::zeros_like(model);
  detail::LossWorkspace<float> workspace;
  TrainTrace trace;

  Rng omega_rng(cfg.seed, rng_stream::kTrainOmega);
  const Vec3 lo = domain.bbox.min;
  const Vec3 ext = domain.bbox.extent();

  std::vector<Vec3> omega(cfg.omega_batch);

  for (int it = 0; it < cfg.iterations; ++it) {
    // Fresh uniform interior batch.
    for (int i = 0; i < cfg.omega_batch; ++i) {
      Vec3 p;
      std::size_t guard = 0;
      do {
        p = lo + Vec3(omega_rng.uniform() * ext.x(), omega_rng.uniform() * ext.y(),
                      omega_rng.uniform() * ext.z());
        if (++guard > 1000000)
          throw Error(ErrorCode::DomainEmpty, "train: interior sampling stalled");
      } while (!domain.contains(p));
      omega[i] = p;
    }

    // Fresh noise-augmented skeleton batches. Noise acts in normalized
    // coordinates, so scale the offsets back to world units.
    std::uint64_t step = static_cast<std::uint64_t>(it);
    double sigma_world = cfg.sigma_noise / model.norm_scale;
    Rng batch_rng(cfg.seed, rng_stream::kTrainMinibatch + (step + 1) * 0x10001ull);
    std::vector<Vec3> batch_a = pick_batch(skeletons.points_a, cfg.skeleton_batch, batch_rng);
    std::vector<Vec3> batch_b = pick_batch(skeletons.points_b, cfg.skeleton_batch, batch_rng);
    batch_a = augment(batch_a, sigma_world, cfg.seed, 2 * step);
    batch_b = augment(batch_b, sigma_world, cfg.seed, 2 * step + 1);

    zero_grads(grads);
    LossValues losses = total_loss_and_grads<float>(model, batch_a, batch_b, omega,
                                                    cfg.lambda_skeleton, cfg.lambda_smooth,
                                                    &grads, &workspace);
    if (!std::isfinite(losses.skeleton) || !std::isfinite(losses.smooth))
      throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at iteration " + std::to_string(it));

    adam_step(model, adam, grads, cfg.learning_rate);

    if (cfg.trace_stride > 0 &&
        (it % cfg.trace_stride == 0 || it == cfg.iterations - 1)) {
      trace.push_back({it, losses.skeleton, losses.smooth});
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace dualms
