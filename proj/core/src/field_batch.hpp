#pragma once

// Batched forward / gradient kernels shared by the loss and training code.
// All per-sample math is expressed as width x N matrix products so Eigen's
// GEMM does the heavy lifting.

#include <cmath>

#include "dualms/field.hpp"

namespace dualms::detail {

template <typename S>
struct BatchWork {
  using Mat = typename FieldModelT<S>::Mat;
  using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

  Mat xn;                 // 3 x N normalized coordinates
  Mat sin_phi, cos_phi;   // m x N
  Mat enc;                // 2m x N, [sin; cos]
  std::array<Mat, 3> pre;  // A_k, width x N
  std::array<Mat, 3> act;  // softplus(A_k)
  std::array<Mat, 3> sig;  // sigmoid(A_k)
  RowVec f;                // 1 x N

  // Scratch for the gradient passes, kept here so repeated calls with the
  // same batch size reuse their allocations.
  Mat d, v, c;

  int cols() const { return static_cast<int>(f.cols()); }
};

template <typename S>
void softplus_sigmoid(const typename FieldModelT<S>::Mat& a,
                      typename FieldModelT<S>::Mat& softplus_out,
                      typename FieldModelT<S>::Mat& sigmoid_out) {
  // One vectorized exp/log per entry, overflow-free:
  //   softplus(x) = max(x, 0) + log(1 + exp(-|x|))
  //   sigmoid(x)  = 1/(1+e) for x >= 0, e/(1+e) otherwise, with e = exp(-|x|).
  auto x = a.array();
  auto e = (-x.abs()).exp();
  softplus_out = (x.max(S(0)) + (S(1) + e).log()).matrix();
  sigmoid_out = (x >= S(0)).select(S(1) / (S(1) + e), e / (S(1) + e)).matrix();
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

template <typename S>
void forward_batch(const FieldModelT<S>& model, const typename FieldModelT<S>::Mat& x_world,
                   BatchWork<S>& w) {
  const auto n = x_world.cols();
  w.xn.resize(3, n);
  for (int c = 0; c < 3; ++c)
    w.xn.row(c) =
        (x_world.row(c).array() - S(model.norm_offset[c])) * S(model.norm_scale);

  typename FieldModelT<S>::Mat phi = (S(kTwoPi) * model.freq) * w.xn;
  w.sin_phi = phi.array().sin();
  w.cos_phi = phi.array().cos();
  const int m = model.num_frequencies();
  w.enc.resize(2 * m, n);
  w.enc.topRows(m) = w.sin_phi;
  w.enc.bottomRows(m) = w.cos_phi;

  const typename FieldModelT<S>::Mat* in = &w.enc;
  for (int k = 0; k < 3; ++k) {
    w.pre[k].noalias() = model.weights[k] * (*in);
    w.pre[k].colwise() += model.biases[k];
    softplus_sigmoid<S>(w.pre[k], w.act[k], w.sig[k]);
    in = &w.act[k];
  }
  w.f = (model.out_weights.transpose() * w.act[2]).array() + model.out_bias;
}

/// Normalized-space input gradients for every sample, written into `gout`
/// (3 x N). World-space gradient = norm_scale * result.
template <typename S>
void input_gradient_batch(const FieldModelT<S>& model, BatchWork<S>& w,
                          typename FieldModelT<S>::Mat& gout) {
  const int m = model.num_frequencies();

  w.d = w.sig[2].array().colwise() * model.out_weights.array();  // df/dA3
  w.v.noalias() = model.weights[2].transpose() * w.d;
  w.d = w.sig[1].array() * w.v.array();
  w.v.noalias() = model.weights[1].transpose() * w.d;
  w.d = w.sig[0].array() * w.v.array();
  w.c.noalias() = model.weights[0].transpose() * w.d;  // df/d enc, 2m x N
  w.c.topRows(m).array() *= w.cos_phi.array();
  w.c.topRows(m).array() -= w.sin_phi.array() * w.c.bottomRows(m).array();
  gout.noalias() = (S(kTwoPi) * model.freq.transpose()) * w.c.topRows(m);
}

/// Accumulates the parameter gradient of sum_n seed(n) * f(x_n).
template <typename S>
void backward_value(const FieldModelT<S>& model, BatchWork<S>& w,
                    const Eigen::Matrix<S, 1, Eigen::Dynamic>& seed, ParamGrads<S>& g) {
  using Mat = typename FieldModelT<S>::Mat;

  g.out_weights.noalias() += w.act[2] * seed.transpose();
  g.out_bias += seed.sum();

  // w.d carries the pre-activation adjoint down the stack.
  w.d = (w.sig[2].array().colwise() * model.out_weights.array()).rowwise() * seed.array();
  for (int k = 2; k >= 0; --k) {
    const Mat& below = k == 0 ? w.enc : w.act[k - 1];
    g.weights[k].noalias() += w.d * below.transpose();
    g.biases[k] += w.d.rowwise().sum();
    if (k > 0) {
      w.v.noalias() = model.weights[k].transpose() * w.d;
      w.d = w.sig[k - 1].array() * w.v.array();
    }
  }
}

/// Directional-derivative (forward tangent) pass: given unit directions U
/// (3 x N, normalized space), computes phi_n = U_n . grad_n f and caches the
/// tangent activations needed for its parameter gradient.
template <typename S>
struct TangentWork {
  using Mat = typename FieldModelT<S>::Mat;
  Mat tenc;                   // 2m x N
  std::array<Mat, 3> tpre;    // W_k * t_{k-1}
  std::array<Mat, 3> tact;    // sig_k .* tpre_k
  Eigen::Matrix<S, 1, Eigen::Dynamic> phi;

  Mat q, tbar, tabar, abar, scratch;  // backward-pass workspace
};

template <typename S>
void tangent_batch(const FieldModelT<S>& model, const BatchWork<S>& w,
                   const typename FieldModelT<S>::Mat& u, TangentWork<S>& t) {
  using Mat = typename FieldModelT<S>::Mat;
  const int m = model.num_frequencies();
  const auto n = u.cols();

  t.q.noalias() = (S(kTwoPi) * model.freq) * u;  // m x N
  t.tenc.resize(2 * m, n);
  t.tenc.topRows(m) = w.cos_phi.array() * t.q.array();
  t.tenc.bottomRows(m) = -(w.sin_phi.array() * t.q.array());

  const Mat* in = &t.tenc;
  for (int k = 0; k < 3; ++k) {
    t.tpre[k].noalias() = model.weights[k] * (*in);
    t.tact[k] = w.sig[k].array() * t.tpre[k].array();
    in = &t.tact[k];
  }
  t.phi = model.out_weights.transpose() * t.tact[2];
}

/// Accumulates the parameter gradient of sum_n seed(n) * phi_n, i.e. the
/// second-order term behind the total-variation loss.
template <typename S>
void backward_tangent(const FieldModelT<S>& model, const BatchWork<S>& w, TangentWork<S>& t,
                      const Eigen::Matrix<S, 1, Eigen::Dynamic>& seed, ParamGrads<S>& g) {
  using Mat = typename FieldModelT<S>::Mat;

  g.out_weights.noalias() += t.tact[2] * seed.transpose();

  // Adjoints of the tangent activations (tbar) and of the primal
  // pre-activations (abar); sigmoid' = sig * (1 - sig).
  t.tbar = (Mat::Ones(model.width(), w.cols()).array().colwise() *
            model.out_weights.array()).rowwise() * seed.array();
  for (int k = 2; k >= 0; --k) {
    t.tabar = w.sig[k].array() * t.tbar.array();
    if (k == 2) {
      t.abar =
          (w.sig[k].array() * (S(1) - w.sig[k].array())) * t.tpre[k].array() * t.tbar.array();
    } else {
      t.abar = (w.sig[k].array() * (S(1) - w.sig[k].array())) * t.tpre[k].array() *
                   t.tbar.array() +
               w.sig[k].array() * t.abar.array();
    }
    const Mat& below = k == 0 ? w.enc : w.act[k - 1];
    const Mat& tbelow = k == 0 ? t.tenc : t.tact[k - 1];
    g.weights[k].noalias() += t.tabar * tbelow.transpose();
    g.weights[k].noalias() += t.abar * below.transpose();
    g.biases[k] += t.abar.rowwise().sum();
    if (k > 0) {
      t.tbar.noalias() = model.weights[k].transpose() * t.tabar;
      t.scratch.noalias() = model.weights[k].transpose() * t.abar;
      t.abar.swap(t.scratch);
    }
  }
}

/// All buffers the combined-loss computation touches; hoist one of these out
/// of the training loop so iterations stop hitting the allocator.
template <typename S>
struct LossWorkspace {
  BatchWork<S> skel_a, skel_b, omega;
  TangentWork<S> tangent;
  typename FieldModelT<S>::Mat grad, u;  // 3 x N gradient / unit directions
};

}  // namespace dualms::detail
