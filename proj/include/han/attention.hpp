#pragma once

#include <cstddef>
#include <span>

#include "han/numerics.hpp"
#include "han/params.hpp"

namespace han {

/// One frame of one stream: K*K region descriptors of dimension D.
/// Stored region-major (row i is region i), i.e. the transpose of the D x K^2
/// feature map, which matches the on-disk payload order.
struct FeatureCube {
  Matrix regions;  // K^2 x D
  std::size_t frame_index = 0;

  FeatureCube() = default;
  FeatureCube(std::size_t num_regions, std::size_t dim, std::size_t t = 0)
      : regions(num_regions, dim), frame_index(t) {}

  std::size_t num_regions() const noexcept { return regions.rows(); }
  std::size_t dim() const noexcept { return regions.cols(); }
  std::span<const double> region(std::size_t i) const { return regions.row(i); }
};

/// Location scorer: row i is w_i, applied to [h_p ; h_q] of width 2H.
struct AttentionParams {
  Matrix W;

  AttentionParams() = default;
  AttentionParams(std::size_t num_regions, std::size_t hidden)
      : W(num_regions, 2 * hidden) {}

  std::size_t num_regions() const noexcept { return W.rows(); }
  std::size_t hidden_dim() const noexcept { return W.cols() / 2; }

  TensorList tensors(const std::string& prefix = "") { return {{prefix + "W_attn", W.values()}}; }

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

/// l^t: positive, sums to one.
struct AttentionWeights {
  Vector l;
};

/// l = softmax(W [h_p_prev ; h_q_prev]). One distribution serves both streams.
AttentionWeights attention_weights(const AttentionParams& params,
                                   std::span<const double> h_p_prev,
                                   std::span<const double> h_q_prev);

/// Convex combination sum_i l_i * region_i.
Vector attend(const AttentionWeights& weights, const FeatureCube& cube);

struct AttentionBackward {
  Matrix grad_W;
  Vector grad_h_p_prev;
  Vector grad_h_q_prev;
};

/// Adjoint of attend() on both streams followed by the softmax and the
/// scoring matvec. `weights` must be the forward output for these hidden states.
AttentionBackward attention_backward(const AttentionParams& params,
                                     std::span<const double> h_p_prev,
                                     std::span<const double> h_q_prev,
                                     const AttentionWeights& weights,
                                     const FeatureCube& cube_p, const FeatureCube& cube_q,
                                     std::span<const double> grad_x_p,
                                     std::span<const double> grad_x_q);

/// Accumulating form: adds into grad_W, grad_h_p_prev and grad_h_q_prev.
void attention_backward_acc(const AttentionParams& params, std::span<const double> h_p_prev,
                            std::span<const double> h_q_prev, const AttentionWeights& weights,
                            const FeatureCube& cube_p, const FeatureCube& cube_q,
                            std::span<const double> grad_x_p, std::span<const double> grad_x_q,
                            Matrix& grad_W, std::span<double> grad_h_p_prev,
                            std::span<double> grad_h_q_prev);

}  // namespace han
