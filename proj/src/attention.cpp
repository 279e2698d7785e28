#include "han/attention.hpp"

namespace han {

AttentionWeights attention_weights(const AttentionParams& params,
                                   std::span<const double> h_p_prev,
                                   std::span<const double> h_q_prev) {
  if (h_p_prev.size() + h_q_prev.size() != params.W.cols()) {
    throw DimensionError("attention_weights: W_attn " + params.W.shape_string() +
                         " vs hidden states " + std::to_string(h_p_prev.size()) + "+" +
                         std::to_string(h_q_prev.size()));
  }
  const Vector h = concat(h_p_prev, h_q_prev);
  return {stable_softmax(matvec(params.W, h))};
}

Vector attend(const AttentionWeights& weights, const FeatureCube& cube) {
  if (weights.l.size() != cube.num_regions()) {
    throw DimensionError("attend: " + std::to_string(weights.l.size()) + " weights vs " +
                         std::to_string(cube.num_regions()) + " regions");
  }
  Vector x(cube.dim(), 0.0);
  for (std::size_t i = 0; i < cube.num_regions(); ++i) {
    const double w = weights.l[i];
    const auto r = cube.region(i);
    for (std::size_t d = 0; d < x.size(); ++d) x[d] += w * r[d];
  }
  return x;
}

void attention_backward_acc(const AttentionParams& params, std::span<const double> h_p_prev,
                            std::span<const double> h_q_prev, const AttentionWeights& weights,
                            const FeatureCube& cube_p, const FeatureCube& cube_q,
                            std::span<const double> grad_x_p, std::span<const double> grad_x_q,
                            Matrix& grad_W, std::span<double> grad_h_p_prev,
                            std::span<double> grad_h_q_prev) {
  const std::size_t n = params.num_regions();
  const std::size_t H = h_p_prev.size();
  require_size(weights.l.size(), n, "attention_backward weights");
  require_size(cube_p.num_regions(), n, "attention_backward appearance cube");
  require_size(cube_q.num_regions(), n, "attention_backward motion cube");
  require_size(grad_x_p.size(), cube_p.dim(), "attention_backward grad_x_p");
  require_size(grad_x_q.size(), cube_q.dim(), "attention_backward grad_x_q");
  require_size(h_q_prev.size(), H, "attention_backward h_q_prev");
  require_size(grad_h_p_prev.size(), H, "attention_backward grad_h_p_prev");
  require_size(grad_h_q_prev.size(), H, "attention_backward grad_h_q_prev");
  if (params.W.cols() != 2 * H || grad_W.rows() != n || grad_W.cols() != 2 * H) {
    throw DimensionError("attention_backward: W_attn " + params.W.shape_string() + ", grad " +
                         grad_W.shape_string() + ", hidden " + std::to_string(H));
  }

  // dL/dl_i = <grad_x_p, p_i> + <grad_x_q, q_i>
  Vector dl(n);
  for (std::size_t i = 0; i < n; ++i) {
    dl[i] = dot(grad_x_p, cube_p.region(i)) + dot(grad_x_q, cube_q.region(i));
  }
  // Softmax Jacobian diag(l) - l l^T applied to dl.
  const double mean = dot(weights.l, dl);
  Vector dz(n);
  for (std::size_t i = 0; i < n; ++i) dz[i] = weights.l[i] * (dl[i] - mean);

  const Vector h = concat(h_p_prev, h_q_prev);
  outer_acc(grad_W, dz, h);
  Vector dh(2 * H, 0.0);
  matvec_transposed_acc(params.W, dz, dh);
  for (std::size_t j = 0; j < H; ++j) {
    grad_h_p_prev[j] += dh[j];
    grad_h_q_prev[j] += dh[H + j];
  }
}

AttentionBackward attention_backward(const AttentionParams& params,
                                     std::span<const double> h_p_prev,
                                     std::span<const double> h_q_prev,
                                     const AttentionWeights& weights,
                                     const FeatureCube& cube_p, const FeatureCube& cube_q,
                                     std::span<const double> grad_x_p,
                                     std::span<const double> grad_x_q) {
  AttentionBackward out{Matrix(params.W.rows(), params.W.cols()),
                        Vector(h_p_prev.size(), 0.0), Vector(h_q_prev.size(), 0.0)};
  attention_backward_acc(params, h_p_prev, h_q_prev, weights, cube_p, cube_q, grad_x_p,
                         grad_x_q, out.grad_W, out.grad_h_p_prev, out.grad_h_q_prev);
  return out;
}

}  // namespace han
