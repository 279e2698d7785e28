#include "han/lstm.hpp"

#include <cmath>

#include "han/kernels.hpp"

namespace han {

LstmParams::LstmParams(std::size_t input_dim, std::size_t hidden_dim)
    : W_ix(hidden_dim, input_dim),
      W_fx(hidden_dim, input_dim),
      W_ox(hidden_dim, input_dim),
      W_gx(hidden_dim, input_dim),
      W_ih(hidden_dim, hidden_dim),
      W_fh(hidden_dim, hidden_dim),
      W_oh(hidden_dim, hidden_dim),
      W_gh(hidden_dim, hidden_dim),
      b_i(hidden_dim, 0.0),
      b_f(hidden_dim, 0.0),
      b_o(hidden_dim, 0.0),
      b_g(hidden_dim, 0.0) {}

TensorList LstmParams::tensors(const std::string& prefix) {
  return {
      {prefix + "W_ix", W_ix.values()}, {prefix + "W_fx", W_fx.values()},
      {prefix + "W_ox", W_ox.values()}, {prefix + "W_gx", W_gx.values()},
      {prefix + "W_ih", W_ih.values()}, {prefix + "W_fh", W_fh.values()},
      {prefix + "W_oh", W_oh.values()}, {prefix + "W_gh", W_gh.values()},
      {prefix + "b_i", b_i},            {prefix + "b_f", b_f},
      {prefix + "b_o", b_o},            {prefix + "b_g", b_g},
  };
}

ConstTensorList LstmParams::tensors(const std::string& prefix) const {
  ConstTensorList out;
  for (auto& t : const_cast<LstmParams*>(this)->tensors(prefix)) {
    out.push_back({std::move(t.name), t.data});
  }
  return out;
}

void LstmParams::init_glorot(Rng& rng) {
  auto fill = [&rng](Matrix& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double& v : m.values()) v = rng.uniform(-a, a);
  };
  for (Matrix* m : {&W_ix, &W_fx, &W_ox, &W_gx, &W_ih, &W_fh, &W_oh, &W_gh}) fill(*m);
  for (Vector* b : {&b_i, &b_f, &b_o, &b_g}) std::fill(b->begin(), b->end(), 0.0);
}

void LstmParams::validate() const {
  const std::size_t H = hidden_dim();
  const std::size_t D = input_dim();
  for (const Matrix* m : {&W_ix, &W_fx, &W_ox, &W_gx}) {
    if (m->rows() != H || m->cols() != D) {
      throw DimensionError("LstmParams: input matrix " + m->shape_string() + " vs expected " +
                           std::to_string(H) + "x" + std::to_string(D));
    }
  }
  for (const Matrix* m : {&W_ih, &W_fh, &W_oh, &W_gh}) {
    if (m->rows() != H || m->cols() != H) {
      throw DimensionError("LstmParams: recurrent matrix " + m->shape_string() +
                           " vs expected " + std::to_string(H) + "x" + std::to_string(H));
    }
  }
  for (const Vector* b : {&b_i, &b_f, &b_o, &b_g}) require_size(b->size(), H, "LstmParams bias");
}

namespace {

// W_x x + W_h h + b
Vector affine(const Matrix& w_x, const Matrix& w_h, const Vector& b, std::span<const double> x,
              std::span<const double> h) {
  Vector a(b.size());
  Vector tmp(b.size());
  kernels::gemv(w_x, x, a);
  kernels::gemv(w_h, h, tmp);
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = a[j] + tmp[j] + b[j];
  return a;
}

}  // namespace

LstmStepResult lstm_step(const LstmParams& params, const LstmState& prev,
                         std::span<const double> x) {
  const std::size_t H = params.hidden_dim();
  require_size(x.size(), params.input_dim(), "lstm_step input x");
  require_size(prev.h.size(), H, "lstm_step previous h");
  require_size(prev.c.size(), H, "lstm_step previous c");
  require_finite(x, "lstm_step input x");
  require_finite(prev.h, "lstm_step previous h");
  require_finite(prev.c, "lstm_step previous c");

  LstmStepResult r;
  GateActivations& gt = r.gates;
  gt.i = affine(params.W_ix, params.W_ih, params.b_i, x, prev.h);
  gt.f = affine(params.W_fx, params.W_fh, params.b_f, x, prev.h);
  gt.o = affine(params.W_ox, params.W_oh, params.b_o, x, prev.h);
  gt.g = affine(params.W_gx, params.W_gh, params.b_g, x, prev.h);
  for (std::size_t j = 0; j < H; ++j) {
    gt.i[j] = sigmoid(gt.i[j]);
    gt.f[j] = sigmoid(gt.f[j]);
    gt.o[j] = sigmoid(gt.o[j]);
    gt.g[j] = std::tanh(gt.g[j]);
  }

  r.state.c.resize(H);
  r.state.h.resize(H);
  gt.tanh_c.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    r.state.c[j] = gt.f[j] * prev.c[j] + gt.i[j] * gt.g[j];
    gt.tanh_c[j] = std::tanh(r.state.c[j]);
    r.state.h[j] = gt.o[j] * gt.tanh_c[j];
  }
  return r;
}

void lstm_step_backward_acc(const LstmParams& params, const LstmState& prev,
                            std::span<const double> x, const GateActivations& gates,
                            std::span<const double> grad_h, std::span<const double> grad_c,
                            LstmParams& grads, LstmState& grad_prev, std::span<double> grad_x) {
  const std::size_t H = params.hidden_dim();
  require_size(x.size(), params.input_dim(), "lstm_step_backward input x");
  require_size(grad_h.size(), H, "lstm_step_backward grad_h");
  require_size(grad_c.size(), H, "lstm_step_backward grad_c");
  require_size(grad_x.size(), params.input_dim(), "lstm_step_backward grad_x");
  require_size(gates.i.size(), H, "lstm_step_backward gates");
  require_size(prev.c.size(), H, "lstm_step_backward previous c");

  Vector da_i(H), da_f(H), da_o(H), da_g(H);
  grad_prev.c.assign(H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    const double tc = gates.tanh_c[j];
    const double dc = grad_c[j] + grad_h[j] * gates.o[j] * (1.0 - tc * tc);
    const double d_o = grad_h[j] * tc;
    const double d_i = dc * gates.g[j];
    const double d_g = dc * gates.i[j];
    const double d_f = dc * prev.c[j];
    grad_prev.c[j] = dc * gates.f[j];
    da_i[j] = d_i * gates.i[j] * (1.0 - gates.i[j]);
    da_f[j] = d_f * gates.f[j] * (1.0 - gates.f[j]);
    da_o[j] = d_o * gates.o[j] * (1.0 - gates.o[j]);
    da_g[j] = d_g * (1.0 - gates.g[j] * gates.g[j]);
  }

  kernels::outer_acc(grads.W_ix, da_i, x);
  kernels::outer_acc(grads.W_fx, da_f, x);
  kernels::outer_acc(grads.W_ox, da_o, x);
  kernels::outer_acc(grads.W_gx, da_g, x);
  kernels::outer_acc(grads.W_ih, da_i, prev.h);
  kernels::outer_acc(grads.W_fh, da_f, prev.h);
  kernels::outer_acc(grads.W_oh, da_o, prev.h);
  kernels::outer_acc(grads.W_gh, da_g, prev.h);
  add_inplace(grads.b_i, da_i);
  add_inplace(grads.b_f, da_f);
  add_inplace(grads.b_o, da_o);
  add_inplace(grads.b_g, da_g);

  kernels::gemv_t_acc(params.W_ix, da_i, grad_x);
  kernels::gemv_t_acc(params.W_fx, da_f, grad_x);
  kernels::gemv_t_acc(params.W_ox, da_o, grad_x);
  kernels::gemv_t_acc(params.W_gx, da_g, grad_x);

  grad_prev.h.assign(H, 0.0);
  kernels::gemv_t_acc(params.W_ih, da_i, grad_prev.h);
  kernels::gemv_t_acc(params.W_fh, da_f, grad_prev.h);
  kernels::gemv_t_acc(params.W_oh, da_o, grad_prev.h);
  kernels::gemv_t_acc(params.W_gh, da_g, grad_prev.h);
}

LstmBackward lstm_step_backward(const LstmParams& params, const LstmState& prev,
                                std::span<const double> x, const GateActivations& gates,
                                std::span<const double> grad_h, std::span<const double> grad_c) {
  LstmBackward out{LstmParams(params.input_dim(), params.hidden_dim()), {},
                   Vector(params.input_dim(), 0.0)};
  lstm_step_backward_acc(params, prev, x, gates, grad_h, grad_c, out.grad_params, out.grad_prev,
                         out.grad_x);
  return out;
}

}  // namespace han
