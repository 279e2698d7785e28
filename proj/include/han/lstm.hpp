#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "han/numerics.hpp"
#include "han/params.hpp"

namespace han {

/// Weights of one LSTM layer. Gate order everywhere is input, forget, output, candidate.
struct LstmParams {
  Matrix W_ix, W_fx, W_ox, W_gx;  // hidden x input
  Matrix W_ih, W_fh, W_oh, W_gh;  // hidden x hidden
  Vector b_i, b_f, b_o, b_g;

  LstmParams() = default;
  LstmParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const noexcept { return W_ix.cols(); }
  std::size_t hidden_dim() const noexcept { return W_ix.rows(); }

  /// The twelve tensors in checkpoint order, names prefixed with `prefix`.
  TensorList tensors(const std::string& prefix = "");
  ConstTensorList tensors(const std::string& prefix = "") const;

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) for every matrix, zero biases.
  void init_glorot(Rng& rng);

  /// Throws DimensionError unless all twelve tensors agree on (hidden, input).
  void validate() const;

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

/// Gate values cached by the forward step for the backward step.
struct GateActivations {
  Vector i, f, o, g;
  Vector tanh_c;  // tanh of the new cell state
};

struct LstmStepResult {
  LstmState state;
  GateActivations gates;
};

/// One step of the LSTM recurrence:
///   i = sig(W_ix x + W_ih h + b_i)   f = sig(W_fx x + W_fh h + b_f)
///   o = sig(W_ox x + W_oh h + b_o)   g = tanh(W_gx x + W_gh h + b_g)
///   c' = f * c + i * g               h' = o * tanh(c')
/// Throws DimensionError on shape mismatch and NumericError if x or the
/// previous state holds a non-finite value.
LstmStepResult lstm_step(const LstmParams& params, const LstmState& prev,
                         std::span<const double> x);

struct LstmBackward {
  LstmParams grad_params;
  LstmState grad_prev;
  Vector grad_x;
};

/// Reverse-mode adjoint of lstm_step for upstream gradients on (h', c').
LstmBackward lstm_step_backward(const LstmParams& params, const LstmState& prev,
                                std::span<const double> x, const GateActivations& gates,
                                std::span<const double> grad_h, std::span<const double> grad_c);

/// Accumulating form used inside BPTT: adds parameter gradients into `grads`,
/// overwrites `grad_prev` and adds the input gradient into `grad_x`.
void lstm_step_backward_acc(const LstmParams& params, const LstmState& prev,
                            std::span<const double> x, const GateActivations& gates,
                            std::span<const double> grad_h, std::span<const double> grad_c,
                            LstmParams& grads, LstmState& grad_prev, std::span<double> grad_x);

}  // namespace han
