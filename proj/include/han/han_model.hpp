#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "han/attention.hpp"
#include "han/dropout.hpp"
#include "han/lstm.hpp"
#include "han/numerics.hpp"
#include "han/params.hpp"

namespace han {

/// Shape of a two-stream hierarchical attention network.
struct ModelConfig {
  std::uint32_t regions_per_side = 2;  // K
  std::uint32_t feature_dim = 4;       // D
  std::uint32_t hidden = 5;            // H
  std::uint32_t layers = 2;            // L (only 2 is supported)
  std::uint32_t skip = 2;              // k
  std::uint32_t frames = 6;            // T
  std::uint32_t classes = 3;           // C

  std::size_t num_regions() const noexcept {
    return static_cast<std::size_t>(regions_per_side) * regions_per_side;
  }
  std::size_t encoding_dim() const noexcept { return 2ull * layers * hidden; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  std::string describe() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Sorted 1-based time steps at which layer 2 consumes layer-1 output:
/// {k, 2k, ..., floor(T/k) k} plus T itself.
std::vector<std::size_t> layer2_schedule(std::size_t frames, std::size_t skip);

struct HanModel {
  ModelConfig config;
  LstmParams lstm_p1, lstm_p2;  // appearance stream, layers 1 and 2
  LstmParams lstm_q1, lstm_q2;  // motion stream, layers 1 and 2
  AttentionParams attn;
  Matrix W_s;  // C x 4H
  Vector b_s;  // C

  HanModel() = default;
  /// All-zero parameters with shapes from `config`.
  explicit HanModel(const ModelConfig& config);

  /// Scaled-uniform LSTM and classifier weights, zero biases. The attention
  /// scorer is drawn the same way unless `zero_attention`, which keeps it at
  /// zero so every frame attends uniformly.
  static HanModel initialized(const ModelConfig& config, Rng& rng, bool zero_attention = false);

  /// All 51 tensors in fixed checkpoint order.
  TensorList tensors();
  ConstTensorList tensors() const;
  std::size_t parameter_count() const;

  void set_zero();
  /// Throws DimensionError when any tensor disagrees with `config`.
  void validate() const;

  friend bool operator==(const HanModel&, const HanModel&) = default;
};

/// Gradient sets share the model's layout.
using HanGradients = HanModel;

struct ForwardOptions {
  Mode mode = Mode::kEval;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;  // required when mode is kTrain and dropout_rate > 0
};

struct FrameTrace {
  AttentionWeights attention;
  Vector x_p, x_q;
  LstmState prev_p1, prev_q1;
  GateActivations gates_p1, gates_q1;
};

struct Layer2Trace {
  std::size_t t = 0;  // 1-based frame index
  Vector in_p, in_q;  // layer-2 inputs after dropout
  DropoutResult drop_p, drop_q;
  LstmState prev_p2, prev_q2;
  GateActivations gates_p2, gates_q2;
};

/// Everything backward() needs. Holds non-owning views of the input cubes,
/// which must outlive the trace.
struct ForwardTrace {
  ModelConfig config;
  Mode mode = Mode::kEval;
  std::span<const FeatureCube> cubes_p, cubes_q;
  std::vector<std::size_t> schedule;
  std::vector<FrameTrace> frames;
  std::vector<Layer2Trace> layer2;
  LstmState final_p1, final_q1, final_p2, final_q2;
  DropoutResult drop_f;
  Vector logits;
};

/// [h^{p,1}; h^{p,2}; h^{q,1}; h^{q,2}] at the end of the sequence.
struct VideoEncoding {
  Vector h_f;
};

struct ForwardResult {
  Vector class_probs;
  VideoEncoding encoding;
  ForwardTrace trace;
};

ForwardResult forward(const HanModel& model, std::span<const FeatureCube> cubes_p,
                      std::span<const FeatureCube> cubes_q, const ForwardOptions& options = {});

/// Backpropagation through time over both recurrences (LSTM state and the
/// attention scorer's dependence on the previous layer-1 states) plus the
/// layer-1 to layer-2 edges at scheduled steps. Adds into `grads`.
void backward_acc(const HanModel& model, const ForwardTrace& trace,
                  std::span<const double> grad_logits, HanGradients& grads);

HanGradients backward(const HanModel& model, const ForwardTrace& trace,
                      std::span<const double> grad_logits);

/// Binary checkpoint: "HAN1", u32 version, seven u32 config fields
/// (K, D, H, L, k, T, C), then every tensor of tensors() as little-endian doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const HanModel& model, const std::string& path);
HanModel load_checkpoint(const std::string& path);
/// Loads and checks the header against `expected`; FormatError(kConfigMismatch) names both values.
HanModel load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace han
