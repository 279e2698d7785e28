#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "han/dropout.hpp"
#include "han/han_model.hpp"
#include "han/numerics.hpp"
#include "han/params.hpp"

namespace han {

/// One labelled video: both streams' cube sequences.
struct Sample {
  std::string id;
  std::vector<FeatureCube> cubes_p;
  std::vector<FeatureCube> cubes_q;
  std::size_t label = 0;
};

using Dataset = std::vector<Sample>;

enum class Parallelism { kSerial, kOpenMP };

struct TrainConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  double dropout_rate = 0.5;
  double clip_norm = 5.0;
  bool clip = true;
  std::size_t batch_size = 128;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  // Pin W_attn at zero so every frame uses uniform weights (attention ablation).
  bool uniform_attention = false;
  Parallelism parallelism = Parallelism::kOpenMP;

  void validate() const;
};

/// -log p[label]. Throws ConfigError if label is out of range.
double nll_loss(std::span<const double> class_probs, std::size_t label);
/// Same loss from logits via log-sum-exp; finite even when p[label] underflows.
double nll_loss_from_logits(std::span<const double> logits, std::size_t label);
/// d(-log softmax(z)[label]) / dz = p - onehot(label).
Vector nll_grad_logits(std::span<const double> class_probs, std::size_t label);

double global_norm(std::span<const TensorRef> grads);
/// Scales every tensor by ceiling / norm when the global L2 norm exceeds
/// ceiling. Returns the norm before clipping. Throws NumericError naming the
/// first tensor holding a non-finite value.
double clip_global_norm(std::span<const TensorRef> grads, double ceiling);

/// Running averages E[g^2] and E[dx^2], one buffer per parameter tensor.
struct AdadeltaState {
  std::vector<Vector> sq_grad;
  std::vector<Vector> sq_update;

  static AdadeltaState zeros_like(std::span<const TensorRef> params);
};

/// Elementwise:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx       = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + dx
void adadelta_step(std::span<const TensorRef> params, std::span<const TensorRef> grads,
                   AdadeltaState& state, double rho, double epsilon);

struct BatchResult {
  HanGradients grad;  // mean over the batch
  double loss_sum = 0.0;
  std::size_t correct = 0;
};

/// Forward + backward for every sample of a batch. Per-sample dropout streams
/// come from rng.fork(sample position) and gradients are summed in batch order,
/// so the result does not depend on `parallelism` or the thread count.
BatchResult batch_gradient(const HanModel& model, std::span<const Sample* const> batch,
                           double dropout_rate, const Rng& rng, Parallelism parallelism);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> eval_accuracy;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> per_class_count;
  std::vector<std::size_t> per_class_correct;
  std::vector<std::size_t> predictions;

  /// Mean over classes that have at least one sample.
  double mean_class_accuracy() const;
};

/// Eval-mode (dropout-free) classification of every sample.
EvalResult evaluate(const HanModel& model, const Dataset& data,
                    Parallelism parallelism = Parallelism::kOpenMP);

/// Owns the optimizer state for one model; each run_epoch() shuffles with a
/// seeded stream, trains on mini-batches and reports metrics.
class Trainer {
 public:
  Trainer(HanModel& model, TrainConfig config);

  EpochMetrics run_epoch(const Dataset& train, const Dataset* eval = nullptr);
  std::size_t epochs_done() const noexcept { return epoch_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  HanModel& model_;
  TrainConfig config_;
  AdadeltaState state_;
  std::size_t epoch_ = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs config.epochs epochs. Throws ConfigError for an empty dataset or a
/// label outside [0, C) and NumericError (naming epoch and batch) on a
/// non-finite loss.
std::vector<EpochMetrics> train_epochs(HanModel& model, const Dataset& train,
                                       const TrainConfig& config, const Dataset* eval = nullptr,
                                       const EpochCallback& on_epoch = {});

/// Fisher-Yates permutation of [0, n) drawn from rng.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace han
