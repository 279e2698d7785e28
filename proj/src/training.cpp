#include "han/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include <omp.h>

namespace han {

DropoutResult dropout_apply(std::span<const double> v, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult r{Vector(v.begin(), v.end()), Vector(v.size(), 1.0), 1.0};
  if (mode == Mode::kEval || rate == 0.0) return r;
  r.scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (rng.uniform() < rate) {
      r.mask[i] = 0.0;
      r.output[i] = 0.0;
    } else {
      r.output[i] = v[i] * r.scale;
    }
  }
  return r;
}

void TrainConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("train.rho must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("train.dropout must lie in [0, 1)");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
}

double nll_loss(std::span<const double> class_probs, std::size_t label) {
  if (label >= class_probs.size()) {
    throw ConfigError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(class_probs.size()) + ")");
  }
  return -std::log(class_probs[label]);
}

double nll_loss_from_logits(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ConfigError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(logits.size()) + ")");
  }
  return log_sum_exp(logits) - logits[label];
}

Vector nll_grad_logits(std::span<const double> class_probs, std::size_t label) {
  if (label >= class_probs.size()) {
    throw ConfigError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(class_probs.size()) + ")");
  }
  Vector g(class_probs.begin(), class_probs.end());
  g[label] -= 1.0;
  return g;
}

double global_norm(std::span<const TensorRef> grads) {
  // Scaled by the largest magnitude so gradients near the float64 limit do
  // not overflow the sum of squares.
  double peak = 0.0;
  for (const auto& t : grads) {
    for (double v : t.data) peak = std::max(peak, std::abs(v));
  }
  if (peak == 0.0 || !std::isfinite(peak)) return peak;
  double s = 0.0;
  for (const auto& t : grads) {
    for (double v : t.data) s += (v / peak) * (v / peak);
  }
  return peak * std::sqrt(s);
}

double clip_global_norm(std::span<const TensorRef> grads, double ceiling) {
  if (!(ceiling > 0.0)) throw ConfigError("clip_global_norm: ceiling must be positive");
  for (const auto& t : grads) require_finite(t.data, "gradient " + t.name);
  const double norm = global_norm(grads);
  if (norm > ceiling) {
    const double s = ceiling / norm;
    for (const auto& t : grads) {
      for (double& v : t.data) v *= s;
    }
  }
  return norm;
}

AdadeltaState AdadeltaState::zeros_like(std::span<const TensorRef> params) {
  AdadeltaState s;
  for (const auto& t : params) {
    s.sq_grad.emplace_back(t.data.size(), 0.0);
    s.sq_update.emplace_back(t.data.size(), 0.0);
  }
  return s;
}

void adadelta_step(std::span<const TensorRef> params, std::span<const TensorRef> grads,
                   AdadeltaState& state, double rho, double epsilon) {
  if (params.size() != grads.size() || params.size() != state.sq_grad.size() ||
      params.size() != state.sq_update.size()) {
    throw DimensionError("adadelta_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.sq_grad.size()) + " accumulators");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto x = params[k].data;
    auto g = grads[k].data;
    auto& eg = state.sq_grad[k];
    auto& ed = state.sq_update[k];
    require_size(g.size(), x.size(), "adadelta_step gradient " + grads[k].name);
    require_size(eg.size(), x.size(), "adadelta_step accumulator " + params[k].name);
    for (std::size_t j = 0; j < x.size(); ++j) {
      eg[j] = rho * eg[j] + (1.0 - rho) * g[j] * g[j];
      const double dx = -std::sqrt(ed[j] + epsilon) / std::sqrt(eg[j] + epsilon) * g[j];
      ed[j] = rho * ed[j] + (1.0 - rho) * dx * dx;
      x[j] += dx;
    }
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

namespace {

struct SampleOutcome {
  double loss = 0.0;
  bool correct = false;
  std::exception_ptr error;
};

void sample_gradient(const HanModel& model, const Sample& s, double dropout_rate, Rng rng,
                     HanGradients& grad, SampleOutcome& outcome) {
  try {
    grad.set_zero();
    ForwardOptions opt{Mode::kTrain, dropout_rate, &rng};
    ForwardResult fr = forward(model, s.cubes_p, s.cubes_q, opt);
    outcome.loss = nll_loss_from_logits(fr.trace.logits, s.label);
    const auto best = std::max_element(fr.class_probs.begin(), fr.class_probs.end());
    outcome.correct = static_cast<std::size_t>(best - fr.class_probs.begin()) == s.label;
    const Vector dz = nll_grad_logits(fr.class_probs, s.label);
    backward_acc(model, fr.trace, dz, grad);
  } catch (...) {
    outcome.error = std::current_exception();
  }
}

}  // namespace

BatchResult batch_gradient(const HanModel& model, std::span<const Sample* const> batch,
                           double dropout_rate, const Rng& rng, Parallelism parallelism) {
  BatchResult out{HanGradients(model.config), 0.0, 0};
  if (batch.empty()) return out;

  // Samples are processed in chunks of `width` with one scratch gradient per
  // slot; chunk results are added in sample order after each chunk.
  const std::size_t width =
      parallelism == Parallelism::kOpenMP
          ? std::min<std::size_t>(batch.size(), static_cast<std::size_t>(omp_get_max_threads()))
          : 1;
  std::vector<HanGradients> scratch(width, HanGradients(model.config));
  std::vector<SampleOutcome> outcomes(width);
  TensorList acc = out.grad.tensors();

  for (std::size_t start = 0; start < batch.size(); start += width) {
    const std::size_t n = std::min(width, batch.size() - start);
    const auto count = static_cast<std::ptrdiff_t>(n);
    if (parallelism == Parallelism::kOpenMP && n > 1) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        sample_gradient(model, *batch[start + u], dropout_rate, rng.fork(start + u), scratch[u],
                        outcomes[u]);
      }
    } else {
      for (std::size_t u = 0; u < n; ++u) {
        sample_gradient(model, *batch[start + u], dropout_rate, rng.fork(start + u), scratch[u],
                        outcomes[u]);
      }
    }
    for (std::size_t u = 0; u < n; ++u) {
      if (outcomes[u].error) std::rethrow_exception(outcomes[u].error);
      out.loss_sum += outcomes[u].loss;
      out.correct += outcomes[u].correct ? 1 : 0;
      const TensorList part = scratch[u].tensors();
      for (std::size_t k = 0; k < acc.size(); ++k) add_inplace(acc[k].data, part[k].data);
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& t : acc) {
    for (double& v : t.data) v *= inv;
  }
  return out;
}

double EvalResult::mean_class_accuracy() const {
  double sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < per_class_count.size(); ++c) {
    if (per_class_count[c] == 0) continue;
    sum += static_cast<double>(per_class_correct[c]) / static_cast<double>(per_class_count[c]);
    ++classes;
  }
  return classes == 0 ? 0.0 : sum / static_cast<double>(classes);
}

EvalResult evaluate(const HanModel& model, const Dataset& data, Parallelism parallelism) {
  if (data.empty()) throw ConfigError("evaluate: dataset is empty");
  EvalResult r;
  r.per_class_count.assign(model.config.classes, 0);
  r.per_class_correct.assign(model.config.classes, 0);
  r.predictions.assign(data.size(), 0);
  std::vector<std::exception_ptr> errors(data.size());
  const auto n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(static) if (parallelism == Parallelism::kOpenMP)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      const ForwardResult fr = forward(model, data[u].cubes_p, data[u].cubes_q);
      const auto best = std::max_element(fr.class_probs.begin(), fr.class_probs.end());
      r.predictions[u] = static_cast<std::size_t>(best - fr.class_probs.begin());
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    const std::size_t y = data[i].label;
    if (y >= model.config.classes) {
      throw ConfigError("sample '" + data[i].id + "' label " + std::to_string(y) +
                        " outside [0, " + std::to_string(model.config.classes) + ")");
    }
    ++r.per_class_count[y];
    if (r.predictions[i] == y) {
      ++r.per_class_correct[y];
      ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

Trainer::Trainer(HanModel& model, TrainConfig config) : model_(model), config_(config) {
  config_.validate();
  model_.validate();
  if (config_.uniform_attention) model_.attn.W = Matrix(model_.attn.W.rows(), model_.attn.W.cols());
  state_ = AdadeltaState::zeros_like(model_.tensors());
}

EpochMetrics Trainer::run_epoch(const Dataset& train, const Dataset* eval) {
  if (train.empty()) throw ConfigError("training dataset is empty");
  for (const Sample& s : train) {
    if (s.label >= model_.config.classes) {
      throw ConfigError("sample '" + s.id + "' label " + std::to_string(s.label) +
                        " outside [0, " + std::to_string(model_.config.classes) + ")");
    }
  }

  const Rng base(config_.seed);
  Rng shuffle_rng = base.fork(2 * epoch_);
  const Rng dropout_rng = base.fork(2 * epoch_ + 1);
  const std::vector<std::size_t> order = shuffled_indices(train.size(), shuffle_rng);

  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<const Sample*> batch;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);

    const std::string where =
        "epoch " + std::to_string(epoch_ + 1) + ", batch " + std::to_string(batch_index);
    BatchResult br;
    try {
      br = batch_gradient(model_, batch, config_.dropout_rate, dropout_rng.fork(batch_index),
                          config_.parallelism);
      if (!std::isfinite(br.loss_sum)) throw NumericError("non-finite loss");
      if (config_.uniform_attention) {
        std::fill(br.grad.attn.W.values().begin(), br.grad.attn.W.values().end(), 0.0);
      }
      if (config_.clip) {
        clip_global_norm(br.grad.tensors(), config_.clip_norm);
      } else {
        for (const auto& t : br.grad.tensors()) require_finite(t.data, "gradient " + t.name);
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (" + where + ")");
    }
    loss_sum += br.loss_sum;
    correct += br.correct;

    TensorList grads = br.grad.tensors();
    adadelta_step(model_.tensors(), grads, state_, config_.rho, config_.epsilon);
  }

  ++epoch_;
  EpochMetrics m;
  m.epoch = epoch_;
  m.mean_loss = loss_sum / static_cast<double>(train.size());
  m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  if (eval != nullptr && !eval->empty()) {
    m.eval_accuracy = evaluate(model_, *eval, config_.parallelism).accuracy;
  }
  return m;
}

std::vector<EpochMetrics> train_epochs(HanModel& model, const Dataset& train,
                                       const TrainConfig& config, const Dataset* eval,
                                       const EpochCallback& on_epoch) {
  Trainer trainer(model, config);
  std::vector<EpochMetrics> out;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    out.push_back(trainer.run_epoch(train, eval));
    if (on_epoch) on_epoch(out.back());
  }
  return out;
}

}  // namespace han
