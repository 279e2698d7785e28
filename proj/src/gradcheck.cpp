#include "han/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace han {

Sample random_sample(const ModelConfig& config, Rng& rng) {
  Sample s;
  s.id = "random";
  for (std::size_t t = 0; t < config.frames; ++t) {
    FeatureCube& p = s.cubes_p.emplace_back(config.num_regions(), config.feature_dim, t);
    FeatureCube& q = s.cubes_q.emplace_back(config.num_regions(), config.feature_dim, t);
    for (double& v : p.regions.values()) v = rng.normal();
    for (double& v : q.regions.values()) v = rng.normal();
  }
  s.label = static_cast<std::size_t>(rng.below(config.classes));
  return s;
}

double sample_loss(const HanModel& model, const Sample& sample) {
  const ForwardResult fr = forward(model, sample.cubes_p, sample.cubes_q);
  return nll_loss_from_logits(fr.trace.logits, sample.label);
}

HanGradients sample_gradient(const HanModel& model, const Sample& sample) {
  const ForwardResult fr = forward(model, sample.cubes_p, sample.cubes_q);
  return backward(model, fr.trace, nll_grad_logits(fr.class_probs, sample.label));
}

GradCheckReport check_gradients(const HanModel& model, const Sample& sample, double step,
                                double tolerance, const std::string& corrupt_block) {
  HanGradients analytic = sample_gradient(model, sample);
  TensorList grads = analytic.tensors();
  if (!corrupt_block.empty()) {
    auto it = std::find_if(grads.begin(), grads.end(),
                           [&](const TensorRef& t) { return t.name == corrupt_block; });
    if (it == grads.end()) throw ConfigError("unknown parameter block '" + corrupt_block + "'");
    it->data[0] += 1e-2 + 0.5 * std::abs(it->data[0]);
  }

  HanModel probe = model;
  TensorList params = probe.tensors();
  GradCheckReport report;
  report.all_pass = true;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::span<double> slot = params[k].data;
    const Vector saved(slot.begin(), slot.end());
    auto objective = [&](std::span<const double> theta) {
      std::copy(theta.begin(), theta.end(), slot.begin());
      return sample_loss(probe, sample);
    };
    const Vector numeric = richardson_gradient(objective, saved, step);
    std::copy(saved.begin(), saved.end(), slot.begin());

    BlockCheck b{params[k].name, slot.size(), 0.0, 0.0, true};
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      b.max_rel_error = std::max(b.max_rel_error, relative_error(grads[k].data[j], numeric[j]));
      b.max_abs_error = std::max(b.max_abs_error, std::abs(grads[k].data[j] - numeric[j]));
    }
    b.pass = b.max_rel_error <= tolerance;
    report.all_pass = report.all_pass && b.pass;
    report.blocks.push_back(std::move(b));
  }
  return report;
}

}  // namespace han
