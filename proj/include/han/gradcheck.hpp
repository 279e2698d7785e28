#pragma once

#include <string>
#include <vector>

#include "han/han_model.hpp"
#include "han/training.hpp"

namespace han {

struct BlockCheck {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  bool all_pass = false;
};

/// Sample with N(0,1) cubes shaped for `config` and a uniformly drawn label.
Sample random_sample(const ModelConfig& config, Rng& rng);

/// Eval-mode loss -log p(label) of one sample.
double sample_loss(const HanModel& model, const Sample& sample);

/// Analytic BPTT gradient of sample_loss for every parameter block.
HanGradients sample_gradient(const HanModel& model, const Sample& sample);

/// Compares the analytic gradient with Richardson-extrapolated central
/// differences (step `step`), block by
/// block, using |a-b| / max(|a|,|b|,1e-8). `corrupt_block` names a block
/// whose analytic gradient is perturbed first (self-test hook).
GradCheckReport check_gradients(const HanModel& model, const Sample& sample, double step,
                                double tolerance, const std::string& corrupt_block = "");

}  // namespace han
