#pragma once

#include <span>

#include "han/numerics.hpp"

namespace han {

enum class Mode { kTrain, kEval };

struct DropoutResult {
  Vector output;
  Vector mask;         // 1 where the unit survived, 0 where it was dropped
  double scale = 1.0;  // 1 / (1 - rate) in train mode, 1 otherwise
};

/// Inverted dropout. In eval mode, or with rate 0, this is the identity and
/// consumes no random draws. Throws ConfigError unless 0 <= rate < 1.
DropoutResult dropout_apply(std::span<const double> v, double rate, Mode mode, Rng& rng);

}  // namespace han
