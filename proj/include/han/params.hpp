#pragma once

#include <span>
#include <string>
#include <vector>

namespace han {

/// Named view of one parameter (or gradient) tensor's storage.
struct TensorRef {
  std::string name;
  std::span<double> data;
};

struct ConstTensorRef {
  std::string name;
  std::span<const double> data;
};

using TensorList = std::vector<TensorRef>;
using ConstTensorList = std::vector<ConstTensorRef>;

}  // namespace han
