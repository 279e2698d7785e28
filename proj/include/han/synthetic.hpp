#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "han/training.hpp"

namespace han {

enum class RegionPolicy {
  kFixed,     // one signal region per class for the whole video
  kDrifting,  // the signal region moves one grid cell right per sub-action
};

RegionPolicy parse_region_policy(const std::string& name);
const char* to_string(RegionPolicy policy);

/// Synthetic two-stream action data. Each class is an ordered sequence of
/// sub-action codes; classes 2m and 2m+1 use the same codes in reverse order,
/// so only an order-sensitive model can tell them apart. In every frame one
/// region carries the current sub-action's signal vector in both streams and
/// every other region carries N(0, noise_sigma^2) noise.
struct SyntheticSpec {
  std::size_t regions_per_side = 3;  // K
  std::size_t feature_dim = 8;       // D
  std::size_t frames = 16;           // T
  std::size_t classes = 4;           // C
  std::size_t samples_per_class = 10;
  RegionPolicy policy = RegionPolicy::kFixed;
  std::size_t sub_action_length = 4;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  // Offset into the per-sample stream; a held-out split uses the same seed
  // (same class structure) with an offset past the training samples.
  std::size_t first_sample_index = 0;

  std::size_t sub_actions() const noexcept { return frames / sub_action_length; }
  /// Throws ConfigError naming the offending values.
  void validate() const;
};

struct SyntheticDataset {
  SyntheticSpec spec;
  Dataset samples;
  std::vector<std::string> label_names;                // index = class
  std::vector<std::vector<std::size_t>> class_codes;   // ordered sub-action codes per class
  std::vector<std::vector<std::size_t>> true_regions;  // [sample][t], 0-based region index
};

/// Sub-action code active at 0-based frame t (the last sub-action absorbs any remainder).
std::size_t sub_action_at(const SyntheticSpec& spec, std::size_t t);

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes features/<id>.hfc, manifest.tsv, labels.tsv and attention_truth.csv
/// (sample_id,t,true_region_index with 1-based t) under `dir`.
void write_synthetic(const SyntheticDataset& data, const std::string& dir);

}  // namespace han
