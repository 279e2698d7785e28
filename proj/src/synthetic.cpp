#include "han/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "han/data_io.hpp"

namespace han {

namespace {

// Fork keys for the structure streams; per-sample streams use the sample index.
constexpr std::uint64_t kStructureStream = 0xC1A55E5ULL << 32;

std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", index);
  return buf;
}

}  // namespace

RegionPolicy parse_region_policy(const std::string& name) {
  if (name == "fixed") return RegionPolicy::kFixed;
  if (name == "drifting") return RegionPolicy::kDrifting;
  throw ConfigError("unknown signal region policy '" + name + "' (fixed|drifting)");
}

const char* to_string(RegionPolicy policy) {
  return policy == RegionPolicy::kFixed ? "fixed" : "drifting";
}

void SyntheticSpec::validate() const {
  if (regions_per_side == 0 || feature_dim == 0) {
    throw ConfigError("synthetic: K and D must be positive");
  }
  if (classes < 2) throw ConfigError("synthetic: C must be at least 2, got " + std::to_string(classes));
  if (samples_per_class == 0) throw ConfigError("synthetic: samples_per_class must be positive");
  if (sub_action_length == 0) throw ConfigError("synthetic: sub_action_length must be at least 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic: noise_sigma must be non-negative");
  if (frames < sub_action_length) {
    throw ConfigError("synthetic: T=" + std::to_string(frames) +
                      " is shorter than sub_action_length=" + std::to_string(sub_action_length));
  }
  if (sub_actions() < 2) {
    throw ConfigError("synthetic: T=" + std::to_string(frames) + " with sub_action_length=" +
                      std::to_string(sub_action_length) +
                      " leaves fewer than 2 sub-actions, so order cannot distinguish classes");
  }
}

std::size_t sub_action_at(const SyntheticSpec& spec, std::size_t t) {
  return std::min(t / spec.sub_action_length, spec.sub_actions() - 1);
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t K = spec.regions_per_side;
  const std::size_t n_regions = K * K;
  const std::size_t D = spec.feature_dim;
  const std::size_t S = spec.sub_actions();
  const std::size_t pairs = (spec.classes + 1) / 2;
  const std::size_t n_codes = S + pairs - 1;

  SyntheticDataset out;
  out.spec = spec;

  Rng structure = Rng(spec.seed).fork(kStructureStream);

  // Pair m draws the consecutive codes m..m+S-1 in a random order; its odd
  // partner plays them reversed.
  out.class_codes.resize(spec.classes);
  for (std::size_t m = 0; m < pairs; ++m) {
    std::vector<std::size_t> codes(S);
    for (std::size_t j = 0; j < S; ++j) codes[j] = m + j;
    for (std::size_t i = S; i > 1; --i) std::swap(codes[i - 1], codes[structure.below(i)]);
    out.class_codes[2 * m] = codes;
    if (2 * m + 1 < spec.classes) {
      out.class_codes[2 * m + 1].assign(codes.rbegin(), codes.rend());
    }
  }

  // Random +-1 signal vectors per code and stream.
  std::vector<Vector> signal_p(n_codes, Vector(D)), signal_q(n_codes, Vector(D));
  for (std::size_t a = 0; a < n_codes; ++a) {
    for (std::size_t d = 0; d < D; ++d) {
      signal_p[a][d] = structure.uniform() < 0.5 ? -1.0 : 1.0;
      signal_q[a][d] = structure.uniform() < 0.5 ? -1.0 : 1.0;
    }
  }

  // Both members of a pair share the home region, so location alone never
  // separates order-confusable classes.
  std::vector<std::size_t> region_perm(n_regions);
  for (std::size_t i = 0; i < n_regions; ++i) region_perm[i] = i;
  for (std::size_t i = n_regions; i > 1; --i) {
    std::swap(region_perm[i - 1], region_perm[structure.below(i)]);
  }
  auto home_region = [&](std::size_t cls) { return region_perm[(cls / 2) % n_regions]; };
  auto region_at = [&](std::size_t cls, std::size_t t) {
    const std::size_t home = home_region(cls);
    if (spec.policy == RegionPolicy::kFixed) return home;
    const std::size_t row = home / K;
    const std::size_t col = (home % K + sub_action_at(spec, t)) % K;
    return row * K + col;
  };

  for (std::size_t c = 0; c < spec.classes; ++c) out.label_names.push_back("class" + std::to_string(c));

  const std::size_t total = spec.samples_per_class * spec.classes;
  out.samples.resize(total);
  out.true_regions.resize(total);
  const auto count = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t index = spec.first_sample_index + i;
    const std::size_t cls = index % spec.classes;
    Rng rng = Rng(spec.seed).fork(index);
    Sample& s = out.samples[i];
    s.id = sample_name(index);
    s.label = cls;
    auto& truth = out.true_regions[i];
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const std::size_t region = region_at(cls, t);
      const std::size_t code = out.class_codes[cls][sub_action_at(spec, t)];
      truth.push_back(region);
      FeatureCube& p = s.cubes_p.emplace_back(n_regions, D, t);
      FeatureCube& q = s.cubes_q.emplace_back(n_regions, D, t);
      for (std::size_t r = 0; r < n_regions; ++r) {
        for (std::size_t d = 0; d < D; ++d) {
          if (r == region) {
            p.regions(r, d) = signal_p[code][d];
            q.regions(r, d) = signal_q[code][d];
          } else {
            p.regions(r, d) = spec.noise_sigma * rng.normal();
            q.regions(r, d) = spec.noise_sigma * rng.normal();
          }
        }
      }
    }
  }
  return out;
}

void write_synthetic(const SyntheticDataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  std::vector<ManifestRecord> records;
  for (const Sample& s : data.samples) {
    const std::string rel = "features/" + s.id + ".hfc";
    write_sequence((fs::path(dir) / rel).string(), s.cubes_p, s.cubes_q,
                   data.spec.regions_per_side);
    records.push_back({s.id, rel, data.label_names[s.label]});
  }
  write_manifest((fs::path(dir) / "manifest.tsv").string(), records);
  write_label_map((fs::path(dir) / "labels.tsv").string(), LabelMap{data.label_names});

  std::ofstream truth(fs::path(dir) / "attention_truth.csv", std::ios::binary | std::ios::trunc);
  if (!truth) throw IoError("cannot write attention_truth.csv under '" + dir + "'");
  truth << "sample_id,t,true_region_index\n";
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    for (std::size_t t = 0; t < data.true_regions[i].size(); ++t) {
      truth << data.samples[i].id << ',' << (t + 1) << ',' << data.true_regions[i][t] << '\n';
    }
  }
}

}  // namespace han
