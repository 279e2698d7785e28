#include "han/run_config.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace han {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      {"model.regions_per_side", "2"},
      {"model.feature_dim", "4"},
      {"model.hidden", "5"},
      {"model.layers", "2"},
      {"model.skip", "2"},
      {"model.frames", "6"},
      {"model.classes", "3"},
      {"model.attention", "true"},
      {"train.rho", "0.95"},
      {"train.epsilon", "1e-6"},
      {"train.dropout", "0.5"},
      {"train.clip_norm", "5.0"},
      {"train.clip", "true"},
      {"train.batch_size", "128"},
      {"train.epochs", "10"},
      {"train.seed", "0"},
      {"train.init_checkpoint", ""},
      {"data.manifest", ""},
      {"data.label_map", ""},
      {"data.eval_manifest", ""},
      {"data.streams", "both"},
      {"synth.out_dir", ""},
      {"synth.samples_per_class", "10"},
      {"synth.policy", "fixed"},
      {"synth.sub_action_length", "3"},
      {"synth.noise_sigma", "0.1"},
      {"synth.seed", "0"},
      {"synth.first_sample_index", "0"},
      {"out.checkpoint", ""},
      {"out.metrics", ""},
      {"gradcheck.step", "2e-3"},
      {"gradcheck.tolerance", "1e-4"},
      {"gradcheck.seed", "0"},
  };
  return kDefaults;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

const std::string& RunConfig::require(const std::string& key) const {
  const std::string& v = get(key);
  if (v.empty()) throw ConfigError("required config key '" + key + "' is not set");
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const auto n = std::stoull(v, &used, 10);
      if (used == v.size()) return n;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
}

std::uint32_t RunConfig::get_u32(const std::string& key) const {
  const auto n = get_u64(key);
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("config key '" + key + "' is out of range: " + std::to_string(n));
  }
  return static_cast<std::uint32_t>(n);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.regions_per_side = get_u32("model.regions_per_side");
  m.feature_dim = get_u32("model.feature_dim");
  m.hidden = get_u32("model.hidden");
  m.layers = get_u32("model.layers");
  m.skip = get_u32("model.skip");
  m.frames = get_u32("model.frames");
  m.classes = get_u32("model.classes");
  m.validate();
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.rho = get_double("train.rho");
  t.epsilon = get_double("train.epsilon");
  t.dropout_rate = get_double("train.dropout");
  t.clip_norm = get_double("train.clip_norm");
  t.clip = get_bool("train.clip");
  t.batch_size = get_u64("train.batch_size");
  t.epochs = get_u64("train.epochs");
  t.seed = get_u64("train.seed");
  t.uniform_attention = !get_bool("model.attention");
  t.validate();
  return t;
}

SyntheticSpec RunConfig::synthetic() const {
  const ModelConfig m = model();
  SyntheticSpec s;
  s.regions_per_side = m.regions_per_side;
  s.feature_dim = m.feature_dim;
  s.frames = m.frames;
  s.classes = m.classes;
  s.samples_per_class = get_u64("synth.samples_per_class");
  s.policy = parse_region_policy(get("synth.policy"));
  s.sub_action_length = get_u64("synth.sub_action_length");
  s.noise_sigma = get_double("synth.noise_sigma");
  s.seed = get_u64("synth.seed");
  s.first_sample_index = get_u64("synth.first_sample_index");
  s.validate();
  return s;
}

}  // namespace han
