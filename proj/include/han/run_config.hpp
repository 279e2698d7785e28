#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "han/han_model.hpp"
#include "han/synthetic.hpp"
#include "han/training.hpp"

namespace han {

/// Flat dotted-key configuration ("model.hidden = 64"). Every key has a
/// default; files and flags may only set known keys.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::pair<std::string, std::string>>& defaults();

  /// Parses "key = value" lines; '#' starts a comment. Throws ConfigError on
  /// unknown keys or malformed lines.
  void merge_file(const std::string& path);
  void merge_text(const std::string& text, const std::string& source = "<text>");
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::uint32_t get_u32(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Throws ConfigError if the key's value is empty.
  const std::string& require(const std::string& key) const;

  ModelConfig model() const;
  TrainConfig train() const;
  SyntheticSpec synthetic() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace han
