#pragma once

#include "cl2o/data/results.hpp"
#include "cl2o/numcore/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cl2o {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every known key with its default, in canonical order.
const std::vector<ConfigKey>& config_registry();

/// All hyperparameters as named string values. Every key of the registry is
/// always present; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  /// Defaults overridden by the `key = value` file at `path`.
  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& text, const std::string& origin = "<text>");

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Comma-separated list of numbers.
  std::vector<double> get_list(const std::string& key) const;

  /// Canonical `key = value` dump in registry order.
  std::string str() const;
  KeyValues to_key_values() const;
  /// FNV-1a 64 of str(), as 16 hex digits.
  std::string hash() const;

 private:
  std::vector<std::string> values_;
  std::size_t index_of(const std::string& key) const;
};

/// FNV-1a 64 of arbitrary bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace cl2o
