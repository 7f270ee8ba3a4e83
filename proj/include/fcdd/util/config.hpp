#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace fcdd {

/// Flat namespaced key=value settings ("train.batch_size=30"). Every key in
/// defaults() is documented there; unknown keys are rejected on set/parse.
class RunConfig {
 public:
  RunConfig();

  /// The full table of known keys with their default values.
  static const std::map<std::string, std::string>& defaults();

  /// Parses a config file: one key=value per line, '#' comments, blank
  /// lines ignored. Later assignments win.
  void load_file(const std::string& path);

  /// Sets a single key; throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Serializes the effective configuration, keys sorted, one per line.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fcdd
