#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace noisectx {

/// Flat key=value settings. '#' starts a comment; blank lines are ignored.
/// Typed getters throw ConfigError naming the key on malformed values.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  /// Copies every entry of `other` over this one.
  void merge(const KeyValueConfig& other);
  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of reals.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  std::string to_text() const;
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<double> parse_double_list(std::string_view text);

}  // namespace noisectx
