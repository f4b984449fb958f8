#pragma once

// Flat `section.key = value` configuration files.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sgdetect {

class Config {
 public:
  /// Throws MissingFileError or ConfigError.
  static Config load(const std::filesystem::path& path);
  static Config parse(std::string_view text, std::filesystem::path base_dir, std::string_view origin = "<config>");

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& text(const std::string& key) const;
  std::string text_or(const std::string& key, std::string fallback) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key) const;
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
  bool flag_or(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;
  /// Relative paths resolve against the directory of the config file.
  std::filesystem::path path(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::filesystem::path& base_dir() const noexcept { return base_; }

  /// FNV-1a over the normalized key = value lines.
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_;
};

}  // namespace sgdetect
