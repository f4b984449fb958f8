#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace sgdetect {

/// Base class for recoverable input problems (bad files, bad configuration).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model or state file that parses but describes an invalid plant.
class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what, int rank = -1) : Error(what), rank_(rank) {}
  /// Observability rank found when the model was rejected as unobservable, else -1.
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

/// Malformed text in one of the plain-text formats.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingFileError : public Error {
 public:
  explicit MissingFileError(const std::filesystem::path& p)
      : Error("file not found: " + p.string()), path_(p) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace sgdetect
