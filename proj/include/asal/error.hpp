#pragma once

#include <stdexcept>
#include <string>

namespace asal {

// Shape or size contract violated by a caller.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration value (maps to the CLI's config exit code).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad input data: manifests, feature files, bank and checkpoint files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary payload. Carries the byte offset at which decoding failed.
class FormatError : public DataError {
 public:
  FormatError(const std::string& detail, std::size_t offset)
      : DataError(detail + " (at byte offset " + std::to_string(offset) + ")"), detail_(detail), offset_(offset) {}

  // Same error, prefixed with where it came from (usually a file path).
  FormatError with_context(const std::string& context) const { return {context + ": " + detail_, offset_}; }

  std::size_t offset() const { return offset_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

// A batch whose Pearson correlation is undefined (N < 2 or zero variance).
class DegenerateBatch : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A gradient block contained NaN or Inf; training must stop.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& block)
      : std::runtime_error("non-finite gradient in parameter block '" + block + "'"),
        block_(block) {}

  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

}  // namespace asal
