#pragma once

#include <stdexcept>
#include <string>

namespace mtd {

// All precondition violations derive from Error and carry a short
// machine-readable code ("shape", "invalid-rank", ...) used by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

struct InvalidModeError : Error {
  explicit InvalidModeError(const std::string& what) : Error("invalid-mode", what) {}
};

struct InvalidRankError : Error {
  explicit InvalidRankError(const std::string& what) : Error("invalid-rank", what) {}
};

struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& what) : Error("invalid-input", what) {}
};

struct InvalidArgumentError : Error {
  explicit InvalidArgumentError(const std::string& what) : Error("invalid-argument", what) {}
};

struct RankDeficientError : Error {
  explicit RankDeficientError(const std::string& what) : Error("rank-deficient", what) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& what) : Error("unsupported", what) {}
};

}  // namespace mtd
