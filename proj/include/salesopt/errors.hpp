#pragma once

#include <stdexcept>
#include <string>

namespace salesopt {

/// Base for all library errors. `code()` is a stable machine-readable tag
/// used by the CLI and HTTP layers.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& m) : Error("invalid_argument", m) {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string& m) : Error("insufficient_data", m) {}
};

struct Infeasible : Error {
  explicit Infeasible(const std::string& m) : Error("infeasible", m) {}
};

struct NotFound : Error {
  explicit NotFound(const std::string& m) : Error("not_found", m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

}  // namespace salesopt
