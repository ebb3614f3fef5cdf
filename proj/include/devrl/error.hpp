#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace devrl {

enum class ErrorKind {
  DimensionMismatch,
  ShapeMismatch,
  NonFinite,
  NonFiniteLoss,
  ConfigError,
  IoError,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch:
      return "DimensionMismatch";
    case ErrorKind::ShapeMismatch:
      return "ShapeMismatch";
    case ErrorKind::NonFinite:
      return "NonFinite";
    case ErrorKind::NonFiniteLoss:
      return "NonFiniteLoss";
    case ErrorKind::ConfigError:
      return "ConfigError";
    case ErrorKind::IoError:
      return "IoError";
  }
  return "Error";
}

}  // namespace devrl
