#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aoi {

enum class ErrorKind {
  InvalidParam,
  DeadPolicy,
  GateNeverPasses,
  CycleOverflow,
  NoFiniteValue,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidParam: return "InvalidParam";
    case ErrorKind::DeadPolicy: return "DeadPolicy";
    case ErrorKind::GateNeverPasses: return "GateNeverPasses";
    case ErrorKind::CycleOverflow: return "CycleOverflow";
    case ErrorKind::NoFiniteValue: return "NoFiniteValue";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace aoi
