#pragma once

#include <stdexcept>

namespace taas {

/// Raised for bad user-facing configuration (CLI exit code 1).
/// Everything else that escapes is a runtime failure (exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace taas
