#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sparseoc {

/// Problem size exceeds a configured work or memory cap.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numeric evaluation produced non-finite values; carries the offending
/// state when one is known.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what, std::vector<double> state = {})
      : std::runtime_error(what), offending_state(std::move(state)) {}
  std::vector<double> offending_state;
};

/// Iterative solver failed to converge; carries the residual history so the
/// caller can persist or inspect it.
struct SolverError : std::runtime_error {
  SolverError(const std::string& what, std::vector<double> residuals = {})
      : std::runtime_error(what), residual_history(std::move(residuals)) {}
  std::vector<double> residual_history;
};

/// Run-configuration parse or validation failure; line < 0 means the error is
/// not tied to a specific line of the file.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what, int line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line(line) {}
  int line;
};

}  // namespace sparseoc
