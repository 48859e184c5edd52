#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nnsdr {

/// Violated precondition: bad shapes, out-of-range configuration, invalid
/// Stiefel input and similar caller errors.
class ContractViolation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A matrix that should have full column rank does not (e.g. a reduction
/// layer that collapsed during training).
class DegenerateProjection : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Cholesky or linear-solve failure.
class FactorizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Kernel weights vanished numerically; a larger bandwidth is needed.
class DegenerateNeighborhood : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
public:
  DivergenceError(std::size_t epoch, std::size_t batch)
      : std::runtime_error("training diverged (non-finite parameters) at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch)),
        epoch_(epoch), batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

private:
  std::size_t epoch_;
  std::size_t batch_;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &what, std::size_t line, std::size_t column)
      : std::runtime_error(what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"),
        line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

} // namespace nnsdr
