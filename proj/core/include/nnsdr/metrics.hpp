#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "nnsdr/dataset.hpp"
#include "nnsdr/linalg.hpp"

namespace nnsdr::metrics {

enum class SubspaceNorm {
  /// ||P_A - P_B||_F / sqrt(2k); equals 1 for orthogonal subspaces.
  frobenius,
  /// ||P_A - P_B||_2, the sine of the largest principal angle.
  spectral,
};

/// Distance between span(a) and span(b) in [0, 1]. Symmetric and invariant
/// to right-orthogonal rotation of either basis.
double subspace_error(const StiefelMatrix &a, const StiefelMatrix &b,
                      SubspaceNorm norm = SubspaceNorm::frobenius);

/// (1/n) sum (y_i - predict(x_i))^2 over the test set. A prediction that
/// throws or is non-finite is reported with its row index.
double mspe(const std::function<double(const Vector &)> &predict, const DataSet &test);

/// Observed statistics for one fit.
struct EvalReport {
  double acc_err = 0.0;
  double mspe = 0.0;
  double runtime_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string model;
  std::string method;
};

} // namespace nnsdr::metrics
