#include "nnsdr/metrics.hpp"

#include <cmath>

#include "nnsdr/errors.hpp"

namespace nnsdr::metrics {

double subspace_error(const StiefelMatrix &a, const StiefelMatrix &b, SubspaceNorm norm) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("subspace_error: bases have different shapes");
  const Matrix diff = linalg::projection_matrix(a) - linalg::projection_matrix(b);
  if (norm == SubspaceNorm::spectral) {
    // diff is symmetric, so its spectral norm is the largest |eigenvalue|.
    const linalg::SymEigen eig = linalg::eigen_sym(diff);
    return std::min(1.0, eig.values.cwiseAbs().maxCoeff());
  }
  const double k = static_cast<double>(a.cols());
  return std::min(1.0, diff.norm() / std::sqrt(2.0 * k));
}

double mspe(const std::function<double(const Vector &)> &predict, const DataSet &test) {
  test.validate();
  double total = 0.0;
  for (Index i = 0; i < test.n(); ++i) {
    double yhat = 0.0;
    try {
      yhat = predict(test.x.row(i).transpose());
    } catch (const std::exception &e) {
      throw std::runtime_error("mspe: prediction failed at test row " + std::to_string(i) + ": " +
                               e.what());
    }
    if (!std::isfinite(yhat))
      throw std::runtime_error("mspe: non-finite prediction at test row " + std::to_string(i));
    const double r = test.y(i) - yhat;
    total += r * r;
  }
  return total / static_cast<double>(test.n());
}

} // namespace nnsdr::metrics
