#include "nnsdr/linalg.hpp"

#include <cmath>
#include <string>

#include "nnsdr/errors.hpp"

namespace nnsdr::linalg {

namespace {

void require_finite(const Matrix &m, const char *what) {
  if (!m.allFinite())
    throw ContractViolation(std::string(what) + ": matrix has non-finite entries");
}

void require_symmetric(const Matrix &a, const char *what) {
  if (a.rows() != a.cols())
    throw ContractViolation(std::string(what) + ": matrix is not square");
  require_finite(a, what);
  const double scale = std::max(1.0, a.norm());
  if ((a - a.transpose()).norm() > 1e-10 * scale)
    throw ContractViolation(std::string(what) + ": matrix is not symmetric");
}

} // namespace

double orthonormality_defect(const Matrix &v) {
  const Matrix gram = v.transpose() * v;
  return (gram - Matrix::Identity(v.cols(), v.cols())).norm();
}

StiefelMatrix::StiefelMatrix(Matrix value, double tolerance) : value_(std::move(value)) {
  if (value_.rows() < 1 || value_.cols() < 1 || value_.cols() > value_.rows())
    throw ContractViolation("StiefelMatrix: need p >= k >= 1, got " +
                            std::to_string(value_.rows()) + "x" +
                            std::to_string(value_.cols()));
  require_finite(value_, "StiefelMatrix");
  const double defect = linalg::orthonormality_defect(value_);
  if (defect > tolerance)
    throw ContractViolation("StiefelMatrix: columns not orthonormal (defect " +
                            std::to_string(defect) + ")");
}

StiefelMatrix StiefelMatrix::canonical(Index p, Index k) {
  return StiefelMatrix(Matrix::Identity(p, k));
}

double StiefelMatrix::orthonormality_defect() const {
  return linalg::orthonormality_defect(value_);
}

SymEigen eigen_sym(const Matrix &a) {
  require_symmetric(a, "eigen_sym");
  const Index p = a.rows();
  // Symmetrize exactly so the solver sees a bitwise symmetric input.
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw FactorizationError("eigen_sym: eigensolver did not converge");

  SymEigen out;
  out.values.resize(p);
  out.vectors.resize(p, p);
  for (Index j = 0; j < p; ++j) {
    // Eigen sorts ascending.
    const Index src = p - 1 - j;
    out.values(j) = solver.eigenvalues()(src);
    Vector v = solver.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0)
      v = -v;
    out.vectors.col(j) = v;
  }
  return out;
}

ThinSvd thin_svd(const Matrix &m) {
  if (m.rows() < m.cols() || m.cols() < 1)
    throw ContractViolation("thin_svd: need rows >= cols >= 1");
  require_finite(m, "thin_svd");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return ThinSvd{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

StiefelMatrix polar_retract(const Matrix &m) {
  const ThinSvd svd = thin_svd(m);
  const double smax = svd.s(0);
  const double smin = svd.s(svd.s.size() - 1);
  if (!(smax > 0.0) || smin <= 1e-12 * smax)
    throw DegenerateProjection("polar_retract: matrix is rank deficient (singular values " +
                               std::to_string(smax) + " .. " + std::to_string(smin) + ")");
  return StiefelMatrix(svd.u * svd.w.transpose());
}

Matrix projection_matrix(const StiefelMatrix &v) {
  return v.value() * v.value().transpose();
}

Matrix cholesky(const Matrix &a) {
  require_symmetric(a, "cholesky");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("cholesky: matrix is not positive definite");
  return llt.matrixL();
}

StiefelMatrix top_eigenvectors(const SymEigen &eig, Index k) {
  if (k < 1 || k > eig.vectors.cols())
    throw ContractViolation("top_eigenvectors: k out of range");
  return StiefelMatrix(eig.vectors.leftCols(k));
}

} // namespace nnsdr::linalg
