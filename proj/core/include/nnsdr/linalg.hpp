#pragma once

#include <Eigen/Dense>

namespace nnsdr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Eigenpairs of a symmetric matrix. values are sorted descending and
/// column j of vectors belongs to values(j).
struct SymEigen {
  Vector values;
  Matrix vectors;
};

/// m = u * diag(s) * w^T with u (p x k), s descending, w (k x k) orthogonal.
struct ThinSvd {
  Matrix u;
  Vector s;
  Matrix w;
};

/// A p x k matrix with orthonormal columns.
///
/// Construction validates ||V^T V - I||_F against a tolerance, so every
/// StiefelMatrix in the program satisfies the invariant.
class StiefelMatrix {
public:
  static constexpr double kDefaultTolerance = 1e-8;

  explicit StiefelMatrix(Matrix value, double tolerance = kDefaultTolerance);

  /// Embeds the first k canonical basis vectors of R^p.
  static StiefelMatrix canonical(Index p, Index k);

  const Matrix &value() const noexcept { return value_; }
  Index rows() const noexcept { return value_.rows(); }
  Index cols() const noexcept { return value_.cols(); }

  /// ||V^T V - I_k||_F
  double orthonormality_defect() const;

private:
  Matrix value_;
};

double orthonormality_defect(const Matrix &v);

/// Symmetric eigendecomposition. Eigenvector signs are fixed so the entry of
/// largest magnitude is positive.
SymEigen eigen_sym(const Matrix &a);

ThinSvd thin_svd(const Matrix &m);

/// Closest orthonormal-column matrix to m in Frobenius norm (U W^T of the
/// thin SVD). Throws DegenerateProjection when m is numerically rank
/// deficient.
StiefelMatrix polar_retract(const Matrix &m);

/// Orthogonal projector V V^T onto span(V).
Matrix projection_matrix(const StiefelMatrix &v);

/// Lower-triangular L with L L^T = a. Throws FactorizationError when a is
/// not positive definite.
Matrix cholesky(const Matrix &a);

/// Top-k eigenvectors of a symmetric matrix as a Stiefel matrix.
StiefelMatrix top_eigenvectors(const SymEigen &eig, Index k);

} // namespace linalg

using linalg::StiefelMatrix;

} // namespace nnsdr
