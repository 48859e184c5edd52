#pragma once

#include <optional>
#include <vector>

#include "nnsdr/dataset.hpp"
#include "nnsdr/linalg.hpp"

namespace nnsdr::baselines {

/// Predictor preprocessing applied before kernel smoothing.
enum class Preprocess {
  none,
  scale,  ///< center, divide each column by its standard deviation
  whiten, ///< center, multiply by the inverse square root of the sample covariance
};

struct KernelConfig {
  /// c in h = c * n^(-1 / (4 + e)); the Gaussian-kernel normal reference value.
  double bandwidth_multiplier = 1.06;
  /// e in the bandwidth rate. When unset it is the dimension of the space the
  /// weights are computed in: p for the first OPG pass, then the current
  /// weight-space dimension, k for MAVE and prediction.
  std::optional<Index> exponent_dim;
  /// Relative ridge added to the slope block of each local system.
  double ridge = 1e-8;
  Preprocess preprocess = Preprocess::whiten;
  /// OPG passes after the first that recompute the kernel weights on the
  /// leading eigenvectors of the previous pass; 0 gives the single
  /// full-space pass.
  int opg_refinements = 10;
  /// Factor by which the weight-space dimension shrinks per refinement pass,
  /// from p down to k.
  double opg_taper = 0.75;

  void validate() const;
};

/// h = c * n^(-1 / (4 + e)) * scale, with e = exponent_dim or e_default.
double bandwidth(const KernelConfig &config, Index n, Index e_default, double scale = 1.0);

/// Normalized radial Gaussian weights K((z_i - z_anchor) / h), K(u) = exp(-|u|^2 / 2).
/// Throws DegenerateNeighborhood when the kernel mass underflows.
Vector kernel_weights(const Matrix &z, Index anchor, double h);
Vector kernel_weights_at(const Matrix &z, const Vector &point, double h);

/// Local intercepts a_j and slopes b_j (row j of b) at every sample point.
struct LocalLinearFit {
  Vector a;
  Matrix b;
  /// Anchors whose local system stayed singular; their slope is zero and
  /// their intercept the kernel-weighted mean.
  Index singular_anchors = 0;
};

/// For every anchor j, minimizes sum_i w_ij (y_i - a - b^T (z_i - z_j))^2
/// with weights computed in z.
LocalLinearFit local_linear(const DataSet &data, const Matrix &z, double h, double ridge);

/// As above, but with weights computed in weight_space (n x e) while the
/// slopes are fitted on regressors (n x d).
LocalLinearFit local_linear(const DataSet &data, const Matrix &weight_space,
                            const Matrix &regressors, double h, double ridge);

/// Affine map from predictors to the working coordinates of the smoothers,
/// z = (x - mean) * forward. Bases move between the two systems through
/// to_working / to_original.
struct Preprocessor {
  Vector mean;
  Matrix forward;
  Matrix backward; ///< inverse of forward

  static Preprocessor fit(const Matrix &x, Preprocess kind);
  Matrix apply(const Matrix &x) const;
  StiefelMatrix to_working(const StiefelMatrix &basis) const;
  StiefelMatrix to_original(const StiefelMatrix &basis) const;
};

/// Outer product of gradients: local linear slopes in the full predictor
/// space, averaged outer product, top-k eigenvectors. Refinement passes
/// repeat this with weights computed on V^T x, V the leading eigenvectors of
/// the previous pass, shrinking the number of columns of V towards k.
StiefelMatrix opg_fit(const DataSet &data, Index k, const KernelConfig &config);

struct MaveFit {
  StiefelMatrix b_hat;
  Index iterations_used = 0;
  /// T_n(V) at the initial value and after every accepted iteration.
  std::vector<double> objective_trace;
  bool converged = false;
  /// The last iteration increased the objective and was discarded.
  bool rejected_step = false;
};

/// Averaged weighted local-linear residual T_n(V) for a basis v in the given
/// coordinates.
double mave_objective(const DataSet &data, const Matrix &v, double h, double ridge);

/// Alternating minimization of T_n(V) over the Stiefel manifold, started at
/// init (given in original predictor coordinates).
MaveFit mave_fit(const DataSet &data, Index k, const KernelConfig &config,
                 const StiefelMatrix &init, int max_iters = 50, double tol = 1e-6);

/// Local linear smoother on the reduced predictors b_hat^T x.
struct ReducedSmoother {
  StiefelMatrix b_hat;
  Matrix z;       ///< reduced, scaled training predictors (n x k)
  Vector y;
  Vector z_scale; ///< per-coordinate divisor applied to b_hat^T x
  double h = 1.0;
  double ridge = 0.0;

  static ReducedSmoother build(const DataSet &train, const StiefelMatrix &b_hat,
                               const KernelConfig &config);
  /// Falls back to the kernel-weighted mean when the local system is singular
  /// or the neighborhood is numerically empty.
  double predict(const Vector &x_new) const;
};

double reduced_predict(const DataSet &data, const StiefelMatrix &b_hat, const Vector &x_new,
                       const KernelConfig &config);

} // namespace nnsdr::baselines
