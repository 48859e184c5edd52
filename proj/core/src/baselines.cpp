#include "nnsdr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nnsdr/errors.hpp"

namespace nnsdr::baselines {

void KernelConfig::validate() const {
  if (!(bandwidth_multiplier > 0.0))
    throw ContractViolation("KernelConfig: bandwidth multiplier must be positive");
  if (exponent_dim && *exponent_dim < 0)
    throw ContractViolation("KernelConfig: exponent dimension must be >= 0");
  if (!(ridge >= 0.0))
    throw ContractViolation("KernelConfig: ridge must be >= 0");
  if (opg_refinements < 0)
    throw ContractViolation("KernelConfig: opg_refinements must be >= 0");
  if (!(opg_taper > 0.0 && opg_taper <= 1.0))
    throw ContractViolation("KernelConfig: opg_taper must lie in (0, 1]");
}

double bandwidth(const KernelConfig &config, Index n, Index e_default, double scale) {
  config.validate();
  const double e = static_cast<double>(config.exponent_dim.value_or(e_default));
  const double h =
      config.bandwidth_multiplier * std::pow(static_cast<double>(n), -1.0 / (4.0 + e)) * scale;
  if (!(h > 0.0) || !std::isfinite(h))
    throw ContractViolation("bandwidth: evaluated bandwidth is not positive");
  return h;
}

namespace {

Vector squared_distances(const Matrix &z, const Eigen::Ref<const Eigen::RowVectorXd> &point) {
  return (z.rowwise() - point).rowwise().squaredNorm();
}

Vector normalized_kernel(const Vector &sq_dist, double h) {
  if (!(h > 0.0))
    throw ContractViolation("kernel_weights: bandwidth must be positive");
  const double inv = 1.0 / (2.0 * h * h);
  Vector w = (-sq_dist.array() * inv).exp().matrix();
  const double mass = w.sum();
  if (!(mass > std::numeric_limits<double>::min()) || !std::isfinite(mass))
    throw DegenerateNeighborhood("kernel weights vanish numerically (bandwidth " +
                                 std::to_string(h) + "); increase the bandwidth");
  return w / mass;
}

struct LocalSolve {
  double a = 0.0;
  Vector b;
  bool singular = false;
  /// sum_i w_i (y_i - a - b^T zc_i)^2
  double weighted_rss = 0.0;
};

// Weighted least squares of y on [1, zc] where zc are predictors centered at
// the anchor.
LocalSolve solve_local(const Vector &y, const Matrix &zc, const Vector &w, double ridge) {
  const Index d = zc.cols();
  Matrix m(d + 1, d + 1);
  Vector rhs(d + 1);
  const Matrix wz = w.asDiagonal() * zc;
  m(0, 0) = w.sum();
  m.block(0, 1, 1, d) = wz.colwise().sum();
  m.block(1, 0, d, 1) = m.block(0, 1, 1, d).transpose();
  m.bottomRightCorner(d, d).noalias() = zc.transpose() * wz;
  rhs(0) = w.dot(y);
  rhs.tail(d).noalias() = wz.transpose() * y;

  if (ridge > 0.0 && d > 0) {
    const double tr = m.bottomRightCorner(d, d).trace();
    const double lambda = ridge * (tr > 0.0 ? tr / static_cast<double>(d) : 1.0);
    m.bottomRightCorner(d, d).diagonal().array() += lambda;
  }

  LocalSolve out;
  Eigen::LDLT<Matrix> ldlt(m);
  Vector sol;
  if (ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-13) {
    sol = ldlt.solve(rhs);
    out.singular = !sol.allFinite();
  } else {
    out.singular = true;
  }
  if (out.singular) {
    out.a = rhs(0) / m(0, 0);
    out.b = Vector::Zero(d);
  } else {
    out.a = sol(0);
    out.b = sol.tail(d);
  }
  const Vector r = y - zc * out.b - Vector::Constant(y.size(), out.a);
  out.weighted_rss = w.dot(r.cwiseAbs2());
  return out;
}

double column_scale(const Matrix &x) {
  if (x.rows() < 2)
    return 1.0;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double var = (x.rowwise() - mean).colwise().squaredNorm().mean() /
                     static_cast<double>(x.rows() - 1);
  return var > 0.0 ? std::sqrt(var) : 1.0;
}

// Weights, local fits and T_n(V) for one basis.
struct MaveState {
  Matrix weights; // column j holds the weights of anchor j
  Vector a;
  Matrix b; // n x k
  double objective = 0.0;
};

MaveState evaluate_mave(const DataSet &work, const Matrix &v, double h, double ridge) {
  const Index n = work.n();
  const Matrix zr = work.x * v;
  MaveState s;
  s.weights.resize(n, n);
  s.a.resize(n);
  s.b.resize(n, v.cols());
  double total = 0.0;
  for (Index j = 0; j < n; ++j) {
    s.weights.col(j) = normalized_kernel(squared_distances(zr, zr.row(j)), h);
    const Matrix zc = zr.rowwise() - zr.row(j);
    const LocalSolve fit = solve_local(work.y, zc, s.weights.col(j), ridge);
    s.a(j) = fit.a;
    s.b.row(j) = fit.b.transpose();
    total += fit.weighted_rss;
  }
  s.objective = total / static_cast<double>(n);
  return s;
}

// Minimizes sum_j sum_i w_ij (y_i - a_j - b_j^T V^T (x_i - x_j))^2 over
// unconstrained V with weights and local fits held fixed. With vec(V)
// stacking columns, the residual is linear in vec(V) with regressor
// b_j (kron) (x_i - x_j), so the normal matrix is sum_j (b_j b_j^T) (kron) S_j.
Matrix mave_direction_step(const DataSet &work, const MaveState &s) {
  const Index n = work.n();
  const Index p = work.p();
  const Index k = s.b.cols();
  Matrix normal = Matrix::Zero(p * k, p * k);
  Vector rhs = Vector::Zero(p * k);
  Matrix scatter(p, p);
  for (Index j = 0; j < n; ++j) {
    const Vector w = s.weights.col(j);
    const Matrix xc = work.x.rowwise() - work.x.row(j);
    const Matrix wx = w.asDiagonal() * xc;
    scatter.noalias() = xc.transpose() * wx;
    const Vector t = wx.transpose() * (work.y.array() - s.a(j)).matrix();
    for (Index c = 0; c < k; ++c) {
      const double bc = s.b(j, c);
      rhs.segment(c * p, p) += bc * t;
      for (Index d = 0; d <= c; ++d)
        normal.block(c * p, d * p, p, p) += (bc * s.b(j, d)) * scatter;
    }
  }
  for (Index c = 0; c < k; ++c)
    for (Index d = 0; d < c; ++d)
      normal.block(d * p, c * p, p, p) = normal.block(c * p, d * p, p, p).transpose();

  const double tr = normal.trace();
  normal.diagonal().array() += 1e-12 * (tr > 0.0 ? tr / static_cast<double>(p * k) : 1.0);
  Eigen::LDLT<Matrix> ldlt(normal);
  if (ldlt.info() != Eigen::Success)
    throw FactorizationError("mave: direction step normal equations could not be factored");
  const Vector vec = ldlt.solve(rhs);
  if (!vec.allFinite())
    throw FactorizationError("mave: direction step produced non-finite values");
  return Eigen::Map<const Matrix>(vec.data(), p, k);
}

} // namespace

Vector kernel_weights(const Matrix &z, Index anchor, double h) {
  if (anchor < 0 || anchor >= z.rows())
    throw ContractViolation("kernel_weights: anchor index out of range");
  return normalized_kernel(squared_distances(z, z.row(anchor)), h);
}

Vector kernel_weights_at(const Matrix &z, const Vector &point, double h) {
  if (point.size() != z.cols())
    throw ContractViolation("kernel_weights: point dimension mismatch");
  return normalized_kernel(squared_distances(z, point.transpose()), h);
}

LocalLinearFit local_linear(const DataSet &data, const Matrix &z, double h, double ridge) {
  return local_linear(data, z, z, h, ridge);
}

LocalLinearFit local_linear(const DataSet &data, const Matrix &weight_space,
                            const Matrix &regressors, double h, double ridge) {
  data.validate();
  if (weight_space.rows() != data.n() || regressors.rows() != data.n())
    throw ContractViolation("local_linear: z must have one row per observation");
  if (data.n() <= regressors.cols() + 1)
    throw ContractViolation("local_linear: need n > d + 1");
  LocalLinearFit fit;
  fit.a.resize(data.n());
  fit.b.resize(data.n(), regressors.cols());
  for (Index j = 0; j < data.n(); ++j) {
    const Vector w = kernel_weights(weight_space, j, h);
    const Matrix zc = regressors.rowwise() - regressors.row(j);
    const LocalSolve s = solve_local(data.y, zc, w, ridge);
    fit.a(j) = s.a;
    fit.b.row(j) = s.b.transpose();
    if (s.singular)
      ++fit.singular_anchors;
  }
  return fit;
}

Preprocessor Preprocessor::fit(const Matrix &x, Preprocess kind) {
  const Index p = x.cols();
  Preprocessor pre;
  pre.mean = x.colwise().mean().transpose();
  if (kind == Preprocess::none) {
    pre.mean.setZero();
    pre.forward = Matrix::Identity(p, p);
    pre.backward = Matrix::Identity(p, p);
    return pre;
  }
  if (x.rows() < 2)
    throw ContractViolation("Preprocessor: need at least two observations");
  const Matrix centered = x.rowwise() - pre.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  if (kind == Preprocess::scale) {
    Vector sd = cov.diagonal().cwiseSqrt();
    for (Index j = 0; j < p; ++j)
      if (!(sd(j) > 0.0))
        sd(j) = 1.0;
    pre.forward = sd.cwiseInverse().asDiagonal();
    pre.backward = sd.asDiagonal();
    return pre;
  }
  const linalg::SymEigen eig = linalg::eigen_sym(0.5 * (cov + cov.transpose()));
  const double floor = std::max(eig.values(0), 1e-300) * 1e-14;
  const Vector lambda = eig.values.cwiseMax(floor);
  pre.forward = eig.vectors * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
                eig.vectors.transpose();
  pre.backward = eig.vectors * lambda.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
  return pre;
}

Matrix Preprocessor::apply(const Matrix &x) const {
  return (x.rowwise() - mean.transpose()) * forward;
}

StiefelMatrix Preprocessor::to_working(const StiefelMatrix &basis) const {
  return linalg::polar_retract(backward * basis.value());
}

StiefelMatrix Preprocessor::to_original(const StiefelMatrix &basis) const {
  return linalg::polar_retract(forward * basis.value());
}

StiefelMatrix opg_fit(const DataSet &data, Index k, const KernelConfig &config) {
  data.validate();
  config.validate();
  if (k < 1 || k >= data.p())
    throw ContractViolation("opg_fit: need 1 <= k < p");
  if (data.n() <= data.p() + 1)
    throw ContractViolation("opg_fit: need n > p + 1");
  const Preprocessor pre = Preprocessor::fit(data.x, config.preprocess);
  const DataSet work{pre.apply(data.x), data.y};
  const double scale = config.preprocess == Preprocess::none ? column_scale(data.x) : 1.0;
  auto gradient_outer_product = [&](const LocalLinearFit &fit) {
    Matrix sigma = (fit.b.transpose() * fit.b) / static_cast<double>(data.n());
    return linalg::eigen_sym(0.5 * (sigma + sigma.transpose()));
  };

  const Index p = data.p();
  linalg::SymEigen eig = gradient_outer_product(
      local_linear(work, work.x, bandwidth(config, data.n(), p, scale), config.ridge));
  Index dim = p;
  for (int pass = 0; pass < config.opg_refinements; ++pass) {
    const Index next_dim =
        std::max(k, static_cast<Index>(std::floor(config.opg_taper * static_cast<double>(dim))));
    const StiefelMatrix previous = linalg::top_eigenvectors(eig, k);
    const StiefelMatrix v = linalg::top_eigenvectors(eig, next_dim);
    const double h = bandwidth(config, data.n(), next_dim, scale);
    eig = gradient_outer_product(local_linear(work, work.x * v.value(), work.x, h, config.ridge));
    const double change =
        (linalg::projection_matrix(linalg::top_eigenvectors(eig, k)) -
         linalg::projection_matrix(previous))
            .norm();
    if (dim == k && change < 1e-8)
      break;
    dim = next_dim;
  }
  return pre.to_original(linalg::top_eigenvectors(eig, k));
}

double mave_objective(const DataSet &data, const Matrix &v, double h, double ridge) {
  data.validate();
  if (v.rows() != data.p())
    throw ContractViolation("mave_objective: basis has wrong row count");
  return evaluate_mave(data, v, h, ridge).objective;
}

MaveFit mave_fit(const DataSet &data, Index k, const KernelConfig &config,
                 const StiefelMatrix &init, int max_iters, double tol) {
  data.validate();
  config.validate();
  if (k < 1 || k >= data.p())
    throw ContractViolation("mave_fit: need 1 <= k < p");
  if (init.rows() != data.p() || init.cols() != k)
    throw ContractViolation("mave_fit: initial basis must be p x k");
  if (data.n() <= k + 1)
    throw ContractViolation("mave_fit: need n > k + 1");
  if (max_iters < 1 || !(tol >= 0.0))
    throw ContractViolation("mave_fit: need max_iters >= 1 and tol >= 0");

  const Preprocessor pre = Preprocessor::fit(data.x, config.preprocess);
  const DataSet work{pre.apply(data.x), data.y};
  const double scale = config.preprocess == Preprocess::none ? column_scale(data.x) : 1.0;
  const double h = bandwidth(config, data.n(), k, scale);

  const double y_mean = data.y.mean();
  const double y_var = (data.y.array() - y_mean).square().mean();
  const double floor = 1e-12 * std::max(y_var, 1e-300);

  StiefelMatrix v = pre.to_working(init);
  MaveState state = evaluate_mave(work, v.value(), h, config.ridge);
  MaveFit result{pre.to_original(v), 0, {state.objective}, false, false};

  for (int it = 1; it <= max_iters; ++it) {
    result.iterations_used = it;
    std::optional<StiefelMatrix> candidate;
    try {
      candidate.emplace(linalg::polar_retract(mave_direction_step(work, state)));
    } catch (const DegenerateProjection &) {
      result.rejected_step = true;
      break;
    } catch (const FactorizationError &) {
      result.rejected_step = true;
      break;
    }
    MaveState next = evaluate_mave(work, candidate->value(), h, config.ridge);
    const double slack = 1e-10 * std::max(state.objective, floor);
    if (!(next.objective <= state.objective + slack)) {
      result.rejected_step = true;
      break;
    }
    const double decrease = (state.objective - next.objective) / std::max(state.objective, floor);
    v = std::move(*candidate);
    state = std::move(next);
    result.objective_trace.push_back(state.objective);
    if (decrease < tol) {
      result.converged = true;
      break;
    }
  }
  result.b_hat = pre.to_original(v);
  return result;
}

ReducedSmoother ReducedSmoother::build(const DataSet &train, const StiefelMatrix &b_hat,
                                       const KernelConfig &config) {
  train.validate();
  config.validate();
  if (b_hat.rows() != train.p())
    throw ContractViolation("reduced smoother: basis dimension does not match predictors");
  const Index k = b_hat.cols();
  Matrix z = train.x * b_hat.value();
  Vector z_scale = Vector::Ones(k);
  double spread = 1.0;
  if (config.preprocess != Preprocess::none && train.n() > 1) {
    for (Index c = 0; c < k; ++c) {
      const double mean = z.col(c).mean();
      const double sd = std::sqrt((z.col(c).array() - mean).square().sum() /
                                  static_cast<double>(train.n() - 1));
      z_scale(c) = sd > 0.0 ? sd : 1.0;
    }
    z = z.array().rowwise() / z_scale.transpose().array();
  } else {
    spread = column_scale(z);
  }
  KernelConfig reduced = config;
  reduced.exponent_dim = k;
  return ReducedSmoother{b_hat,  std::move(z), train.y, std::move(z_scale),
                         bandwidth(reduced, train.n(), k, spread), config.ridge};
}

double ReducedSmoother::predict(const Vector &x_new) const {
  if (x_new.size() != b_hat.rows())
    throw ContractViolation("reduced_predict: predictor dimension mismatch");
  const Vector point =
      ((b_hat.value().transpose() * x_new).array() / z_scale.array()).matrix();
  const Vector sq = squared_distances(z, point.transpose());
  Vector w;
  try {
    w = normalized_kernel(sq, h);
  } catch (const DegenerateNeighborhood &) {
    // Shift distances so the nearest sample has unit kernel mass.
    return normalized_kernel((sq.array() - sq.minCoeff()).matrix(), h).dot(y);
  }
  const Matrix zc = z.rowwise() - point.transpose();
  const LocalSolve s = solve_local(y, zc, w, ridge);
  return s.singular ? w.dot(y) : s.a;
}

double reduced_predict(const DataSet &data, const StiefelMatrix &b_hat, const Vector &x_new,
                       const KernelConfig &config) {
  return ReducedSmoother::build(data, b_hat, config).predict(x_new);
}

} // namespace nnsdr::baselines
