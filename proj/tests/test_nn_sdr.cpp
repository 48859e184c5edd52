#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nnsdr/errors.hpp"
#include "nnsdr/metrics.hpp"
#include "nnsdr/nn_sdr.hpp"

using namespace nnsdr;

namespace {

Matrix gaussian(Index rows, Index cols, Rng &rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      m(i, j) = normal(rng);
  return m;
}

nn::NnSdrConfig small_config(Index k) {
  nn::NnSdrConfig cfg;
  cfg.k = k;
  cfg.hidden = {64};
  cfg.stage1.epochs = 40;
  cfg.stage2.epochs = 40;
  cfg.rng_seed = 3;
  return cfg;
}

} // namespace

TEST(OuterProduct, ConstantGradientsGiveRankOne) {
  Matrix g = Matrix::Zero(10, 4);
  g.col(0).setOnes();
  const auto est = nn::outer_product_estimate(g, 1);
  Matrix expected = Matrix::Zero(4, 4);
  expected(0, 0) = 1.0;
  EXPECT_LT((est.sigma_hat - expected).norm(), 1e-15);
  EXPECT_NEAR(std::abs(est.b_hat.value()(0, 0)), 1.0, 1e-14);
  EXPECT_NEAR(est.eigenvalues(0), 1.0, 1e-14);
  EXPECT_NEAR(est.eigenvalues.tail(3).norm(), 0.0, 1e-14);
}

TEST(OuterProduct, MatchesExplicitSum) {
  Rng rng(1);
  const Matrix g = gaussian(30, 5, rng);
  Matrix sum = Matrix::Zero(5, 5);
  for (Index i = 0; i < 30; ++i)
    sum += g.row(i).transpose() * g.row(i);
  const auto est = nn::outer_product_estimate(g, 2);
  EXPECT_LT((est.sigma_hat - sum / 30.0).norm(), 1e-12);
  EXPECT_THROW(nn::outer_product_estimate(g, 6), ContractViolation);
}

// On a grid of unit directions in R^3 the Rayleigh quotient of the averaged
// outer product of true gradients of g(b^T x) peaks next to b.
TEST(OuterProduct, GridMaximizerIsTrueDirection) {
  Rng rng(2);
  Vector b(3);
  b << 0.6, -0.48, 0.64;
  const Matrix x = gaussian(2000, 3, rng);
  Matrix grads(2000, 3);
  for (Index i = 0; i < 2000; ++i)
    grads.row(i) = (std::cos(b.dot(x.row(i).transpose())) * b).transpose();
  const auto est = nn::outer_product_estimate(grads, 1);
  double best = -1.0;
  Vector best_v;
  const int steps = 90;
  for (int a = 0; a <= steps; ++a)
    for (int c = 0; c < 2 * steps; ++c) {
      const double theta = std::numbers::pi * a / steps;
      const double phi = std::numbers::pi * c / steps;
      Vector v(3);
      v << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
      const double q = v.dot(est.sigma_hat * v);
      if (q > best) {
        best = q;
        best_v = v;
      }
    }
  Matrix bv(3, 1);
  bv.col(0) = b;
  Matrix gv(3, 1);
  gv.col(0) = best_v;
  EXPECT_LT(metrics::subspace_error(StiefelMatrix(bv), StiefelMatrix(gv, 1e-12)), 0.05);
  EXPECT_LT(metrics::subspace_error(StiefelMatrix(bv), est.b_hat), 1e-10);
}

TEST(Stage1, RecoversLinearSingleIndex) {
  Rng rng(4);
  DataSet d{gaussian(2000, 5, rng), Vector()};
  Vector b(5);
  b << 1, 2, 0, 0, -1;
  b.normalize();
  std::normal_distribution<double> normal;
  d.y = d.x * b;
  for (Index i = 0; i < d.n(); ++i)
    d.y(i) += 0.1 * normal(rng);
  nn::NnSdrConfig cfg = small_config(1);
  cfg.stage1.epochs = 20;
  const auto fit = nn::fit_stage1(d, cfg);
  Matrix bm(5, 1);
  bm.col(0) = b;
  EXPECT_LT(metrics::subspace_error(fit.b_hat, StiefelMatrix(bm)), 0.1);
  EXPECT_EQ(fit.loss_history.size(), 20u);
}

TEST(Stage1, NullModelHasNoDominantDirection) {
  Rng rng(5);
  DataSet d{gaussian(500, 4, rng), gaussian(500, 1, rng).col(0)};
  nn::NnSdrConfig cfg = small_config(1);
  cfg.stage1.epochs = 10;
  const auto fit = nn::fit_stage1(d, cfg);
  EXPECT_LT(fit.eigenvalues(0) / fit.eigenvalues(3), 20.0);
}

TEST(Refinement, StartingAtTruthStaysClose) {
  Rng rng(6);
  DataSet d{gaussian(1000, 6, rng), Vector(1000)};
  for (Index i = 0; i < d.n(); ++i)
    d.y(i) = d.x(i, 0) * d.x(i, 0) + d.x(i, 1);
  nn::NnSdrConfig cfg = small_config(2);
  auto stage1 = nn::fit_stage1(d, cfg);
  stage1.b_hat = StiefelMatrix::canonical(6, 2);
  const auto model = nn::fit_refinement(d, stage1, cfg);
  EXPECT_LT(metrics::subspace_error(model.b_hat, StiefelMatrix::canonical(6, 2)), 0.05);
}

TEST(Refinement, ReductionStaysOrthonormalAfterEveryUpdate) {
  Rng rng(7);
  DataSet d{gaussian(300, 5, rng), Vector(300)};
  for (Index i = 0; i < d.n(); ++i)
    d.y(i) = std::sin(d.x(i, 2)) + d.x(i, 4);
  nn::NnSdrConfig cfg = small_config(2);
  cfg.stage2.epochs = 10;
  const auto stage1 = nn::fit_stage1(d, cfg);
  double worst = 0.0;
  std::size_t seen = 0;
  nn::fit_refinement(d, stage1, cfg, [&](std::size_t, std::size_t, const mlp::MlpParams &p) {
    worst = std::max(worst, linalg::orthonormality_defect(p.layers[0].weights.transpose()));
    ++seen;
  });
  EXPECT_EQ(seen, 10u * 10u);
  EXPECT_LT(worst, 1e-8);
}

TEST(Predict, ZeroHiddenWeightsGiveOutputBias) {
  Rng rng(8);
  const mlp::LayerSpec specs[] = {{2, 8, mlp::Activation::relu, 0.4, true},
                                  {8, 1, mlp::Activation::identity, 0.0, true}};
  mlp::MlpParams net = mlp::glorot_init(specs, rng);
  net.layers[1].weights.setZero();
  net.layers[1].bias(0) = 1.75;
  nn::NnSdrModel model{StiefelMatrix::canonical(5, 2),
                       net,
                       nn::NnOpgFit{net, Matrix(), StiefelMatrix::canonical(5, 2), Vector(), {},
                                    Standardizer::identity(5)},
                       {},
                       Standardizer::identity(5),
                       StiefelMatrix::canonical(5, 2)};
  for (int rep = 0; rep < 5; ++rep)
    EXPECT_DOUBLE_EQ(nn::predict(model, gaussian(5, 1, rng).col(0)), 1.75);
  EXPECT_THROW(nn::predict(model, Vector::Zero(4)), ContractViolation);
}

TEST(Bottleneck, RotatingBasisAndFirstLayerLeavesOutputUnchanged) {
  Rng rng(9);
  const mlp::LayerSpec specs[] = {{3, 10, mlp::Activation::relu, 0.0, true},
                                  {10, 1, mlp::Activation::identity, 0.0, true}};
  const mlp::MlpParams wrapped = mlp::glorot_init(specs, rng);
  const StiefelMatrix v = linalg::polar_retract(gaussian(7, 3, rng));
  Eigen::HouseholderQR<Matrix> qr(gaussian(3, 3, rng));
  const Matrix q = qr.householderQ();
  mlp::MlpParams rotated = wrapped;
  rotated.layers[0].weights = wrapped.layers[0].weights * q;
  const auto a = nn::bottleneck_network(v, wrapped);
  const auto b = nn::bottleneck_network(StiefelMatrix(v.value() * q, 1e-10), rotated);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector x = gaussian(7, 1, rng).col(0);
    EXPECT_NEAR(mlp::forward(a, x)(0), mlp::forward(b, x)(0), 1e-12);
  }
}

TEST(Fit, StandardizedEstimateReportedOnOriginalScale) {
  Rng rng(10);
  DataSet d{gaussian(800, 4, rng), Vector(800)};
  d.x.col(1) *= 10.0;
  d.x.col(3) = d.x.col(3).array() + 5.0;
  for (Index i = 0; i < d.n(); ++i)
    d.y(i) = d.x(i, 0) + 0.1 * d.x(i, 1);
  nn::NnSdrConfig cfg = small_config(1);
  cfg.standardize = true;
  const auto model = nn::fit(d, cfg);
  Matrix b = Matrix::Zero(4, 1);
  b(0, 0) = 1.0;
  b(1, 0) = 0.1;
  b.normalize();
  EXPECT_LT(metrics::subspace_error(model.b_hat, StiefelMatrix(b)), 0.1);
  const Vector preds = nn::predict_rows(model, d.x);
  EXPECT_LT((preds - d.y).squaredNorm() / d.n(), 0.25 * (d.y.array() - d.y.mean()).square().mean());
}

TEST(Config, Validation) {
  nn::NnSdrConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(5), ContractViolation);
  cfg.k = 5;
  EXPECT_THROW(cfg.validate(5), ContractViolation);
  cfg.k = 2;
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(cfg.validate(5), ContractViolation);
  cfg.dropout_rate = 0.4;
  cfg.hidden.clear();
  EXPECT_THROW(cfg.validate(5), ContractViolation);
  cfg.hidden = {16};
  EXPECT_NO_THROW(cfg.validate(5));
}
