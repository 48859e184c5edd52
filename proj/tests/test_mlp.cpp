#include <gtest/gtest.h>

#include <cmath>

#include "nnsdr/errors.hpp"
#include "nnsdr/mlp.hpp"

using namespace nnsdr;
using namespace nnsdr::mlp;

namespace {

MlpParams random_net(const std::vector<Index> &widths, Rng &rng, double dropout = 0.0) {
  std::vector<LayerSpec> specs;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = l + 2 == widths.size();
    specs.push_back({widths[l], widths[l + 1], last ? Activation::identity : Activation::relu,
                     last ? 0.0 : dropout, true});
  }
  MlpParams net = glorot_init(specs, rng);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto &layer : net.layers)
    for (Index i = 0; i < layer.bias.size(); ++i)
      layer.bias(i) = normal(rng);
  return net;
}

Vector random_vector(Index n, Rng &rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v(i) = normal(rng);
  return v;
}

// Straight composition of phi(W h + b) layer by layer.
double compose_by_hand(const MlpParams &net, const Vector &x) {
  Vector h = x;
  for (const auto &layer : net.layers) {
    Vector z(layer.weights.rows());
    for (Index i = 0; i < z.size(); ++i) {
      double acc = layer.spec.has_bias ? layer.bias(i) : 0.0;
      for (Index j = 0; j < h.size(); ++j)
        acc += layer.weights(i, j) * h(j);
      z(i) = layer.spec.activation == Activation::relu ? std::max(0.0, acc) : acc;
    }
    h = z;
  }
  return h(0);
}

double min_abs_preactivation(const MlpParams &net, const Vector &x) {
  const ForwardCache cache = forward_batch(net, x, nullptr);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    if (net.layers[l].spec.activation == Activation::relu)
      m = std::min(m, cache.preactivation[l].cwiseAbs().minCoeff());
  return m;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

} // namespace

TEST(Forward, IdentityNetwork) {
  MlpParams net;
  net.layers.push_back({{2, 2, Activation::identity, 0.0, true}, Matrix::Identity(2, 2), Vector::Zero(2)});
  Vector x(2);
  x << 1, 2;
  EXPECT_TRUE(forward(net, x).isApprox(x));
}

TEST(Forward, ReluHandEvaluation) {
  MlpParams net;
  Matrix w(1, 2);
  w << 1, -1;
  Vector b(1);
  b << -3;
  net.layers.push_back({{2, 1, Activation::relu, 0.0, true}, w, b});
  Vector x(2);
  x << 1, 2;
  EXPECT_DOUBLE_EQ(forward(net, x)(0), 0.0);
}

TEST(Forward, MatchesDirectComposition) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const MlpParams net = random_net({4, 7, 5, 1}, rng);
    const Vector x = random_vector(4, rng);
    EXPECT_NEAR(forward(net, x)(0), compose_by_hand(net, x), 1e-12);
  }
}

TEST(Forward, DimensionMismatchThrows) {
  Rng rng(2);
  const MlpParams net = random_net({3, 4, 1}, rng);
  EXPECT_THROW(forward(net, Vector::Zero(2)), ContractViolation);
}

TEST(Forward, DropoutExpectationMatchesEval) {
  Rng rng(3);
  const MlpParams net = random_net({3, 16, 1}, rng, 0.4);
  const Vector x = random_vector(3, rng);
  const double eval = forward(net, x)(0);
  const int draws = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = forward(net, x, &rng)(0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum_sq / draws - mean * mean) / draws);
  EXPECT_LT(std::abs(mean - eval), 3.0 * se);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  Rng rng(4);
  const MlpParams net = random_net({3, 5, 1}, rng);
  ForwardCache cache;
  forward(net, random_vector(3, rng), nullptr, cache);
  const MlpParams g = backward(net, cache, Matrix::Zero(1, 1));
  for (const auto &layer : g.layers) {
    EXPECT_EQ(layer.weights.norm(), 0.0);
    EXPECT_EQ(layer.bias.norm(), 0.0);
  }
}

TEST(Backward, LinearSquaredLossClosedForm) {
  MlpParams net;
  Matrix w(1, 2);
  w << 0.5, -1.5;
  net.layers.push_back({{2, 1, Activation::identity, 0.0, false}, w, Vector()});
  Vector x(2);
  x << 2.0, 1.0;
  const double y = 3.0;
  ForwardCache cache;
  const double yhat = forward(net, x, nullptr, cache)(0);
  const MlpParams g = backward(net, cache, Matrix::Constant(1, 1, -2.0 * (y - yhat)));
  const Matrix expected = -2.0 * (y - yhat) * x.transpose();
  EXPECT_LT((g.layers[0].weights - expected).norm(), 1e-14);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(5);
  const double h = 1e-6;
  int checked = 0;
  while (checked < 30) {
    MlpParams net = random_net({3, 6, 4, 1}, rng);
    const Vector x = random_vector(3, rng);
    if (min_abs_preactivation(net, x) < 1e-4)
      continue;
    ++checked;
    ForwardCache cache;
    forward(net, x, nullptr, cache);
    const MlpParams g = backward(net, cache, Matrix::Ones(1, 1));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (Index i = 0; i < net.layers[l].weights.size(); ++i) {
        double &w = net.layers[l].weights.data()[i];
        const double saved = w;
        w = saved + h;
        const double up = forward(net, x)(0);
        w = saved - h;
        const double down = forward(net, x)(0);
        w = saved;
        EXPECT_LT(relative_error(g.layers[l].weights.data()[i], (up - down) / (2 * h)), 1e-5);
      }
      for (Index i = 0; i < net.layers[l].bias.size(); ++i) {
        double &b = net.layers[l].bias(i);
        const double saved = b;
        b = saved + h;
        const double up = forward(net, x)(0);
        b = saved - h;
        const double down = forward(net, x)(0);
        b = saved;
        EXPECT_LT(relative_error(g.layers[l].bias(i), (up - down) / (2 * h)), 1e-5);
      }
    }
  }
}

TEST(Backward, HonorsDropoutMasks) {
  Rng rng(6);
  const MlpParams net = random_net({3, 8, 1}, rng, 0.5);
  const Vector x = random_vector(3, rng);
  ForwardCache cache;
  forward(net, x, &rng, cache);
  const MlpParams g = backward(net, cache, Matrix::Ones(1, 1));
  for (Index u = 0; u < 8; ++u)
    if (cache.masks[0](u, 0) == 0.0)
      EXPECT_EQ(g.layers[0].weights.row(u).norm(), 0.0);
}

TEST(Backward, StaleCacheThrows) {
  Rng rng(7);
  const MlpParams a = random_net({3, 4, 1}, rng);
  const MlpParams b = random_net({3, 5, 1}, rng);
  ForwardCache cache;
  forward(a, random_vector(3, rng), nullptr, cache);
  EXPECT_THROW(backward(b, cache, Matrix::Ones(1, 1)), ContractViolation);
}

TEST(GradInput, LinearNetReturnsWeights) {
  MlpParams net;
  Matrix w(1, 3);
  w << 1.0, -2.0, 0.5;
  net.layers.push_back({{3, 1, Activation::identity, 0.0, true}, w, Vector::Zero(1)});
  Rng rng(8);
  for (int rep = 0; rep < 5; ++rep)
    EXPECT_TRUE(grad_input(net, random_vector(3, rng)).isApprox(w.transpose()));
}

TEST(GradInput, ReluKinkSides) {
  MlpParams net;
  net.layers.push_back({{1, 1, Activation::relu, 0.0, true}, Matrix::Ones(1, 1), Vector::Zero(1)});
  EXPECT_DOUBLE_EQ(grad_input(net, Vector::Constant(1, 2.0))(0), 1.0);
  EXPECT_DOUBLE_EQ(grad_input(net, Vector::Constant(1, -2.0))(0), 0.0);
  EXPECT_DOUBLE_EQ(grad_input(net, Vector::Constant(1, 0.0))(0), 0.0);
}

TEST(GradInput, MatchesFiniteDifferences) {
  Rng rng(9);
  const double h = 1e-6;
  int checked = 0;
  while (checked < 50) {
    const MlpParams net = random_net({5, 8, 1}, rng);
    Vector x = random_vector(5, rng);
    if (min_abs_preactivation(net, x) < 1e-4)
      continue;
    ++checked;
    const Vector g = grad_input(net, x);
    for (Index j = 0; j < 5; ++j) {
      const double saved = x(j);
      x(j) = saved + h;
      const double up = forward(net, x)(0);
      x(j) = saved - h;
      const double down = forward(net, x)(0);
      x(j) = saved;
      EXPECT_LT(relative_error(g(j), (up - down) / (2 * h)), 1e-5);
    }
    const Matrix rows = grad_input_rows(net, x.transpose());
    EXPECT_LT((rows.row(0).transpose() - g).norm(), 1e-14);
  }
}

TEST(RmsProp, ZeroGradientDecaysStateOnly) {
  Rng rng(10);
  MlpParams net = random_net({2, 3, 1}, rng);
  const MlpParams before = net;
  RmsPropState state = RmsPropState::zeros_for(net);
  for (auto &layer : state.mean_square.layers)
    layer.weights.setConstant(1.0);
  rmsprop_step(net, zeros_like(net), state, TrainConfig{});
  EXPECT_EQ((net.layers[0].weights - before.layers[0].weights).norm(), 0.0);
  EXPECT_NEAR(state.mean_square.layers[0].weights(0, 0), 0.9, 1e-15);
}

TEST(RmsProp, ScalarHandArithmetic) {
  MlpParams net;
  net.layers.push_back({{1, 1, Activation::identity, 0.0, false}, Matrix::Zero(1, 1), Vector()});
  MlpParams g = zeros_like(net);
  g.layers[0].weights(0, 0) = 1.0;
  RmsPropState state = RmsPropState::zeros_for(net);
  rmsprop_step(net, g, state, TrainConfig{});
  EXPECT_NEAR(state.mean_square.layers[0].weights(0, 0), 0.1, 1e-15);
  EXPECT_NEAR(net.layers[0].weights(0, 0), -0.001 / std::sqrt(0.1 + 1e-8), 1e-15);
}

TEST(RmsProp, SecondIdenticalStepIsSmaller) {
  MlpParams net;
  net.layers.push_back({{1, 1, Activation::identity, 0.0, false}, Matrix::Zero(1, 1), Vector()});
  MlpParams g = zeros_like(net);
  g.layers[0].weights(0, 0) = 0.7;
  RmsPropState state = RmsPropState::zeros_for(net);
  rmsprop_step(net, g, state, TrainConfig{});
  const double first = std::abs(net.layers[0].weights(0, 0));
  const double bound = 0.001 * 0.7 / std::sqrt(0.1 * 0.49);
  rmsprop_step(net, g, state, TrainConfig{});
  const double second = std::abs(net.layers[0].weights(0, 0)) - first;
  EXPECT_LT(second, first);
  EXPECT_LE(first, bound + 1e-12);
}

namespace {

DataSet linear_data(Index n, double slope, std::uint64_t seed) {
  Rng rng(seed);
  DataSet d;
  d.x = Matrix(n, 1);
  d.y = Vector(n);
  for (Index i = 0; i < n; ++i) {
    d.x(i, 0) = 2.0 * uniform01(rng) - 1.0;
    d.y(i) = slope * d.x(i, 0);
  }
  return d;
}

MlpParams linear_net(Index p) {
  MlpParams net;
  net.layers.push_back({{p, 1, Activation::identity, 0.0, true}, Matrix::Zero(1, p), Vector::Zero(1)});
  return net;
}

} // namespace

TEST(Train, ZeroResponseIsFixedPoint) {
  DataSet d = linear_data(50, 0.0, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  const TrainResult r = train(d, linear_net(1), cfg);
  EXPECT_EQ(r.params.layers[0].weights.norm(), 0.0);
  EXPECT_EQ(r.params.layers[0].bias.norm(), 0.0);
}

TEST(Train, RecoversLinearSlope) {
  const DataSet d = linear_data(100, 2.0, 2);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  const TrainResult r = train(d, linear_net(1), cfg);
  // Least-squares slope of y on x, the oracle for the trained weight.
  const double ols = d.x.col(0).dot(d.y) / d.x.col(0).squaredNorm();
  EXPECT_NEAR(ols, 2.0, 1e-12);
  EXPECT_NEAR(r.params.layers[0].weights(0, 0), ols, 0.05);
}

TEST(Train, LossTrendNonIncreasing) {
  const DataSet d = linear_data(200, 1.5, 3);
  TrainConfig cfg;
  cfg.epochs = 200;
  const TrainResult r = train(d, linear_net(1), cfg);
  for (std::size_t e = 10; e < r.epoch_loss.size(); e += 10)
    EXPECT_LE(r.epoch_loss[e], r.epoch_loss[e - 10] * 1.05);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(Train, UpdateCountIsEpochsTimesCeilBatches) {
  const DataSet d = linear_data(70, 1.0, 4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  std::size_t observed = 0;
  const TrainResult r =
      train(d, linear_net(1), cfg, std::nullopt, [&](std::size_t, std::size_t, const MlpParams &) {
        ++observed;
      });
  EXPECT_EQ(r.updates, 3u * 3u);
  EXPECT_EQ(observed, r.updates);
}

TEST(Train, DeterministicGivenSeed) {
  Rng rng(5);
  const MlpParams init = random_net({2, 16, 1}, rng, 0.4);
  DataSet d;
  d.x = Matrix::Random(40, 2);
  d.y = d.x.col(0).array().square().matrix();
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.rng_seed = 77;
  std::vector<MlpParams> traj_a, traj_b;
  auto record = [](std::vector<MlpParams> &t) {
    return [&t](std::size_t, std::size_t, const MlpParams &p) { t.push_back(p); };
  };
  train(d, init, cfg, std::nullopt, record(traj_a));
  train(d, init, cfg, std::nullopt, record(traj_b));
  ASSERT_EQ(traj_a.size(), traj_b.size());
  for (std::size_t i = 0; i < traj_a.size(); ++i)
    for (std::size_t l = 0; l < traj_a[i].layers.size(); ++l) {
      EXPECT_TRUE(traj_a[i].layers[l].weights == traj_b[i].layers[l].weights);
      EXPECT_TRUE(traj_a[i].layers[l].bias == traj_b[i].layers[l].bias);
    }
}

TEST(Train, HookRunsAfterEveryUpdate) {
  const DataSet d = linear_data(64, 1.0, 6);
  TrainConfig cfg;
  cfg.epochs = 2;
  ConstraintHook hook{0, [](Matrix &w) { w.setConstant(0.25); }};
  train(d, linear_net(1), cfg, hook, [](std::size_t, std::size_t, const MlpParams &p) {
    EXPECT_EQ(p.layers[0].weights(0, 0), 0.25);
  });
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  DataSet d = linear_data(10, 1.0, 7);
  TrainConfig cfg;
  cfg.epochs = 2;
  ConstraintHook poison{0, [](Matrix &w) { w(0, 0) = std::numeric_limits<double>::quiet_NaN(); }};
  try {
    train(d, linear_net(1), cfg, poison);
    FAIL() << "expected divergence";
  } catch (const DivergenceError &e) {
    EXPECT_EQ(e.epoch(), 0u);
    EXPECT_EQ(e.batch(), 0u);
  }
}

TEST(Train, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
}

TEST(Glorot, WeightsWithinLimitBiasesZero) {
  Rng rng(8);
  const LayerSpec specs[] = {{20, 512, Activation::relu, 0.4, true},
                             {512, 1, Activation::identity, 0.0, true}};
  const MlpParams net = glorot_init(specs, rng);
  EXPECT_LE(net.layers[0].weights.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 532.0));
  EXPECT_EQ(net.layers[0].bias.norm(), 0.0);
  EXPECT_EQ(net.parameter_count(), 20u * 512u + 512u + 512u + 1u);
}
