#include "nnsdr/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nnsdr/errors.hpp"

namespace nnsdr::mlp {

std::string to_string(Activation a) {
  switch (a) {
  case Activation::relu:
    return "relu";
  case Activation::identity:
    return "identity";
  }
  return "unknown";
}

Activation activation_from_string(const std::string &name) {
  if (name == "relu")
    return Activation::relu;
  if (name == "identity" || name == "linear")
    return Activation::identity;
  throw ContractViolation("unknown activation '" + name + "'");
}

Index MlpParams::in_dim() const {
  if (layers.empty())
    throw ContractViolation("MlpParams: no layers");
  return layers.front().spec.in_dim;
}

Index MlpParams::out_dim() const {
  if (layers.empty())
    throw ContractViolation("MlpParams: no layers");
  return layers.back().spec.out_dim;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto &l : layers)
    count += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return count;
}

void MlpParams::validate() const {
  if (layers.empty())
    throw ContractViolation("MlpParams: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto &layer = layers[l];
    const auto &s = layer.spec;
    const std::string where = "MlpParams layer " + std::to_string(l) + ": ";
    if (s.in_dim < 1 || s.out_dim < 1)
      throw ContractViolation(where + "dimensions must be >= 1");
    if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0))
      throw ContractViolation(where + "dropout rate must lie in [0, 1)");
    if (layer.weights.rows() != s.out_dim || layer.weights.cols() != s.in_dim)
      throw ContractViolation(where + "weight shape does not match spec");
    if (layer.bias.size() != (s.has_bias ? s.out_dim : 0))
      throw ContractViolation(where + "bias shape does not match spec");
    if (l > 0 && layers[l - 1].spec.out_dim != s.in_dim)
      throw ContractViolation(where + "input dimension does not chain with previous layer");
  }
  if (!all_finite())
    throw ContractViolation("MlpParams: non-finite parameters");
}

bool MlpParams::all_finite() const {
  for (const auto &l : layers)
    if (!l.weights.allFinite() || !l.bias.allFinite())
      return false;
  return true;
}

MlpParams glorot_init(std::span<const LayerSpec> specs, Rng &rng) {
  MlpParams params;
  for (const auto &s : specs) {
    DenseLayer layer{s, Matrix(s.out_dim, s.in_dim), Vector::Zero(s.has_bias ? s.out_dim : 0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    for (Index j = 0; j < layer.weights.cols(); ++j)
      for (Index i = 0; i < layer.weights.rows(); ++i)
        layer.weights(i, j) = limit * (2.0 * uniform01(rng) - 1.0);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

MlpParams zeros_like(const MlpParams &params) {
  MlpParams out;
  out.layers.reserve(params.layers.size());
  for (const auto &l : params.layers)
    out.layers.push_back(DenseLayer{l.spec, Matrix::Zero(l.weights.rows(), l.weights.cols()),
                                    Vector::Zero(l.bias.size())});
  return out;
}

ForwardCache forward_batch(const MlpParams &params, const Matrix &inputs, Rng *rng) {
  if (params.layers.empty())
    throw ContractViolation("forward: network has no layers");
  if (inputs.rows() != params.in_dim())
    throw ContractViolation("forward: input dimension " + std::to_string(inputs.rows()) +
                            " does not match network input " +
                            std::to_string(params.in_dim()));
  const std::size_t depth = params.layers.size();
  ForwardCache cache;
  cache.inputs.resize(depth);
  cache.preactivation.resize(depth);
  cache.masks.resize(depth);

  Matrix h = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto &layer = params.layers[l];
    Matrix z = layer.weights * h;
    if (layer.spec.has_bias)
      z.colwise() += layer.bias;
    cache.inputs[l] = std::move(h);
    h = layer.spec.activation == Activation::relu ? Matrix(z.cwiseMax(0.0)) : z;
    cache.preactivation[l] = std::move(z);

    const double rate = layer.spec.dropout_rate;
    if (rng != nullptr && rate > 0.0) {
      const double keep_scale = 1.0 / (1.0 - rate);
      Matrix mask(h.rows(), h.cols());
      for (Index s = 0; s < mask.cols(); ++s)
        for (Index u = 0; u < mask.rows(); ++u)
          mask(u, s) = uniform01(*rng) < rate ? 0.0 : keep_scale;
      h.array() *= mask.array();
      cache.masks[l] = std::move(mask);
    }
  }
  cache.output = std::move(h);
  return cache;
}

Vector forward(const MlpParams &params, const Vector &x, Rng *rng, ForwardCache &cache) {
  cache = forward_batch(params, x, rng);
  return cache.output.col(0);
}

Vector forward(const MlpParams &params, const Vector &x, Rng *rng) {
  ForwardCache cache;
  return forward(params, x, rng, cache);
}

Vector predict_rows(const MlpParams &params, const Matrix &x) {
  if (params.out_dim() != 1)
    throw ContractViolation("predict_rows: network output dimension must be 1");
  const ForwardCache cache = forward_batch(params, x.transpose(), nullptr);
  return cache.output.row(0).transpose();
}

namespace {

void check_cache(const MlpParams &params, const ForwardCache &cache, const Matrix &upstream) {
  const std::size_t depth = params.layers.size();
  if (cache.inputs.size() != depth || cache.preactivation.size() != depth ||
      cache.masks.size() != depth)
    throw ContractViolation("backward: cache does not belong to this network");
  for (std::size_t l = 0; l < depth; ++l) {
    const auto &layer = params.layers[l];
    if (cache.inputs[l].rows() != layer.spec.in_dim ||
        cache.preactivation[l].rows() != layer.spec.out_dim ||
        cache.preactivation[l].cols() != upstream.cols())
      throw ContractViolation("backward: stale or mismatched cache at layer " +
                              std::to_string(l));
  }
  if (upstream.rows() != params.out_dim())
    throw ContractViolation("backward: upstream gradient has wrong output dimension");
}

// Gradient with respect to the pre-activation of layer l, given the gradient
// with respect to its (post-dropout) output.
void local_delta(const DenseLayer &layer, const ForwardCache &cache, std::size_t l, Matrix &g) {
  if (cache.masks[l].size() > 0)
    g.array() *= cache.masks[l].array();
  if (layer.spec.activation == Activation::relu)
    g.array() *= (cache.preactivation[l].array() > 0.0).cast<double>();
}

} // namespace

MlpParams backward(const MlpParams &params, const ForwardCache &cache,
                   const Matrix &dloss_doutput) {
  check_cache(params, cache, dloss_doutput);
  MlpParams grads;
  grads.layers.resize(params.layers.size());
  Matrix g = dloss_doutput;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto &layer = params.layers[l];
    local_delta(layer, cache, l, g);
    auto &out = grads.layers[l];
    out.spec = layer.spec;
    out.weights.noalias() = g * cache.inputs[l].transpose();
    out.bias = layer.spec.has_bias ? Vector(g.rowwise().sum()) : Vector();
    if (l > 0)
      g = layer.weights.transpose() * g;
  }
  return grads;
}

Matrix grad_input_rows(const MlpParams &params, const Matrix &x) {
  if (params.out_dim() != 1)
    throw ContractViolation("grad_input: network output dimension must be 1");
  const ForwardCache cache = forward_batch(params, x.transpose(), nullptr);
  Matrix g = Matrix::Ones(1, x.rows());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto &layer = params.layers[l];
    local_delta(layer, cache, l, g);
    g = layer.weights.transpose() * g;
  }
  return g.transpose();
}

Vector grad_input(const MlpParams &params, const Vector &x) {
  return grad_input_rows(params, x.transpose()).row(0).transpose();
}

void TrainConfig::validate() const {
  if (epochs < 1)
    throw ContractViolation("TrainConfig: epochs must be >= 1");
  if (batch_size < 1)
    throw ContractViolation("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0))
    throw ContractViolation("TrainConfig: learning_rate must be positive");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0))
    throw ContractViolation("TrainConfig: rmsprop_decay must lie in (0, 1)");
  if (!(rmsprop_epsilon > 0.0))
    throw ContractViolation("TrainConfig: rmsprop_epsilon must be positive");
}

RmsPropState RmsPropState::zeros_for(const MlpParams &params) {
  return RmsPropState{zeros_like(params)};
}

void rmsprop_step(MlpParams &params, const MlpParams &grads, RmsPropState &state,
                  const TrainConfig &config) {
  if (grads.layers.size() != params.layers.size() ||
      state.mean_square.layers.size() != params.layers.size())
    throw ContractViolation("rmsprop_step: shape mismatch");
  const double decay = config.rmsprop_decay;
  const double lr = config.learning_rate;
  const double eps = config.rmsprop_epsilon;

  auto update = [&](auto &&p, const auto &g, auto &&s) {
    if (p.rows() != g.rows() || p.cols() != g.cols() || s.rows() != g.rows() ||
        s.cols() != g.cols())
      throw ContractViolation("rmsprop_step: shape mismatch");
    s.array() = decay * s.array() + (1.0 - decay) * g.array().square();
    p.array() -= lr * g.array() / (s.array() + eps).sqrt();
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto &p = params.layers[l];
    auto &s = state.mean_square.layers[l];
    update(p.weights, grads.layers[l].weights, s.weights);
    update(p.bias, grads.layers[l].bias, s.bias);
  }
}

TrainResult train(const DataSet &data, MlpParams init, const TrainConfig &config,
                  const std::optional<ConstraintHook> &hook, const TrainObserver &observer) {
  data.validate();
  config.validate();
  init.validate();
  if (init.in_dim() != data.p())
    throw ContractViolation("train: network input dimension " + std::to_string(init.in_dim()) +
                            " does not match p = " + std::to_string(data.p()));
  if (init.out_dim() != 1)
    throw ContractViolation("train: network output dimension must be 1");
  if (hook && (hook->layer >= init.layers.size() || !hook->project))
    throw ContractViolation("train: constraint hook targets a missing layer");

  const Index n = data.n();
  const Index m = std::min<Index>(config.batch_size, n);
  const Index batches = (n + m - 1) / m;
  const double inv_n = 1.0 / static_cast<double>(n);

  Rng rng(config.rng_seed);
  const Matrix xt = data.x.transpose();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  TrainResult result;
  result.params = std::move(init);
  result.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));
  RmsPropState state = RmsPropState::zeros_for(result.params);

  Matrix batch_x;
  Vector batch_y;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (Index b = 0; b < batches; ++b) {
      const Index begin = b * m;
      const Index size = std::min(m, n - begin);
      batch_x.resize(data.p(), size);
      batch_y.resize(size);
      for (Index s = 0; s < size; ++s) {
        const Index row = order[static_cast<std::size_t>(begin + s)];
        batch_x.col(s) = xt.col(row);
        batch_y(s) = data.y(row);
      }

      const ForwardCache cache = forward_batch(result.params, batch_x, &rng);
      const Matrix residual = cache.output - batch_y.transpose();
      loss_sum += residual.squaredNorm();
      const MlpParams grads = backward(result.params, cache, (2.0 * inv_n) * residual);
      rmsprop_step(result.params, grads, state, config);
      if (hook)
        hook->project(result.params.layers[hook->layer].weights);
      ++result.updates;
      if (!result.params.all_finite())
        throw DivergenceError(static_cast<std::size_t>(epoch), static_cast<std::size_t>(b));
      if (observer)
        observer(static_cast<std::size_t>(epoch), static_cast<std::size_t>(b), result.params);
    }
    result.epoch_loss.push_back(loss_sum * inv_n);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return result;
}

double mean_squared_error(const MlpParams &params, const DataSet &data) {
  data.validate();
  return (predict_rows(params, data.x) - data.y).squaredNorm() / static_cast<double>(data.n());
}

} // namespace nnsdr::mlp
