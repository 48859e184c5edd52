#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnsdr/dataset.hpp"
#include "nnsdr/linalg.hpp"
#include "nnsdr/rng.hpp"

namespace nnsdr::mlp {

/// relu(x) = max(0, x) with derivative 0 at x = 0; identity(x) = x.
enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string &name);

struct LayerSpec {
  Index in_dim = 1;
  Index out_dim = 1;
  Activation activation = Activation::relu;
  /// Applied to this layer's output in training mode (inverted dropout).
  double dropout_rate = 0.0;
  bool has_bias = true;
};

/// One affine layer phi(W x + b). weights is out_dim x in_dim; bias is empty
/// when spec.has_bias is false.
struct DenseLayer {
  LayerSpec spec;
  Matrix weights;
  Vector bias;
};

/// Parameters of a fully connected network, f = f_N o ... o f_1.
///
/// The same type carries gradients and RMSProp accumulators, which share the
/// parameter shapes.
struct MlpParams {
  std::vector<DenseLayer> layers;

  Index in_dim() const;
  Index out_dim() const;
  std::size_t parameter_count() const;

  /// Checks layer chaining, shapes and finiteness; throws ContractViolation.
  void validate() const;
  bool all_finite() const;
};

/// Glorot-uniform weights on +-sqrt(6 / (in + out)), zero biases.
MlpParams glorot_init(std::span<const LayerSpec> specs, Rng &rng);
MlpParams zeros_like(const MlpParams &params);

/// Activations recorded by a forward pass, needed by backward().
/// Columns index samples.
struct ForwardCache {
  std::vector<Matrix> inputs;       ///< input to layer l
  std::vector<Matrix> preactivation; ///< W x + b of layer l
  std::vector<Matrix> masks;        ///< scaled dropout masks; empty in eval mode
  Matrix output;
};

/// Forward pass over a batch whose columns are samples. A null rng means
/// eval mode; otherwise dropout masks are drawn per sample and per unit.
ForwardCache forward_batch(const MlpParams &params, const Matrix &inputs, Rng *rng);

/// Single-sample forward pass. Pass an rng for training mode.
Vector forward(const MlpParams &params, const Vector &x, Rng *rng = nullptr);
Vector forward(const MlpParams &params, const Vector &x, Rng *rng, ForwardCache &cache);

/// Eval-mode outputs for every row of x (output dimension 1).
Vector predict_rows(const MlpParams &params, const Matrix &x);

/// Reverse-mode gradient of sum_s <dloss_doutput(:, s), f(x_s)> with respect
/// to every weight and bias, honoring the dropout masks in cache.
MlpParams backward(const MlpParams &params, const ForwardCache &cache,
                   const Matrix &dloss_doutput);

/// Input gradient of the eval-mode network output (out_dim must be 1).
Vector grad_input(const MlpParams &params, const Vector &x);

/// Input gradients for every row of x, returned as rows of an n x p matrix.
Matrix grad_input_rows(const MlpParams &params, const Matrix &x);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Running means of squared gradients, same shape as the parameters.
struct RmsPropState {
  MlpParams mean_square;

  static RmsPropState zeros_for(const MlpParams &params);
};

/// state <- decay * state + (1 - decay) * g^2;
/// params <- params - lr * g / sqrt(state + eps).
void rmsprop_step(MlpParams &params, const MlpParams &grads, RmsPropState &state,
                  const TrainConfig &config);

/// Projection applied to one layer's weights after every parameter update.
struct ConstraintHook {
  std::size_t layer = 0;
  std::function<void(Matrix &weights)> project;
};

/// Called after each update (and after the constraint hook) with the epoch,
/// the batch index inside the epoch and the current parameters.
using TrainObserver =
    std::function<void(std::size_t epoch, std::size_t batch, const MlpParams &params)>;

struct TrainResult {
  MlpParams params;
  /// Mean training-mode squared error over each epoch's batches.
  std::vector<double> epoch_loss;
  std::size_t updates = 0;
};

/// Mini-batch RMSProp on the squared-error objective (1/n) sum (y - f(x))^2.
///
/// Each epoch walks the current sample order in ceil(n / m) batches (the last
/// one possibly partial) and reshuffles afterwards. A batch contributes the
/// gradient (1/n) * sum over its samples. Deterministic given the seed.
/// Throws DivergenceError when parameters become non-finite.
TrainResult train(const DataSet &data, MlpParams init, const TrainConfig &config,
                  const std::optional<ConstraintHook> &hook = std::nullopt,
                  const TrainObserver &observer = {});

/// (1/n) sum (y_i - f(x_i))^2 in eval mode.
double mean_squared_error(const MlpParams &params, const DataSet &data);

} // namespace nnsdr::mlp
