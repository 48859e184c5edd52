#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nnsdr/dataset.hpp"
#include "nnsdr/linalg.hpp"
#include "nnsdr/mlp.hpp"

namespace nnsdr::nn {

struct NnSdrConfig {
  Index k = 1;
  /// Widths of the hidden ReLU layers shared by both stages.
  std::vector<Index> hidden{512};
  double dropout_rate = 0.4;
  mlp::TrainConfig stage1{200, 32};
  mlp::TrainConfig stage2{400, 32};
  std::uint64_t rng_seed = 0;
  /// Center and scale predictors before fitting. Estimates and predictions
  /// are reported on the original predictor scale either way.
  bool standardize = false;

  void validate(Index p) const;
};

/// Average outer product of gradient vectors and its leading eigenvectors.
struct OuterProductEstimate {
  Matrix sigma_hat;
  Vector eigenvalues;
  StiefelMatrix b_hat;
};

/// sigma_hat = (1/n) sum_i g_i g_i^T over the rows g_i of gradients; b_hat
/// holds its top-k eigenvectors.
OuterProductEstimate outer_product_estimate(const Matrix &gradients, Index k);

/// Stage 1: an unconstrained network fitted on all p predictors, with the
/// reduction read off the outer product of its input gradients.
struct NnOpgFit {
  mlp::MlpParams theta1;
  Matrix sigma_hat;
  StiefelMatrix b_hat;
  Vector eigenvalues;
  std::vector<double> loss_history;
  Standardizer standardizer;
};

/// Stage 2: bottleneck network x -> g(V^T x) with V on the Stiefel manifold.
struct NnSdrModel {
  StiefelMatrix b_hat;
  /// The network on the k reduced inputs.
  mlp::MlpParams theta2;
  NnOpgFit stage1;
  std::vector<double> training_history;
  Standardizer standardizer;
  /// Basis of the reduction layer in standardized coordinates; equals b_hat
  /// when no standardization is applied.
  StiefelMatrix reduction;
};

/// Layer specs of the unconstrained stage-1 network p -> hidden -> 1.
std::vector<mlp::LayerSpec> stage1_architecture(Index p, const NnSdrConfig &config);

/// Full bottleneck network: reduction layer (identity, no bias, no dropout,
/// weights V^T) followed by the wrapped network.
mlp::MlpParams bottleneck_network(const StiefelMatrix &reduction, const mlp::MlpParams &wrapped);

/// Maps a basis estimated on standardized predictors back to the original
/// predictor scale and orthonormalizes it.
StiefelMatrix to_original_scale(const StiefelMatrix &basis, const Standardizer &s);

NnOpgFit fit_stage1(const DataSet &data, const NnSdrConfig &config);

/// Refinement warm-started from stage 1. The observer sees every update of
/// the bottleneck network, after the Stiefel retraction of its first layer.
NnSdrModel fit_refinement(const DataSet &data, const NnOpgFit &stage1, const NnSdrConfig &config,
                          const mlp::TrainObserver &observer = {});

NnSdrModel fit(const DataSet &data, const NnSdrConfig &config);

double predict(const NnSdrModel &model, const Vector &x_new);
Vector predict_rows(const NnSdrModel &model, const Matrix &x);

} // namespace nnsdr::nn
