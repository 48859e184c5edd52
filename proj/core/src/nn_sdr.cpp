#include "nnsdr/nn_sdr.hpp"

#include "nnsdr/errors.hpp"
#include "nnsdr/rng.hpp"

namespace nnsdr::nn {

void NnSdrConfig::validate(Index p) const {
  if (k < 1 || k >= p)
    throw ContractViolation("NnSdrConfig: need 1 <= k < p (k = " + std::to_string(k) +
                            ", p = " + std::to_string(p) + ")");
  if (hidden.empty())
    throw ContractViolation("NnSdrConfig: at least one hidden layer is required");
  for (Index width : hidden)
    if (width < 1)
      throw ContractViolation("NnSdrConfig: hidden widths must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ContractViolation("NnSdrConfig: dropout rate must lie in [0, 1)");
  stage1.validate();
  stage2.validate();
}

OuterProductEstimate outer_product_estimate(const Matrix &gradients, Index k) {
  if (gradients.rows() < 1 || k < 1 || k > gradients.cols())
    throw ContractViolation("outer_product_estimate: need n >= 1 and 1 <= k <= p");
  Matrix sigma = Matrix::Zero(gradients.cols(), gradients.cols());
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(gradients.transpose(),
                                                   1.0 / static_cast<double>(gradients.rows()));
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  linalg::SymEigen eig = linalg::eigen_sym(sigma);
  StiefelMatrix basis = linalg::top_eigenvectors(eig, k);
  return OuterProductEstimate{std::move(sigma), std::move(eig.values), std::move(basis)};
}

std::vector<mlp::LayerSpec> stage1_architecture(Index p, const NnSdrConfig &config) {
  std::vector<mlp::LayerSpec> specs;
  Index in = p;
  for (Index width : config.hidden) {
    specs.push_back({in, width, mlp::Activation::relu, config.dropout_rate, true});
    in = width;
  }
  specs.push_back({in, 1, mlp::Activation::identity, 0.0, true});
  return specs;
}

mlp::MlpParams bottleneck_network(const StiefelMatrix &reduction, const mlp::MlpParams &wrapped) {
  if (wrapped.in_dim() != reduction.cols())
    throw ContractViolation("bottleneck_network: wrapped network expects " +
                            std::to_string(wrapped.in_dim()) + " inputs, reduction has " +
                            std::to_string(reduction.cols()));
  mlp::MlpParams net;
  net.layers.reserve(wrapped.layers.size() + 1);
  mlp::LayerSpec spec{reduction.rows(), reduction.cols(), mlp::Activation::identity, 0.0, false};
  net.layers.push_back({spec, reduction.value().transpose(), Vector()});
  net.layers.insert(net.layers.end(), wrapped.layers.begin(), wrapped.layers.end());
  return net;
}

StiefelMatrix to_original_scale(const StiefelMatrix &basis, const Standardizer &s) {
  // b^T D^{-1} (x - mu) is a linear reduction of x with coefficients D^{-1} b.
  const Matrix raw = s.scale.cwiseInverse().asDiagonal() * basis.value();
  return linalg::polar_retract(raw);
}

namespace {

StiefelMatrix to_standardized_scale(const StiefelMatrix &basis, const Standardizer &s) {
  const Matrix raw = s.scale.asDiagonal() * basis.value();
  return linalg::polar_retract(raw);
}

Standardizer standardizer_for(const DataSet &data, const NnSdrConfig &config) {
  return config.standardize ? Standardizer::fit(data.x) : Standardizer::identity(data.p());
}

DataSet working_data(const DataSet &data, const Standardizer &s, bool standardize) {
  if (!standardize)
    return data;
  return DataSet{s.apply(data.x), data.y};
}

mlp::TrainConfig seeded(mlp::TrainConfig cfg, std::uint64_t base, std::uint64_t stage) {
  cfg.rng_seed = mix_seed({base, stage, cfg.rng_seed});
  return cfg;
}

} // namespace

NnOpgFit fit_stage1(const DataSet &data, const NnSdrConfig &config) {
  data.validate();
  if (data.n() < 2 || data.p() < 2)
    throw ContractViolation("fit_stage1: need n >= 2 and p >= 2");
  config.validate(data.p());

  Standardizer standardizer = standardizer_for(data, config);
  const DataSet work = working_data(data, standardizer, config.standardize);

  Rng init_rng(mix_seed({config.rng_seed, 1, 0}));
  const auto specs = stage1_architecture(data.p(), config);
  mlp::MlpParams init = mlp::glorot_init(specs, init_rng);
  mlp::TrainResult trained = mlp::train(work, std::move(init), seeded(config.stage1, config.rng_seed, 1));

  const Matrix gradients = mlp::grad_input_rows(trained.params, work.x);
  OuterProductEstimate opg = outer_product_estimate(gradients, config.k);
  StiefelMatrix b_hat = config.standardize ? to_original_scale(opg.b_hat, standardizer)
                                           : std::move(opg.b_hat);
  return NnOpgFit{std::move(trained.params), std::move(opg.sigma_hat), std::move(b_hat),
                  std::move(opg.eigenvalues), std::move(trained.epoch_loss),
                  std::move(standardizer)};
}

NnSdrModel fit_refinement(const DataSet &data, const NnOpgFit &stage1, const NnSdrConfig &config,
                          const mlp::TrainObserver &observer) {
  data.validate();
  config.validate(data.p());
  if (stage1.theta1.in_dim() != data.p() || stage1.b_hat.rows() != data.p())
    throw ContractViolation("fit_refinement: stage-1 fit has a different predictor dimension");
  if (stage1.b_hat.cols() != config.k)
    throw ContractViolation("fit_refinement: stage-1 basis has " +
                            std::to_string(stage1.b_hat.cols()) + " columns, expected k = " +
                            std::to_string(config.k));

  Standardizer standardizer = standardizer_for(data, config);
  const DataSet work = working_data(data, standardizer, config.standardize);
  const StiefelMatrix start = config.standardize
                                  ? to_standardized_scale(stage1.b_hat, standardizer)
                                  : stage1.b_hat;

  // Wrapped network: the stage-1 first hidden layer acts on V^T x through
  // W1 V, every later layer is copied unchanged.
  mlp::MlpParams wrapped = stage1.theta1;
  auto &first = wrapped.layers.front();
  first.weights = first.weights * start.value();
  first.spec.in_dim = config.k;
  for (auto &layer : wrapped.layers)
    if (layer.spec.activation == mlp::Activation::relu)
      layer.spec.dropout_rate = config.dropout_rate;

  mlp::MlpParams init = bottleneck_network(start, wrapped);
  mlp::ConstraintHook hook{0, [](Matrix &weights) {
                             weights = linalg::polar_retract(weights.transpose()).value().transpose();
                           }};
  mlp::TrainResult trained =
      mlp::train(work, std::move(init), seeded(config.stage2, config.rng_seed, 2), hook, observer);

  StiefelMatrix reduction(trained.params.layers.front().weights.transpose());
  mlp::MlpParams theta2;
  theta2.layers.assign(trained.params.layers.begin() + 1, trained.params.layers.end());
  StiefelMatrix b_hat =
      config.standardize ? to_original_scale(reduction, standardizer) : reduction;

  return NnSdrModel{std::move(b_hat),        std::move(theta2),      stage1,
                    std::move(trained.epoch_loss), std::move(standardizer), std::move(reduction)};
}

NnSdrModel fit(const DataSet &data, const NnSdrConfig &config) {
  return fit_refinement(data, fit_stage1(data, config), config);
}

Vector predict_rows(const NnSdrModel &model, const Matrix &x) {
  if (x.cols() != model.reduction.rows())
    throw ContractViolation("predict: expected " + std::to_string(model.reduction.rows()) +
                            " predictors, got " + std::to_string(x.cols()));
  const Matrix reduced = model.standardizer.apply(x) * model.reduction.value();
  return mlp::predict_rows(model.theta2, reduced);
}

double predict(const NnSdrModel &model, const Vector &x_new) {
  return predict_rows(model, x_new.transpose())(0);
}

} // namespace nnsdr::nn
