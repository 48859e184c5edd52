#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nnsdr/dataset.hpp"
#include "nnsdr/linalg.hpp"
#include "nnsdr/rng.hpp"

namespace nnsdr::sim {

/// Simulation designs. MC is the collinear-predictor model.
enum class ModelId { M1, M2, M3, M4, M5, M6, M7, MC };

inline constexpr ModelId kAllModels[] = {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4,
                                         ModelId::M5, ModelId::M6, ModelId::M7, ModelId::MC};

std::string to_string(ModelId model);
ModelId model_from_string(const std::string &name);

/// How M1's generalized-normal noise scale is chosen.
enum class M1NoiseScale {
  unit_quarter_variance, ///< scale such that Var(eps) = 0.25
  sqrt_half,             ///< scale sqrt(1/2) (variance 60 for shape 0.5)
};

struct SimSpec {
  ModelId model = ModelId::M6;
  Index n = 200;
  Index p = 20;
  std::uint64_t seed = 0;
  /// Replaces the model's noise multiplier (0 gives noiseless responses).
  std::optional<double> noise_multiplier;
  M1NoiseScale m1_noise = M1NoiseScale::unit_quarter_variance;

  /// Default n and p for a model.
  static SimSpec defaults(ModelId model, std::uint64_t seed = 0);
  void validate() const;
};

struct SimSample {
  DataSet data;
  StiefelMatrix b_true;
  Index k = 1;
  /// Var(noise term) added to the link, eta^2.
  double noise_variance = 0.0;
};

Index reduction_dim(ModelId model);
Index minimum_p(ModelId model);

/// The coefficient vectors b_1..b_k of a model, each of unit norm.
std::vector<Vector> coefficient_vectors(ModelId model, Index p);

/// Sigma_ij = rho^|i-j|.
Matrix ar1_covariance(Index p, double rho);

/// Generalized normal GN(0, scale, shape): density proportional to
/// exp(-(|z| / scale)^shape). Drawn as sign * scale * G^(1/shape) with
/// G ~ Gamma(1/shape, 1).
double sample_gn(double scale, double shape, Rng &rng);

/// Variance scale^2 Gamma(3/shape) / Gamma(1/shape) of GN(0, scale, shape).
double gn_variance(double scale, double shape);

/// The noiseless regression function E(Y | X = x) of a model.
std::function<double(const Vector &)> mean_function(ModelId model, Index p);

SimSample generate(const SimSpec &spec);

} // namespace nnsdr::sim
