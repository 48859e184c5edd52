#include "nnsdr/simgen.hpp"

#include <cmath>
#include <numbers>

#include "nnsdr/errors.hpp"

namespace nnsdr::sim {

namespace {

constexpr double kPi = std::numbers::pi;

Vector unit(Index p, Index j) {
  Vector e = Vector::Zero(p);
  e(j) = 1.0;
  return e;
}

// Noise multiplier applied to the standardized noise draw.
double default_noise_multiplier(ModelId model) {
  switch (model) {
  case ModelId::M1:
    return 1.0;
  case ModelId::M7:
    return 5.0;
  default:
    return 0.5;
  }
}

double m1_scale(M1NoiseScale choice) {
  constexpr double shape = 0.5;
  if (choice == M1NoiseScale::sqrt_half)
    return std::sqrt(0.5);
  return std::sqrt(0.25 * std::tgamma(1.0 / shape) / std::tgamma(3.0 / shape));
}

} // namespace

std::string to_string(ModelId model) {
  switch (model) {
  case ModelId::M1:
    return "M1";
  case ModelId::M2:
    return "M2";
  case ModelId::M3:
    return "M3";
  case ModelId::M4:
    return "M4";
  case ModelId::M5:
    return "M5";
  case ModelId::M6:
    return "M6";
  case ModelId::M7:
    return "M7";
  case ModelId::MC:
    return "MC";
  }
  return "?";
}

ModelId model_from_string(const std::string &name) {
  for (ModelId m : kAllModels)
    if (to_string(m) == name)
      return m;
  throw ContractViolation("unknown model '" + name + "' (expected M1..M7 or MC)");
}

Index reduction_dim(ModelId model) {
  switch (model) {
  case ModelId::M1:
  case ModelId::M2:
  case ModelId::M3:
  case ModelId::MC:
    return 1;
  case ModelId::M4:
  case ModelId::M5:
    return 2;
  case ModelId::M6:
    return 3;
  case ModelId::M7:
    return 4;
  }
  return 1;
}

Index minimum_p(ModelId model) {
  switch (model) {
  case ModelId::M6:
    return 3;
  case ModelId::M7:
    return 5;
  case ModelId::MC:
    return 4;
  default:
    return 6;
  }
}

SimSpec SimSpec::defaults(ModelId model, std::uint64_t seed) {
  SimSpec spec;
  spec.model = model;
  spec.seed = seed;
  spec.p = 20;
  switch (model) {
  case ModelId::M1:
  case ModelId::M2:
  case ModelId::M3:
    spec.n = 100;
    break;
  case ModelId::M4:
  case ModelId::M5:
  case ModelId::M6:
    spec.n = 200;
    break;
  case ModelId::M7:
    spec.n = 600;
    break;
  case ModelId::MC:
    spec.n = 100;
    spec.p = 10;
    break;
  }
  return spec;
}

void SimSpec::validate() const {
  if (n < 1)
    throw ContractViolation("SimSpec: n must be >= 1");
  if (p < minimum_p(model))
    throw ContractViolation("SimSpec: model " + to_string(model) + " needs p >= " +
                            std::to_string(minimum_p(model)));
  if (noise_multiplier && !std::isfinite(*noise_multiplier))
    throw ContractViolation("SimSpec: noise multiplier must be finite");
}

std::vector<Vector> coefficient_vectors(ModelId model, Index p) {
  if (p < minimum_p(model))
    throw ContractViolation("coefficient_vectors: model " + to_string(model) + " needs p >= " +
                            std::to_string(minimum_p(model)));
  switch (model) {
  case ModelId::M1:
  case ModelId::M2:
  case ModelId::M3:
  case ModelId::M4:
  case ModelId::M5: {
    Vector b1 = Vector::Zero(p);
    Vector b2 = Vector::Zero(p);
    for (Index j = 0; j < 6; ++j) {
      b1(j) = 1.0;
      b2(j) = (j % 2 == 0) ? 1.0 : -1.0;
    }
    b1 /= std::sqrt(6.0);
    b2 /= std::sqrt(6.0);
    if (reduction_dim(model) == 1)
      return {b1};
    return {b1, b2};
  }
  case ModelId::M6:
    return {unit(p, 0), unit(p, 1), unit(p, p - 1)};
  case ModelId::M7: {
    Vector b4 = Vector::Zero(p);
    b4(3) = 2.0 / std::sqrt(5.0);
    b4(4) = 1.0 / std::sqrt(5.0);
    return {unit(p, 0), unit(p, 1), unit(p, 2), b4};
  }
  case ModelId::MC:
    return {unit(p, 3)};
  }
  return {};
}

Matrix ar1_covariance(Index p, double rho) {
  if (p < 1 || !(std::abs(rho) < 1.0))
    throw ContractViolation("ar1_covariance: need p >= 1 and |rho| < 1");
  Matrix sigma(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return sigma;
}

double sample_gn(double scale, double shape, Rng &rng) {
  if (!(scale > 0.0) || !(shape > 0.0))
    throw ContractViolation("sample_gn: scale and shape must be positive");
  std::gamma_distribution<double> gamma(1.0 / shape, 1.0);
  const double magnitude = scale * std::pow(gamma(rng), 1.0 / shape);
  return uniform01(rng) < 0.5 ? -magnitude : magnitude;
}

double gn_variance(double scale, double shape) {
  return scale * scale * std::tgamma(3.0 / shape) / std::tgamma(1.0 / shape);
}

std::function<double(const Vector &)> mean_function(ModelId model, Index p) {
  const std::vector<Vector> b = coefficient_vectors(model, p);
  switch (model) {
  case ModelId::M1:
  case ModelId::M2:
    return [b](const Vector &x) { return std::cos(b[0].dot(x)); };
  case ModelId::M3:
    return [b](const Vector &x) { return 2.0 * std::log(std::abs(b[0].dot(x)) + 2.0); };
  case ModelId::M4:
    return [b](const Vector &x) {
      const double shift = 1.5 + b[1].dot(x);
      return b[0].dot(x) / (0.5 + shift * shift);
    };
  case ModelId::M5:
    return [b](const Vector &x) {
      const double u2 = b[1].dot(x) + 1.0;
      return std::cos(kPi * b[0].dot(x)) * u2 * u2;
    };
  case ModelId::M6:
    return [b](const Vector &x) {
      double y = 0.0;
      for (const auto &bj : b) {
        const double u = bj.dot(x);
        y += u * u;
      }
      return y;
    };
  case ModelId::M7:
    return [b](const Vector &x) {
      const double u3 = b[2].dot(x) - 0.5;
      return 10.0 * std::sin(kPi * b[0].dot(x) * b[1].dot(x)) + 20.0 * u3 * u3 +
             std::pow(5.0, 1.5) * b[3].dot(x);
    };
  case ModelId::MC:
    return [b](const Vector &x) {
      const double u = b[0].dot(x);
      return u * u;
    };
  }
  throw ContractViolation("mean_function: unknown model");
}

SimSample generate(const SimSpec &spec) {
  spec.validate();
  const Index n = spec.n;
  const Index p = spec.p;
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix x(n, p);
  switch (spec.model) {
  case ModelId::M1:
  case ModelId::M4: {
    const Matrix chol = linalg::cholesky(ar1_covariance(p, 0.5));
    Vector z(p);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p; ++j)
        z(j) = normal(rng);
      x.row(i) = (chol * z).transpose();
    }
    break;
  }
  case ModelId::M2: {
    std::bernoulli_distribution coin(0.3);
    for (Index i = 0; i < n; ++i) {
      const double shift = coin(rng) ? 1.0 : -1.0;
      for (Index j = 0; j < p; ++j)
        x(i, j) = shift + normal(rng);
    }
    break;
  }
  case ModelId::M3:
  case ModelId::M6:
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j)
        x(i, j) = normal(rng);
    break;
  case ModelId::M5:
  case ModelId::M7:
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j)
        x(i, j) = uniform01(rng);
    break;
  case ModelId::MC:
    for (Index i = 0; i < n; ++i) {
      for (Index j = 1; j < p; ++j)
        x(i, j) = normal(rng);
      x(i, 0) = -0.5 * (x(i, 1) + x(i, 2)) + 0.001 * normal(rng);
    }
    break;
  }

  const double multiplier = spec.noise_multiplier.value_or(default_noise_multiplier(spec.model));
  const bool gn_noise = spec.model == ModelId::M1;
  const double gn_scale = m1_scale(spec.m1_noise);
  const double base_variance = gn_noise ? gn_variance(gn_scale, 0.5) : 1.0;

  const auto g = mean_function(spec.model, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double eps = gn_noise ? sample_gn(gn_scale, 0.5, rng) : normal(rng);
    y(i) = g(x.row(i).transpose()) + multiplier * eps;
  }

  const std::vector<Vector> b = coefficient_vectors(spec.model, p);
  Matrix basis(p, static_cast<Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j)
    basis.col(static_cast<Index>(j)) = b[j];

  return SimSample{DataSet{std::move(x), std::move(y)}, StiefelMatrix(basis, 1e-12),
                   reduction_dim(spec.model), multiplier * multiplier * base_variance};
}

} // namespace nnsdr::sim
