#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnsdr/baselines.hpp"
#include "nnsdr/nn_sdr.hpp"
#include "nnsdr/simgen.hpp"

namespace nnsdr::harness {

enum class Method { nn, opg, mave };

std::string to_string(Method m);
Method method_from_string(const std::string &name);

/// Estimator settings shared by every fit in a run. k and the nn seed are
/// filled in per fit.
struct MethodOverrides {
  nn::NnSdrConfig nn;
  baselines::KernelConfig kernel;
  int mave_max_iters = 50;
  double mave_tol = 1e-6;
};

/// A fitted estimator of any kind, able to predict.
struct FittedModel {
  Method method = Method::nn;
  StiefelMatrix b_hat = StiefelMatrix::canonical(1, 1);
  std::optional<nn::NnSdrModel> nn;
  nn::NnSdrConfig nn_config;
  std::optional<baselines::ReducedSmoother> smoother;
  baselines::KernelConfig kernel;
  std::optional<baselines::MaveFit> mave;

  double predict(const Vector &x) const;
  nlohmann::json to_json() const;
  static FittedModel from_json(const nlohmann::json &j);
};

/// Fits one estimator. MAVE is initialized at the OPG estimate.
FittedModel fit_method(Method method, const DataSet &train, Index k,
                       const MethodOverrides &overrides, std::uint64_t seed);

/// Seeds are derived from enum ordinals, not list positions, so any subset of
/// a benchmark reproduces the same rows.
std::uint64_t data_seed(std::uint64_t base, sim::ModelId model, int replication, int part);
std::uint64_t fit_seed(std::uint64_t base, sim::ModelId model, Method method, int replication);

struct BenchmarkConfig {
  std::vector<sim::ModelId> models{sim::ModelId::M6};
  std::vector<Method> methods{Method::nn};
  int replications = 1;
  std::uint64_t seed = 0;
  /// Training size and dimension; model defaults when absent.
  std::optional<Index> n;
  std::optional<Index> p;
  Index test_size = 1000;
  sim::M1NoiseScale m1_noise = sim::M1NoiseScale::unit_quarter_variance;
  MethodOverrides overrides;
  /// When false the runtime column is left empty and the CSV is reproducible
  /// byte for byte.
  bool record_timing = true;
  int jobs = 1;
  std::string output_path;

  void validate() const;
};

/// Keys absent from j keep their value in base.
BenchmarkConfig benchmark_config_from_json(const nlohmann::json &j, BenchmarkConfig base = {});
nlohmann::json benchmark_config_to_json(const BenchmarkConfig &c);

struct ResultRow {
  std::string model;
  std::string method;
  int replication = 0;
  std::uint64_t seed = 0;
  std::optional<double> acc_err;
  std::optional<double> mspe;
  std::optional<double> runtime_seconds;
  /// Empty on success, otherwise "<kind>: <message>".
  std::string error;
};

/// Rows in (model, method, replication) order regardless of jobs.
std::vector<ResultRow> run_benchmark(const BenchmarkConfig &config);

void write_results_csv(std::ostream &out, const std::vector<ResultRow> &rows);
void write_results_csv(const std::string &path, const std::vector<ResultRow> &rows);

struct Moments {
  Index count = 0;
  double mean = 0.0;
  /// Sample standard deviation; 0 for fewer than two values.
  double sd = 0.0;
};

Moments moments(const std::vector<double> &values);

struct SummaryRow {
  std::string model;
  std::string method;
  Index replications = 0;
  Index failures = 0;
  Moments acc_err;
  Moments mspe;
  Moments runtime_seconds;
};

/// One row per (model, method) cell in first-appearance order.
std::vector<SummaryRow> summarize(const std::vector<ResultRow> &rows);
void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows);
/// "dir/results.csv" -> "dir/results.summary.csv".
std::string summary_path(const std::string &results_path);

struct ScalingConfig {
  sim::ModelId model = sim::ModelId::M6;
  std::vector<std::pair<Index, Index>> sizes;
  Method method = Method::nn;
  MethodOverrides overrides;
  /// Halve both nn epoch counts at every step after the first (minimum 1).
  bool halve_epochs = false;
  std::uint64_t seed = 0;
  bool record_timing = true;

  void validate() const;
};

struct ScalingRow {
  Index n = 0;
  Index p = 0;
  int stage1_epochs = 0;
  int stage2_epochs = 0;
  std::uint64_t seed = 0;
  std::optional<double> acc_err;
  std::optional<double> runtime_seconds;
  std::string error;
};

std::vector<ScalingRow> run_scaling(const ScalingConfig &config);
void write_scaling_csv(std::ostream &out, const std::vector<ScalingRow> &rows);

/// Contiguous k-fold partition of 0..n-1 after a seeded shuffle.
std::vector<std::vector<Index>> kfold_indices(Index n, int folds, std::uint64_t seed);

/// Wall-clock timer on a monotonic clock.
class Stopwatch {
public:
  Stopwatch();
  double seconds() const;

private:
  std::int64_t start_ns_;
};

} // namespace nnsdr::harness
