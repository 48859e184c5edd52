#include "nnsdr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

#include "nnsdr/errors.hpp"
#include "nnsdr/metrics.hpp"
#include "nnsdr/rng.hpp"
#include "nnsdr/serialize.hpp"

namespace nnsdr::harness {

using Json = nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
  case Method::nn:
    return "nn";
  case Method::opg:
    return "opg";
  case Method::mave:
    return "mave";
  }
  return "nn";
}

Method method_from_string(const std::string &name) {
  if (name == "nn")
    return Method::nn;
  if (name == "opg")
    return Method::opg;
  if (name == "mave")
    return Method::mave;
  throw ContractViolation("unknown method \"" + name + "\" (expected nn, opg, mave)");
}

double FittedModel::predict(const Vector &x) const {
  if (nn)
    return nn::predict(*nn, x);
  if (smoother)
    return smoother->predict(x);
  throw ContractViolation("FittedModel: no predictor attached");
}

Json FittedModel::to_json() const {
  if (method == Method::nn) {
    if (!nn)
      throw ContractViolation("FittedModel: nn model missing");
    return io::nn_model_to_json(*nn, nn_config);
  }
  Json j{{"method", harness::to_string(method)},
         {"B", io::matrix_to_json(b_hat.value())},
         {"kernel", io::kernel_config_to_json(kernel)}};
  if (smoother)
    j["smoother"] = io::smoother_to_json(*smoother);
  if (mave)
    j["mave"] = {{"iterations_used", mave->iterations_used},
                 {"objective_trace", mave->objective_trace},
                 {"converged", mave->converged},
                 {"rejected_step", mave->rejected_step}};
  return j;
}

FittedModel FittedModel::from_json(const Json &j) {
  FittedModel m;
  m.method = method_from_string(j.value("method", std::string("nn")));
  if (m.method == Method::nn) {
    m.nn = io::nn_model_from_json(j);
    m.b_hat = m.nn->b_hat;
    if (j.contains("config"))
      m.nn_config = io::nn_config_from_json(j["config"]);
    return m;
  }
  m.b_hat = StiefelMatrix(io::matrix_from_json(j.at("B")));
  if (j.contains("kernel"))
    m.kernel = io::kernel_config_from_json(j["kernel"]);
  if (j.contains("smoother"))
    m.smoother = io::smoother_from_json(j["smoother"]);
  if (j.contains("mave")) {
    const Json &mj = j["mave"];
    m.mave = baselines::MaveFit{m.b_hat, mj.value("iterations_used", Index{0}),
                                mj.value("objective_trace", std::vector<double>{}),
                                mj.value("converged", false), mj.value("rejected_step", false)};
  }
  return m;
}

FittedModel fit_method(Method method, const DataSet &train, Index k,
                       const MethodOverrides &overrides, std::uint64_t seed) {
  FittedModel out;
  out.method = method;
  out.kernel = overrides.kernel;
  switch (method) {
  case Method::nn: {
    nn::NnSdrConfig cfg = overrides.nn;
    cfg.k = k;
    cfg.rng_seed = seed;
    out.nn = nn::fit(train, cfg);
    out.nn_config = cfg;
    out.b_hat = out.nn->b_hat;
    return out;
  }
  case Method::opg:
    out.b_hat = baselines::opg_fit(train, k, overrides.kernel);
    break;
  case Method::mave: {
    const StiefelMatrix init = baselines::opg_fit(train, k, overrides.kernel);
    out.mave = baselines::mave_fit(train, k, overrides.kernel, init, overrides.mave_max_iters,
                                   overrides.mave_tol);
    out.b_hat = out.mave->b_hat;
    break;
  }
  }
  out.smoother = baselines::ReducedSmoother::build(train, out.b_hat, overrides.kernel);
  return out;
}

std::uint64_t data_seed(std::uint64_t base, sim::ModelId model, int replication, int part) {
  return mix_seed({base, static_cast<std::uint64_t>(model), static_cast<std::uint64_t>(replication),
                   static_cast<std::uint64_t>(part)});
}

std::uint64_t fit_seed(std::uint64_t base, sim::ModelId model, Method method, int replication) {
  return mix_seed({base, static_cast<std::uint64_t>(model), static_cast<std::uint64_t>(method),
                   static_cast<std::uint64_t>(replication)});
}

void BenchmarkConfig::validate() const {
  if (models.empty())
    throw ContractViolation("benchmark: models must be nonempty");
  if (methods.empty())
    throw ContractViolation("benchmark: methods must be nonempty");
  if (replications < 1)
    throw ContractViolation("benchmark: replications must be >= 1");
  if (test_size < 0)
    throw ContractViolation("benchmark: test_size must be >= 0");
  if (jobs < 1)
    throw ContractViolation("benchmark: jobs must be >= 1");
  if (n && *n < 2)
    throw ContractViolation("benchmark: n must be >= 2");
  for (sim::ModelId m : models) {
    if (p && *p < sim::minimum_p(m))
      throw ContractViolation("benchmark: p = " + std::to_string(*p) + " is too small for " +
                              sim::to_string(m));
  }
  overrides.kernel.validate();
  overrides.nn.stage1.validate();
  overrides.nn.stage2.validate();
}

BenchmarkConfig benchmark_config_from_json(const Json &j, BenchmarkConfig c) {
  if (!j.is_object())
    throw ContractViolation("benchmark config: expected a JSON object");
  if (auto it = j.find("models"); it != j.end()) {
    c.models.clear();
    for (const auto &m : *it)
      c.models.push_back(sim::model_from_string(m.get<std::string>()));
  }
  if (auto it = j.find("methods"); it != j.end()) {
    c.methods.clear();
    for (const auto &m : *it)
      c.methods.push_back(method_from_string(m.get<std::string>()));
  }
  c.replications = j.value("replications", c.replications);
  c.seed = j.value("seed", c.seed);
  if (auto it = j.find("n"); it != j.end())
    c.n = it->is_null() ? std::nullopt : std::optional<Index>(it->get<Index>());
  if (auto it = j.find("p"); it != j.end())
    c.p = it->is_null() ? std::nullopt : std::optional<Index>(it->get<Index>());
  c.test_size = j.value("test_size", c.test_size);
  if (auto it = j.find("m1_noise"); it != j.end()) {
    const auto name = it->get<std::string>();
    if (name == "quarter_variance")
      c.m1_noise = sim::M1NoiseScale::unit_quarter_variance;
    else if (name == "sqrt_half")
      c.m1_noise = sim::M1NoiseScale::sqrt_half;
    else
      throw ContractViolation("benchmark config: m1_noise must be quarter_variance or sqrt_half");
  }
  if (auto it = j.find("nn"); it != j.end())
    c.overrides.nn = io::nn_config_from_json(*it, c.overrides.nn);
  if (auto it = j.find("kernel"); it != j.end())
    c.overrides.kernel = io::kernel_config_from_json(*it, c.overrides.kernel);
  if (auto it = j.find("mave"); it != j.end()) {
    c.overrides.mave_max_iters = it->value("max_iters", c.overrides.mave_max_iters);
    c.overrides.mave_tol = it->value("tol", c.overrides.mave_tol);
  }
  c.record_timing = j.value("timing", c.record_timing);
  c.jobs = j.value("jobs", c.jobs);
  c.output_path = j.value("output", c.output_path);
  return c;
}

Json benchmark_config_to_json(const BenchmarkConfig &c) {
  Json models = Json::array();
  for (auto m : c.models)
    models.push_back(sim::to_string(m));
  Json methods = Json::array();
  for (auto m : c.methods)
    methods.push_back(to_string(m));
  Json j{{"models", models},
         {"methods", methods},
         {"replications", c.replications},
         {"seed", c.seed},
         {"n", c.n ? Json(*c.n) : Json(nullptr)},
         {"p", c.p ? Json(*c.p) : Json(nullptr)},
         {"test_size", c.test_size},
         {"m1_noise", c.m1_noise == sim::M1NoiseScale::sqrt_half ? "sqrt_half" : "quarter_variance"},
         {"nn", io::nn_config_to_json(c.overrides.nn)},
         {"kernel", io::kernel_config_to_json(c.overrides.kernel)},
         {"mave", {{"max_iters", c.overrides.mave_max_iters}, {"tol", c.overrides.mave_tol}}},
         {"timing", c.record_timing},
         {"jobs", c.jobs},
         {"output", c.output_path}};
  return j;
}

namespace {

std::string error_kind(const std::exception &e) {
  if (dynamic_cast<const DivergenceError *>(&e))
    return "divergence";
  if (dynamic_cast<const DegenerateProjection *>(&e))
    return "degenerate_projection";
  if (dynamic_cast<const DegenerateNeighborhood *>(&e))
    return "degenerate_neighborhood";
  if (dynamic_cast<const FactorizationError *>(&e))
    return "factorization";
  if (dynamic_cast<const ContractViolation *>(&e))
    return "contract";
  return "error";
}

std::string csv_safe(std::string s) {
  for (char &c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"')
      c = c == ',' ? ';' : ' ';
  return s;
}

std::string describe(const std::exception &e) {
  return error_kind(e) + ": " + csv_safe(e.what());
}

struct Task {
  sim::ModelId model;
  Method method;
  int replication;
};

sim::SimSpec sim_spec(const BenchmarkConfig &c, sim::ModelId model, Index n, std::uint64_t seed) {
  sim::SimSpec spec = sim::SimSpec::defaults(model, seed);
  spec.n = n;
  if (c.p)
    spec.p = *c.p;
  spec.m1_noise = c.m1_noise;
  return spec;
}

ResultRow run_task(const BenchmarkConfig &c, const Task &t) {
  ResultRow row;
  row.model = sim::to_string(t.model);
  row.method = to_string(t.method);
  row.replication = t.replication;
  row.seed = fit_seed(c.seed, t.model, t.method, t.replication);
  try {
    const Index n = c.n.value_or(sim::SimSpec::defaults(t.model).n);
    const sim::SimSample train =
        sim::generate(sim_spec(c, t.model, n, data_seed(c.seed, t.model, t.replication, 0)));
    Stopwatch clock;
    const FittedModel fit = fit_method(t.method, train.data, train.k, c.overrides, row.seed);
    const double elapsed = clock.seconds();
    if (c.record_timing)
      row.runtime_seconds = elapsed;
    row.acc_err = metrics::subspace_error(train.b_true, fit.b_hat);
    if (c.test_size > 0) {
      const sim::SimSample test = sim::generate(
          sim_spec(c, t.model, c.test_size, data_seed(c.seed, t.model, t.replication, 1)));
      row.mspe = metrics::mspe([&](const Vector &x) { return fit.predict(x); }, test.data);
    }
  } catch (const std::exception &e) {
    row.error = describe(e);
  }
  return row;
}

template <typename Fn> void parallel_for(std::size_t count, int jobs, Fn &&fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++)
        fn(i);
    });
  for (auto &th : pool)
    th.join();
}

std::string opt_number(const std::optional<double> &v) {
  return v ? format_double(*v) : std::string();
}

} // namespace

std::vector<ResultRow> run_benchmark(const BenchmarkConfig &config) {
  config.validate();
  std::vector<Task> tasks;
  for (auto model : config.models)
    for (auto method : config.methods)
      for (int r = 0; r < config.replications; ++r)
        tasks.push_back({model, method, r});
  std::vector<ResultRow> rows(tasks.size());
  parallel_for(tasks.size(), config.jobs,
               [&](std::size_t i) { rows[i] = run_task(config, tasks[i]); });
  return rows;
}

void write_results_csv(std::ostream &out, const std::vector<ResultRow> &rows) {
  out << "model,method,replication,seed,acc_err,mspe,runtime_seconds,error\n";
  for (const auto &r : rows) {
    out << r.model << ',' << r.method << ',' << r.replication << ',' << r.seed << ','
        << opt_number(r.acc_err) << ',' << opt_number(r.mspe) << ','
        << opt_number(r.runtime_seconds) << ',' << csv_safe(r.error) << '\n';
  }
}

void write_results_csv(const std::string &path, const std::vector<ResultRow> &rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  write_results_csv(out, rows);
}

Moments moments(const std::vector<double> &values) {
  Moments m;
  m.count = static_cast<Index>(values.size());
  if (values.empty())
    return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values)
      ss += (v - m.mean) * (v - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow> &rows) {
  struct Acc {
    Index reps = 0, failures = 0;
    std::vector<double> acc, mspe, runtime;
  };
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Acc> cells;
  for (const auto &r : rows) {
    auto key = std::make_pair(r.model, r.method);
    if (!cells.count(key))
      order.push_back(key);
    Acc &a = cells[key];
    ++a.reps;
    if (!r.error.empty()) {
      ++a.failures;
      continue;
    }
    if (r.acc_err)
      a.acc.push_back(*r.acc_err);
    if (r.mspe)
      a.mspe.push_back(*r.mspe);
    if (r.runtime_seconds)
      a.runtime.push_back(*r.runtime_seconds);
  }
  std::vector<SummaryRow> out;
  for (const auto &key : order) {
    const Acc &a = cells[key];
    out.push_back({key.first, key.second, a.reps, a.failures, moments(a.acc), moments(a.mspe),
                   moments(a.runtime)});
  }
  return out;
}

void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows) {
  out << "model,method,replications,failures,acc_err_mean,acc_err_sd,mspe_mean,mspe_sd,"
         "runtime_mean,runtime_sd\n";
  auto cell = [](const Moments &m, double v) {
    return m.count > 0 ? format_double(v) : std::string();
  };
  for (const auto &s : rows) {
    out << s.model << ',' << s.method << ',' << s.replications << ',' << s.failures << ','
        << cell(s.acc_err, s.acc_err.mean) << ',' << cell(s.acc_err, s.acc_err.sd) << ','
        << cell(s.mspe, s.mspe.mean) << ',' << cell(s.mspe, s.mspe.sd) << ','
        << cell(s.runtime_seconds, s.runtime_seconds.mean) << ','
        << cell(s.runtime_seconds, s.runtime_seconds.sd) << '\n';
  }
}

std::string summary_path(const std::string &results_path) {
  const auto dot = results_path.find_last_of('.');
  const auto slash = results_path.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return results_path + ".summary.csv";
  return results_path.substr(0, dot) + ".summary.csv";
}

void ScalingConfig::validate() const {
  if (sizes.empty())
    throw ContractViolation("scaling: sizes must be nonempty");
  for (const auto &[n, p] : sizes) {
    if (n < 2 || p < sim::minimum_p(model))
      throw ContractViolation("scaling: invalid size (" + std::to_string(n) + ", " +
                              std::to_string(p) + ")");
  }
  overrides.kernel.validate();
}

std::vector<ScalingRow> run_scaling(const ScalingConfig &config) {
  config.validate();
  std::vector<ScalingRow> rows;
  int e1 = config.overrides.nn.stage1.epochs;
  int e2 = config.overrides.nn.stage2.epochs;
  for (std::size_t i = 0; i < config.sizes.size(); ++i) {
    if (i > 0 && config.halve_epochs) {
      e1 = std::max(1, e1 / 2);
      e2 = std::max(1, e2 / 2);
    }
    const auto [n, p] = config.sizes[i];
    ScalingRow row;
    row.n = n;
    row.p = p;
    row.stage1_epochs = e1;
    row.stage2_epochs = e2;
    row.seed = mix_seed({config.seed, static_cast<std::uint64_t>(config.model),
                         static_cast<std::uint64_t>(config.method), static_cast<std::uint64_t>(n),
                         static_cast<std::uint64_t>(p)});
    try {
      sim::SimSpec spec = sim::SimSpec::defaults(config.model, mix_seed({row.seed, 0}));
      spec.n = n;
      spec.p = p;
      const sim::SimSample sample = sim::generate(spec);
      MethodOverrides ov = config.overrides;
      ov.nn.stage1.epochs = e1;
      ov.nn.stage2.epochs = e2;
      Stopwatch clock;
      const FittedModel fit = fit_method(config.method, sample.data, sample.k, ov, row.seed);
      const double elapsed = clock.seconds();
      if (config.record_timing)
        row.runtime_seconds = elapsed;
      row.acc_err = metrics::subspace_error(sample.b_true, fit.b_hat);
    } catch (const std::exception &e) {
      row.error = describe(e);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_scaling_csv(std::ostream &out, const std::vector<ScalingRow> &rows) {
  out << "n,p,stage1_epochs,stage2_epochs,seed,acc_err,runtime_seconds,error\n";
  for (const auto &r : rows)
    out << r.n << ',' << r.p << ',' << r.stage1_epochs << ',' << r.stage2_epochs << ',' << r.seed
        << ',' << opt_number(r.acc_err) << ',' << opt_number(r.runtime_seconds) << ','
        << csv_safe(r.error) << '\n';
}

std::vector<std::vector<Index>> kfold_indices(Index n, int folds, std::uint64_t seed) {
  if (folds < 2 || n < folds)
    throw ContractViolation("kfold: need 2 <= folds <= n");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    const Index lo = n * f / folds, hi = n * (f + 1) / folds;
    out[static_cast<std::size_t>(f)].assign(perm.begin() + lo, perm.begin() + hi);
  }
  return out;
}

Stopwatch::Stopwatch()
    : start_ns_(std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now().time_since_epoch())
                    .count()) {}

double Stopwatch::seconds() const {
  const auto now = std::chrono::duration_cast<std::chrono::nanoseconds>(
                       std::chrono::steady_clock::now().time_since_epoch())
                       .count();
  return static_cast<double>(now - start_ns_) * 1e-9;
}

} // namespace nnsdr::harness
