// nnsdr: simulate data, fit reductions, predict, and run benchmark studies.
//
// Option precedence for benchmark and scaling: built-in defaults, then the
// --config JSON file, then command-line flags.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "nnsdr/dataset.hpp"
#include "nnsdr/errors.hpp"
#include "nnsdr/harness.hpp"
#include "nnsdr/metrics.hpp"
#include "nnsdr/serialize.hpp"
#include "nnsdr/simgen.hpp"

using namespace nnsdr;
using Json = nlohmann::json;

namespace {

std::string stem_with(const std::string &path, const std::string &suffix) {
  std::filesystem::path p(path);
  p.replace_extension(suffix);
  return p.string();
}

std::vector<std::pair<Index, Index>> parse_sizes(const std::string &text) {
  std::vector<std::pair<Index, Index>> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos)
      throw ContractViolation("sizes: expected NxP entries, got \"" + item + "\"");
    sizes.emplace_back(std::stoll(item.substr(0, x)), std::stoll(item.substr(x + 1)));
  }
  return sizes;
}

std::ostream &open_out(const std::string &path, std::ofstream &file) {
  if (path.empty() || path == "-")
    return std::cout;
  file.open(path, std::ios::binary);
  if (!file)
    throw std::runtime_error("cannot write " + path);
  return file;
}

struct SimulateArgs {
  std::string model = "M6";
  Index n = 0, p = 0;
  std::uint64_t seed = 0;
  std::string out;
  double noise = -1.0;
  std::string m1_noise = "quarter_variance";
};

int cmd_simulate(const SimulateArgs &a) {
  sim::SimSpec spec = sim::SimSpec::defaults(sim::model_from_string(a.model), a.seed);
  if (a.n > 0)
    spec.n = a.n;
  if (a.p > 0)
    spec.p = a.p;
  if (a.noise >= 0.0)
    spec.noise_multiplier = a.noise;
  spec.m1_noise = a.m1_noise == "sqrt_half" ? sim::M1NoiseScale::sqrt_half
                                            : sim::M1NoiseScale::unit_quarter_variance;
  const sim::SimSample s = sim::generate(spec);
  write_dataset_csv(a.out, s.data);
  io::write_json_file(io::sidecar_path(a.out), io::truth_to_json({spec.model, s.k, spec.seed, s.b_true}));
  std::cerr << "wrote " << a.out << " (" << s.data.n() << " x " << s.data.p() << "), k = " << s.k
            << '\n';
  return 0;
}

struct FitArgs {
  std::string data;
  std::string method = "nn";
  Index k = 0;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
};

int cmd_fit(const FitArgs &a) {
  const DataSet data = read_dataset_csv(a.data);
  std::optional<io::Truth> truth;
  if (std::filesystem::exists(io::sidecar_path(a.data)))
    truth = io::truth_from_json(io::read_json_file(io::sidecar_path(a.data)));
  const Index k = a.k > 0 ? a.k : (truth ? truth->k : 0);
  if (k < 1)
    throw ContractViolation("fit: --k is required when the dataset has no truth sidecar");
  if (k >= data.p())
    throw ContractViolation("fit: need k < p (k = " + std::to_string(k) +
                            ", p = " + std::to_string(data.p()) + ")");

  harness::BenchmarkConfig cfg;
  if (!a.config.empty())
    cfg = harness::benchmark_config_from_json(io::read_json_file(a.config), cfg);
  const harness::Method method = harness::method_from_string(a.method);

  harness::Stopwatch clock;
  const harness::FittedModel fit = harness::fit_method(method, data, k, cfg.overrides, a.seed);
  const double elapsed = clock.seconds();

  io::write_json_file(a.out, fit.to_json());
  Json report{{"method", a.method},
              {"seed", a.seed},
              {"k", k},
              {"runtime_seconds", elapsed},
              {"mspe_in_sample",
               metrics::mspe([&](const Vector &x) { return fit.predict(x); }, data)}};
  if (truth) {
    report["model"] = sim::to_string(truth->model);
    if (truth->b_true.rows() == fit.b_hat.rows())
      report["acc_err"] = metrics::subspace_error(truth->b_true, fit.b_hat);
  }
  if (fit.mave) {
    report["iterations_used"] = fit.mave->iterations_used;
    report["converged"] = fit.mave->converged;
  }
  const std::string report_path = a.report.empty() ? stem_with(a.out, ".report.json") : a.report;
  io::write_json_file(report_path, report);
  std::cout << report.dump() << '\n';
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_predict(const PredictArgs &a) {
  const harness::FittedModel fit = harness::FittedModel::from_json(io::read_json_file(a.model));
  std::ifstream in(a.data);
  if (!in)
    throw std::runtime_error("cannot open " + a.data);
  const CsvTable table = read_csv_table(in);
  const bool has_y = !table.header.empty() && table.header.front() == "Y";
  const Matrix x = has_y ? Matrix(table.values.rightCols(table.values.cols() - 1)) : table.values;
  std::ofstream file;
  std::ostream &out = open_out(a.out, file);
  out << "yhat\n";
  double sse = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double yhat = fit.predict(x.row(i).transpose());
    out << format_double(yhat) << '\n';
    if (has_y)
      sse += (table.values(i, 0) - yhat) * (table.values(i, 0) - yhat);
  }
  if (has_y && x.rows() > 0)
    std::cerr << "mspe " << format_double(sse / static_cast<double>(x.rows())) << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sufficient dimension reduction: simulation, estimation and benchmarks"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto *simulate = app.add_subcommand("simulate", "Generate a simulated dataset and truth sidecar");
  simulate->add_option("--model", sa.model, "M1..M7 or MC")->capture_default_str();
  simulate->add_option("--n", sa.n, "Sample size (model default when omitted)");
  simulate->add_option("--p", sa.p, "Number of predictors (model default when omitted)");
  simulate->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sa.out, "Output CSV path")->required();
  simulate->add_option("--noise-multiplier", sa.noise, "Override the noise multiplier");
  simulate->add_option("--m1-noise", sa.m1_noise, "quarter_variance or sqrt_half")
      ->check(CLI::IsMember({"quarter_variance", "sqrt_half"}))
      ->capture_default_str();
  simulate->add_option("--config", "Unused; accepted for uniformity");
  simulate->add_option("--jobs", "Unused; accepted for uniformity");

  FitArgs fa;
  auto *fit = app.add_subcommand("fit", "Estimate a reduction from a dataset CSV");
  fit->add_option("--data", fa.data, "Dataset CSV (Y,X1..Xp)")->required();
  fit->add_option("--method", fa.method, "nn, opg or mave")
      ->check(CLI::IsMember({"nn", "opg", "mave"}))
      ->capture_default_str();
  fit->add_option("--k", fa.k, "Reduction dimension (read from the sidecar when omitted)");
  fit->add_option("--config", fa.config, "JSON with nn / kernel / mave sections");
  fit->add_option("--seed", fa.seed, "Random seed")->capture_default_str();
  fit->add_option("--out", fa.out, "Model JSON path")->required();
  fit->add_option("--report", fa.report, "Report JSON path (default: --out with extension .report.json)");
  fit->add_option("--jobs", "Unused; accepted for uniformity");

  PredictArgs pa;
  auto *predict = app.add_subcommand("predict", "Predict responses with a fitted model");
  predict->add_option("--model", pa.model, "Model JSON written by fit")->required();
  predict->add_option("--data", pa.data, "CSV of predictors, with or without a leading Y column")
      ->required();
  predict->add_option("--out", pa.out, "Output CSV (stdout when omitted)");
  predict->add_option("--seed", "Unused; accepted for uniformity");
  predict->add_option("--config", "Unused; accepted for uniformity");
  predict->add_option("--jobs", "Unused; accepted for uniformity");

  std::string bench_config, bench_out, bench_models, bench_methods;
  std::uint64_t bench_seed = 0;
  int bench_reps = 0, bench_jobs = 0;
  Index bench_n = 0, bench_p = 0, bench_test = -1;
  bool no_timing = false;
  auto *bench = app.add_subcommand("benchmark", "Replicated simulation study");
  bench->add_option("--config", bench_config, "Benchmark JSON");
  bench->add_option("--models", bench_models, "Comma-separated model ids");
  bench->add_option("--methods", bench_methods, "Comma-separated methods");
  auto *bench_seed_opt = bench->add_option("--seed", bench_seed, "Base seed");
  bench->add_option("--replications", bench_reps, "Replications per cell");
  bench->add_option("--n", bench_n, "Training sample size");
  bench->add_option("--p", bench_p, "Number of predictors");
  bench->add_option("--test-size", bench_test, "Test sample size (0 disables MSPE)");
  bench->add_flag("--no-timing", no_timing, "Leave runtime empty for reproducible output");
  bench->add_option("--jobs", bench_jobs, "Parallel replications");
  bench->add_option("--out", bench_out, "Results CSV path (stdout when omitted)");

  std::string sc_config, sc_out, sc_model = "M6", sc_method = "nn", sc_sizes;
  std::uint64_t sc_seed = 0;
  int sc_e1 = 0, sc_e2 = 0;
  bool sc_halve = false, sc_no_timing = false;
  auto *scaling = app.add_subcommand("scaling", "Fit once per (n, p) and record runtime");
  scaling->add_option("--config", sc_config, "JSON with nn / kernel sections");
  scaling->add_option("--model", sc_model, "Model id")->capture_default_str();
  scaling->add_option("--method", sc_method, "nn, opg or mave")->capture_default_str();
  scaling->add_option("--sizes", sc_sizes, "Comma-separated NxP, e.g. 1000x32,4000x63")
      ->required();
  scaling->add_option("--epochs1", sc_e1, "Stage-1 epochs at the first size");
  scaling->add_option("--epochs2", sc_e2, "Stage-2 epochs at the first size");
  scaling->add_flag("--halve-epochs", sc_halve, "Halve epochs at every subsequent size");
  scaling->add_flag("--no-timing", sc_no_timing, "Leave runtime empty");
  scaling->add_option("--seed", sc_seed, "Base seed")->capture_default_str();
  scaling->add_option("--out", sc_out, "Timing CSV path (stdout when omitted)");
  scaling->add_option("--jobs", "Unused; sizes run sequentially");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate)
      return cmd_simulate(sa);
    if (*fit)
      return cmd_fit(fa);
    if (*predict)
      return cmd_predict(pa);
    if (*bench) {
      harness::BenchmarkConfig cfg;
      if (!bench_config.empty())
        cfg = harness::benchmark_config_from_json(io::read_json_file(bench_config), cfg);
      auto split = [](const std::string &s) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        for (std::string item; std::getline(ss, item, ',');)
          if (!item.empty())
            parts.push_back(item);
        return parts;
      };
      if (!bench_models.empty()) {
        cfg.models.clear();
        for (const auto &m : split(bench_models))
          cfg.models.push_back(sim::model_from_string(m));
      }
      if (!bench_methods.empty()) {
        cfg.methods.clear();
        for (const auto &m : split(bench_methods))
          cfg.methods.push_back(harness::method_from_string(m));
      }
      if (bench_seed_opt->count())
        cfg.seed = bench_seed;
      if (bench_reps > 0)
        cfg.replications = bench_reps;
      if (bench_n > 0)
        cfg.n = bench_n;
      if (bench_p > 0)
        cfg.p = bench_p;
      if (bench_test >= 0)
        cfg.test_size = bench_test;
      if (no_timing)
        cfg.record_timing = false;
      if (bench_jobs > 0)
        cfg.jobs = bench_jobs;
      if (!bench_out.empty())
        cfg.output_path = bench_out;

      const auto rows = harness::run_benchmark(cfg);
      const auto summary = harness::summarize(rows);
      if (cfg.output_path.empty() || cfg.output_path == "-") {
        harness::write_results_csv(std::cout, rows);
        std::cout << '\n';
        harness::write_summary_csv(std::cout, summary);
      } else {
        harness::write_results_csv(cfg.output_path, rows);
        std::ofstream s(harness::summary_path(cfg.output_path), std::ios::binary);
        harness::write_summary_csv(s, summary);
        harness::write_summary_csv(std::cerr, summary);
      }
      return 0;
    }
    if (*scaling) {
      harness::ScalingConfig cfg;
      if (!sc_config.empty()) {
        const auto b = harness::benchmark_config_from_json(io::read_json_file(sc_config));
        cfg.overrides = b.overrides;
        cfg.seed = b.seed;
      }
      cfg.model = sim::model_from_string(sc_model);
      cfg.method = harness::method_from_string(sc_method);
      cfg.sizes = parse_sizes(sc_sizes);
      if (scaling->get_option("--seed")->count())
        cfg.seed = sc_seed;
      if (sc_e1 > 0)
        cfg.overrides.nn.stage1.epochs = sc_e1;
      if (sc_e2 > 0)
        cfg.overrides.nn.stage2.epochs = sc_e2;
      cfg.halve_epochs = sc_halve;
      cfg.record_timing = !sc_no_timing;
      const auto rows = harness::run_scaling(cfg);
      std::ofstream file;
      harness::write_scaling_csv(open_out(sc_out, file), rows);
      return 0;
    }
  } catch (const ParseError &e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
