#include <benchmark/benchmark.h>

#include "nnsdr/baselines.hpp"
#include "nnsdr/mlp.hpp"
#include "nnsdr/nn_sdr.hpp"
#include "nnsdr/simgen.hpp"

using namespace nnsdr;

namespace {

mlp::MlpParams stage1_net(Index p, Rng &rng) {
  nn::NnSdrConfig cfg;
  const auto specs = nn::stage1_architecture(p, cfg);
  return mlp::glorot_init(specs, rng);
}

DataSet m6_data(Index n, Index p) {
  sim::SimSpec spec = sim::SimSpec::defaults(sim::ModelId::M6, 1);
  spec.n = n;
  spec.p = p;
  return sim::generate(spec).data;
}

} // namespace

static void BM_ForwardBatch(benchmark::State &state) {
  Rng rng(1);
  const Index p = 20;
  const auto net = stage1_net(p, rng);
  const Matrix x = Matrix::Random(p, state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(mlp::forward_batch(net, x, &rng).output);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(32)->Arg(256);

static void BM_ForwardBackward(benchmark::State &state) {
  Rng rng(2);
  const Index p = 20;
  const auto net = stage1_net(p, rng);
  const Matrix x = Matrix::Random(p, state.range(0));
  const Matrix upstream = Matrix::Ones(1, state.range(0));
  for (auto _ : state) {
    const auto cache = mlp::forward_batch(net, x, &rng);
    benchmark::DoNotOptimize(mlp::backward(net, cache, upstream));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(256);

static void BM_GradInputRows(benchmark::State &state) {
  Rng rng(3);
  const auto net = stage1_net(20, rng);
  const Matrix x = Matrix::Random(state.range(0), 20);
  for (auto _ : state)
    benchmark::DoNotOptimize(mlp::grad_input_rows(net, x));
}
BENCHMARK(BM_GradInputRows)->Arg(200)->Arg(2000);

static void BM_LocalLinear(benchmark::State &state) {
  const DataSet d = m6_data(state.range(0), 20);
  const baselines::KernelConfig cfg;
  const double h = baselines::bandwidth(cfg, d.n(), d.p());
  for (auto _ : state)
    benchmark::DoNotOptimize(baselines::local_linear(d, d.x, h, cfg.ridge).b);
}
BENCHMARK(BM_LocalLinear)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_OpgFit(benchmark::State &state) {
  const DataSet d = m6_data(state.range(0), 20);
  for (auto _ : state)
    benchmark::DoNotOptimize(baselines::opg_fit(d, 3, baselines::KernelConfig{}));
}
BENCHMARK(BM_OpgFit)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_PolarRetract(benchmark::State &state) {
  const Matrix m = Matrix::Random(state.range(0), 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(linalg::polar_retract(m));
}
BENCHMARK(BM_PolarRetract)->Arg(20)->Arg(500);
BENCHMARK_MAIN();
