#include <benchmark/benchmark.h>

#include "osap/mlp.hpp"
#include "osap/rng.hpp"

namespace {

using namespace osap;

MlpParameters bench_params() {
  MlpArchitecture arch;
  arch.input_dim = 3;
  arch.hidden = {8, 32, 64, 64, 32, 16};
  arch.output_dim = 4;
  MlpParameters params = mlp_init(arch, 7);
  params.n = 2;
  params.p = 1;
  return params;
}

void BM_forward(benchmark::State& state) {
  const MlpParameters params = bench_params();
  Rng rng(5);
  std::vector<Vec> states;
  for (int i = 0; i < 64; ++i) {
    Vec x(2);
    x << rng.uniform(-5, 5), rng.uniform(-5, 5);
    states.push_back(x);
  }
  const Vec r = Vec::Zero(1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(params, states[i++ % states.size()], r));
  }
}
BENCHMARK(BM_forward)->Unit(benchmark::kNanosecond);

void BM_train_epoch(benchmark::State& state) {
  // one epoch over 1024 synthetic samples with the benchmark architecture
  TrainingDataset ds;
  Rng rng(6);
  for (int i = 0; i < 1024; ++i) {
    TrainingSample s;
    s.x = Vec(2);
    s.x << rng.uniform(-5, 5), rng.uniform(-5, 5);
    s.r = Vec::Constant(1, rng.uniform(-1, 1));
    s.u = Vec::Constant(1, rng.gaussian());
    s.P_packed = Vec(3);
    s.P_packed << 1.0 + 0.1 * rng.gaussian(), 0.1 * rng.gaussian(), 1.0 + 0.1 * rng.gaussian();
    ds.samples.push_back(std::move(s));
  }
  MlpArchitecture arch;
  arch.hidden = {8, 32, 64, 64, 32, 16};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 128;
  cfg.dropout_rate = 0.02;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_train(ds, {}, arch, cfg));
  }
}
BENCHMARK(BM_train_epoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
