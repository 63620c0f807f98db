#include <benchmark/benchmark.h>

#include "osap/dynamics.hpp"
#include "osap/rng.hpp"
#include "osap/solver.hpp"

namespace {

using namespace osap;

void BM_solve_pendulum(benchmark::State& state) {
  const SystemModel mdl = make_model("pendulum");
  SolverConfig cfg = default_solver_config(mdl);
  cfg.theta = 0.01;
  const SteadyStatePair ss = steady_state(mdl, Vec::Zero(1));
  Rng rng(1);
  std::vector<Vec> states;
  for (int i = 0; i < 64; ++i) {
    Vec x(2);
    x << rng.uniform(-5, 5), rng.uniform(-5, 5);
    states.push_back(x);
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_at(mdl, states[i++ % states.size()], ss, cfg));
  }
}
BENCHMARK(BM_solve_pendulum)->Unit(benchmark::kMillisecond);

void BM_solve_scalar(benchmark::State& state) {
  const SystemModel mdl = make_model("scalar");
  const SolverConfig cfg = default_solver_config(mdl);
  const SteadyStatePair ss = steady_state(mdl, Vec::Zero(1));
  Rng rng(2);
  std::vector<Vec> states;
  for (int i = 0; i < 64; ++i) states.push_back(Vec::Constant(1, rng.uniform(-2, 2)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_at(mdl, states[i++ % states.size()], ss, cfg));
  }
}
BENCHMARK(BM_solve_scalar)->Unit(benchmark::kMicrosecond);

void BM_dare_pendulum(benchmark::State& state) {
  const SystemModel mdl = make_model("pendulum");
  const LinearizedDynamics lin = linearize(mdl, Vec::Zero(2));
  const Mat Qx = 2.0 * Mat::Identity(2, 2);
  const Mat Qu = 0.1 * Mat::Identity(1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dare(lin.A, lin.B, Qx, Qu));
  }
}
BENCHMARK(BM_dare_pendulum)->Unit(benchmark::kMicrosecond);

void BM_steady_state_pendulum(benchmark::State& state) {
  const SystemModel mdl = make_model("pendulum");
  Rng rng(3);
  std::size_t i = 0;
  std::vector<Vec> refs;
  for (int k = 0; k < 16; ++k) refs.push_back(Vec::Constant(1, rng.uniform(-1, 1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(steady_state(mdl, refs[i++ % refs.size()]));
  }
}
BENCHMARK(BM_steady_state_pendulum)->Unit(benchmark::kMicrosecond);

}  // namespace
