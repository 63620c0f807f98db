#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "osap/dynamics.hpp"
#include "osap/mlp.hpp"
#include "osap/solver.hpp"

namespace osap {

struct ControllerOutput {
  Vec u;
  std::optional<Mat> P;  // Lyapunov matrix when the scheme produces one
  SolveStatus status = SolveStatus::optimal;
};

/// A feedback law bound to one reference; pure and deterministic.
struct Controller {
  std::string name;
  std::function<ControllerOutput(const Vec& x, int t)> act;
};

Controller make_osap_controller(const SystemModel& model, const SolverConfig& cfg, const Vec& r);
Controller make_nn_controller(const MlpParameters& params, const Vec& r);
/// Horizon-one LQR on the local linearization (no Lyapunov output).
Controller make_lqr1_controller(const SystemModel& model, const Mat& Ru, const Mat& Rf,
                                const Vec& r);
/// Relinearize-and-DARE at every step (no Lyapunov output).
Controller make_ilqr_controller(const SystemModel& model, const Mat& Qx, const Mat& Qu,
                                const Vec& r);

struct SimConfig {
  Vec x0;
  Vec r;
  int steps = 100;
  bool record_P = true;
  double safety_factor = 10.0;  // divergence box, as a multiple of X about its center

  void validate() const;
};

struct SimulationTrace {
  std::vector<Vec> states;           // x(0..T)
  std::vector<Vec> inputs;           // u(0..T-1)
  std::vector<Mat> P_seq;            // P(0..T-1) when recorded
  std::vector<double> V;             // V(x(t), r, P(t)), t = 0..T-1
  std::vector<double> dV;            // V(t+1) - V(t), t = 0..T-2
  std::vector<double> step_seconds;  // controller evaluation time per step
  std::vector<SolveStatus> statuses;
  Vec x_bar;
  double terminal_error = 0.0;  // ||x(T) - x_bar||
  double pi = 0.0;              // sum of ||x(t)|| over all recorded states
};

SimulationTrace simulate(const SystemModel& model, const Controller& controller,
                         const SimConfig& cfg);

double performance_index(const SimulationTrace& trace);

struct BatchStats {
  std::string controller_name;
  double mean_pi = 0.0;
  double min_pi = 0.0;
  double max_pi = 0.0;
  double mean_step_seconds = 0.0;
  int diverged = 0;
  std::vector<double> pis;  // indexed by draw; NaN where diverged
};

/// Runs every controller from the same seeded draws of x0 in `init_box`.
/// Divergent runs are excluded from the statistics and counted.
std::vector<BatchStats> batch_experiments(const SystemModel& model,
                                          const std::vector<Controller>& controllers, int count,
                                          const Box& init_box, std::uint64_t seed, const Vec& r,
                                          int steps = 100, int workers = 1);

/// Per-step wall-time ratio slow/fast, e.g. solver vs NN.
double timing_report(const BatchStats& slow, const BatchStats& fast);

/// Trace writers are byte-reproducible by default: the solve_ms column is
/// left empty unless `include_timings` is set, since wall times vary run to
/// run while every other field is deterministic.
void write_trace_csv(const SimulationTrace& trace, const std::string& path,
                     bool include_timings = false);
void write_trace_jsonl(const SimulationTrace& trace, const std::string& path,
                       const std::string& model_id, std::uint64_t config_hash,
                       bool include_timings = false);
/// Phase-portrait plot data: per-step position and displacement vectors.
void write_phase_csv(const SimulationTrace& trace, const std::string& path);
void write_dv_csv(const SimulationTrace& trace, const std::string& path);

}  // namespace osap
