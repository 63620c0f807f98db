// Acceptance suite: runs every exit criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.
//
// The pendulum pipeline artifacts (subsampled dataset, trained network,
// bound report) are built once and shared by the criteria that need them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "osap/closed_loop.hpp"
#include "osap/dataset.hpp"
#include "osap/mlp.hpp"
#include "osap/roa.hpp"
#include "osap/rng.hpp"
#include "osap/sym.hpp"

using namespace osap;

namespace {

struct Checker {
  int failures = 0;
  std::vector<std::string> notes;
  bool ok = true;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      notes.push_back(what);
    }
  }
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}
Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// brute-force oracle for the scalar integrator (duplicated from the unit
// oracles on purpose: the acceptance gate carries its own reference)
struct ScalarOracle {
  double cost = std::numeric_limits<double>::infinity();
  bool feasible = false;
};

ScalarOracle scalar_oracle(double x, double theta, double qx, double qu, double eps, double cap,
                           double u_step = 1e-3, double p_step = 1e-3) {
  ScalarOracle best;
  const double u_lo = std::min(0.0, -2.0 * x);
  const double u_hi = std::max(0.0, -2.0 * x);
  const long nu = static_cast<long>((u_hi - u_lo) / u_step) + 1;
  const long np = static_cast<long>((cap - eps) / p_step) + 1;
  const double ax = std::abs(x);
  for (long iu = 0; iu < nu; ++iu) {
    const double u = u_lo + u_step * iu;
    const double xp = x + u;
    const double axp = std::abs(xp);
    const double base = qx * xp * xp + qu * u * u;
    if (base > best.cost) continue;
    long ip0 = 0;
    if (axp > ax || (axp == ax && ax > 0.0)) continue;
    if (ax > 0.0) {
      const double sq_min = theta * ax / (ax - axp);
      ip0 = static_cast<long>(std::ceil((sq_min * sq_min - eps) / p_step));
      if (ip0 < 0) ip0 = 0;
    }
    for (long ip = ip0; ip < np; ++ip) {
      const double p = eps + p_step * ip;
      if (std::sqrt(p) * (axp - ax) + theta * ax > 0.0) continue;
      const double cost = base + p * x * x;
      if (cost < best.cost) {
        best.cost = cost;
        best.feasible = true;
      }
      break;
    }
  }
  return best;
}

// shared pipeline artifacts
struct Pipeline {
  SystemModel pendulum = make_model("pendulum");
  SolverConfig cfg;           // theta = 0.01 benchmark configuration
  TrainingDataset dataset;    // 5000-point subsample of the full grid
  TrainingDataset train_set;
  TrainingDataset val_set;
  TrainResult trained;
  ImitationGap gap;
  ModelConstants constants;
  BoundReport report;         // sigma/theta_min/vartheta from measured parts
  bool retrained = false;

  Pipeline() { cfg = default_solver_config(pendulum); }

  void build_dataset_once() {
    if (!dataset.samples.empty()) return;
    GridSpec xs, rs;
    xs.lower = Vec::Constant(2, -5);
    xs.upper = Vec::Constant(2, 5);
    xs.step = Vec::Constant(2, 0.1);
    rs.lower = Vec::Constant(1, -1);
    rs.upper = Vec::Constant(1, 1);
    rs.step = Vec::Constant(1, 0.1);
    const auto all_points = generate_grid(xs, rs);
    Rng rng(101);
    std::vector<std::pair<Vec, Vec>> pts;
    pts.reserve(5000);
    for (int i = 0; i < 5000; ++i)
      pts.push_back(all_points[rng.uniform_index(all_points.size())]);
    dataset = build_dataset(pendulum, pts, cfg, 1);
    dataset.meta.xs = xs;
    dataset.meta.rs = rs;
    std::tie(train_set, val_set) = split(dataset, 0.1, 11);
    constants = estimate_constants(pendulum, 101);
  }

  TrainConfig train_config(int epochs) const {
    TrainConfig tc;
    tc.lr0 = 1e-3;
    tc.epochs = epochs;
    tc.batch_size = 128;
    tc.dropout_rate = 0.02;
    tc.seed = 3;
    return tc;
  }

  void train_once(int epochs = 2000) {
    if (!trained.curve.empty() && !retrained) return;
    build_dataset_once();
    MlpArchitecture arch;
    arch.hidden = {8, 32, 64, 64, 32, 16};
    arch.activation = Activation::relu;
    trained = mlp_train(train_set, val_set, arch, train_config(epochs));
    gap = measure_gap(trained.params, val_set);
    refresh_report();
  }

  void refresh_report() {
    const auto [lo, hi] = dataset_p_extrema(dataset);
    const SteadyStatePair ss = steady_state(pendulum, vec1(0));
    const double g_norm = pendulum.g(ss.x_bar).jacobiSvd().singularValues()[0];
    report = make_bound_report(constants, lo, hi, gap, cfg.theta, g_norm);
  }
};

using Criterion = std::function<void(Checker&, Pipeline&)>;

void c01_solver_feasibility(Checker& chk, Pipeline& pl) {
  const double t0 = now_seconds();
  Rng rng(1);
  int checked = 0;
  for (int k = 0; k < 500; ++k) {
    const Vec x = vec2(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Vec r = vec1(rng.uniform(-1, 1));
    const ControlSolution sol = solve(pl.pendulum, x, r, pl.cfg);
    if (sol.status == SolveStatus::infeasible) {
      chk.require(false, "infeasible solve at sample " + std::to_string(k));
      continue;
    }
    const SteadyStatePair ss = steady_state(pl.pendulum, r);
    const double resid = decrease_residual(x, sol.x_plus, ss.x_bar, sol.P_star.P(), pl.cfg.theta);
    chk.require(resid <= 1e-6, "re-checked residual " + std::to_string(resid));
    chk.require(sol.P_star.lambda_min() >= pl.cfg.eps_P - 1e-12, "lambda_min below eps");
    ++checked;
  }
  chk.require(checked == 500, "not all samples checked");
  chk.require(now_seconds() - t0 < 300.0, "runtime above 5 minutes");
}

void c02_scalar_oracle(Checker& chk, Pipeline&) {
  const double t0 = now_seconds();
  const SystemModel mdl = make_model("scalar");
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const double mag = rng.uniform(0.3, 2.5);
    const double x = rng.uniform01() < 0.5 ? mag : -mag;
    const double theta = rng.uniform(0.05, 0.15);
    SolverConfig cfg = default_solver_config(mdl);
    cfg.theta = theta;
    const ScalarOracle oracle = scalar_oracle(x, theta, 1.0, 0.1, cfg.eps_P, cfg.cap_P);
    if (!oracle.feasible) {
      chk.require(false, "oracle infeasible (instance construction bug)");
      continue;
    }
    const ControlSolution sol = solve(mdl, vec1(x), vec1(0), cfg);
    chk.require(sol.status != SolveStatus::infeasible, "solver infeasible on the scalar system");
    chk.require(sol.cost <= 1.01 * oracle.cost,
                "cost " + std::to_string(sol.cost) + " vs oracle " + std::to_string(oracle.cost));
  }
  chk.require(now_seconds() - t0 < 60.0, "runtime above 1 minute");
}

void c03_lqr1_equivalence(Checker& chk, Pipeline&) {
  const SystemModel mdl = make_model("drone-x");
  SolverConfig cfg = default_solver_config(mdl);
  Mat P0(2, 2);
  P0 << 2.0, 0.3, 0.3, 1.0;
  cfg.freeze_P = P0;
  cfg.enforce_decrease = false;
  const SteadyStatePair ss = steady_state(mdl, vec1(0));
  const LinearizedDynamics lin = linearize(mdl, ss.x_bar);
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Vec x = vec2(rng.uniform(-0.5, 0.5), rng.uniform(-1, 1));
    const ControlSolution sol = solve_at(mdl, x, ss, cfg);
    const Vec u_closed = lqr_one_step(lin.A, lin.B, x, ss.x_bar, ss.u_bar, P0, cfg.Qu, cfg.Qx);
    chk.require((sol.u_star - u_closed).cwiseAbs().maxCoeff() <= 1e-6,
                "u mismatch at sample " + std::to_string(k));
  }
}

void c04_dare_fixture(Checker& chk, Pipeline&) {
  const Mat I1 = Mat::Identity(1, 1);
  const DareResult golden = dare(I1, I1, I1, I1);
  chk.require(std::abs(golden.P(0, 0) - 1.6180339887) <= 1e-8, "golden-ratio fixed point");

  // iterative relinearization on a linear plant equals the offline gain bitwise
  const SystemModel mdl = make_model("drone-x");
  const Mat Qx = 20.0 * Mat::Identity(2, 2);
  const Mat Qu = 0.1 * I1;
  const SteadyStatePair ss = steady_state(mdl, vec1(0));
  const LinearizedDynamics lin = linearize(mdl, ss.x_bar);
  const DareResult offline = dare(lin.A, lin.B, Qx, Qu);
  const Controller ilqr = make_ilqr_controller(mdl, Qx, Qu, vec1(0));

  SimConfig sim;
  sim.x0 = vec2(0.35, -0.6);
  sim.r = vec1(0);
  sim.steps = 50;
  const SimulationTrace trace = simulate(mdl, ilqr, sim);
  Vec x = sim.x0;
  for (int t = 0; t < sim.steps; ++t) {
    const Vec u = ss.u_bar - offline.K * (x - ss.x_bar);
    chk.require(u == trace.inputs[static_cast<std::size_t>(t)],
                "input differs at step " + std::to_string(t));
    x = step(mdl, x, u);
    chk.require(x == trace.states[static_cast<std::size_t>(t) + 1],
                "state differs at step " + std::to_string(t));
    if (!chk.ok) break;
  }
}

void c05_stability_behavior(Checker& chk, Pipeline& pl) {
  pl.build_dataset_once();
  pl.refresh_report();
  const double sigma = pl.report.sigma;

  const Controller ctrl = make_osap_controller(pl.pendulum, pl.cfg, vec1(0));
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    SimConfig sim;
    sim.x0 = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    sim.r = vec1(0);
    sim.steps = 100;
    try {
      const SimulationTrace trace = simulate(pl.pendulum, ctrl, sim);
      for (std::size_t t = 0; t < trace.dV.size(); ++t) {
        if (trace.states[t].norm() > sigma) {
          chk.require(trace.dV[t] < 0.0, "dV >= 0 beyond sigma at run " + std::to_string(k));
        }
      }
    } catch (const DivergenceError&) {
      chk.require(false, "trajectory left the safety box at run " + std::to_string(k));
    }
  }

  // delta = 0 variant: asymptotic stability of the exactly linear plant
  const SystemModel lin_mdl = make_model("pendulum-linearized");
  const SolverConfig lin_cfg = default_solver_config(lin_mdl);
  const Controller lin_ctrl = make_osap_controller(lin_mdl, lin_cfg, vec1(0));
  SimConfig sim;
  sim.x0 = vec2(1, 1);
  sim.r = vec1(0);
  sim.steps = 200;
  const SimulationTrace trace = simulate(lin_mdl, lin_ctrl, sim);
  chk.require(trace.states.back().norm() <= 1e-3,
              "linearized terminal norm " + std::to_string(trace.states.back().norm()));
}

void c06_pi_trend(Checker& chk, Pipeline& pl) {
  Box box;
  box.lower = Vec::Constant(2, -1.0);
  box.upper = Vec::Constant(2, 1.0);
  const std::vector<double> thetas = {1e-4, 1e-3, 1e-2};
  std::vector<double> mean_pi;
  for (const double theta : thetas) {
    SolverConfig cfg = pl.cfg;
    cfg.theta = theta;
    const Controller ctrl = make_osap_controller(pl.pendulum, cfg, vec1(0));
    const auto stats = batch_experiments(pl.pendulum, {ctrl}, 100, box, 6, vec1(0), 100);
    chk.require(stats[0].diverged == 0,
                "divergences in the theta=" + std::to_string(theta) + " batch");
    mean_pi.push_back(stats[0].mean_pi);
  }
  // mean PI non-increasing as theta grows, within a 2% slack band
  for (std::size_t i = 1; i < thetas.size(); ++i) {
    chk.require(mean_pi[i] <= 1.02 * mean_pi[i - 1],
                "PI trend violated: " + std::to_string(mean_pi[i]) + " vs " +
                    std::to_string(mean_pi[i - 1]));
  }
  chk.notes.push_back("mean PI on [-1,1]^2: theta=1e-4: " + std::to_string(mean_pi[0]) +
                      ", 1e-3: " + std::to_string(mean_pi[1]) +
                      ", 1e-2: " + std::to_string(mean_pi[2]));
}

void c07_training_pipeline(Checker& chk, Pipeline& pl) {
  const double t0 = now_seconds();
  pl.train_once(2000);

  const double first = pl.trained.curve.front().val_mse;
  double best = first;
  int epoch_10x = -1;
  for (const auto& rec : pl.trained.curve) {
    best = std::min(best, rec.val_mse);
    if (epoch_10x < 0 && rec.val_mse <= first / 10.0) epoch_10x = rec.epoch;
  }
  chk.require(epoch_10x >= 0 && epoch_10x < 2000,
              "no 10x validation-MSE drop within 2000 epochs");
  chk.notes.push_back("val MSE " + std::to_string(first) + " -> " +
                      std::to_string(pl.trained.curve.back().val_mse) + " (10x at epoch " +
                      std::to_string(epoch_10x) + ")");

  MlpArchitecture arch;
  arch.input_dim = 3;
  arch.hidden = {8, 32, 64, 64, 32, 16};
  arch.output_dim = 4;
  const double grad_err = grad_check(arch, 17, 100);
  chk.require(grad_err <= 1e-4, "grad check error " + std::to_string(grad_err));
  chk.require(now_seconds() - t0 < 600.0, "runtime above 10 minutes");
}

void c08_tracking_bound_gate(Checker& chk, Pipeline& pl) {
  pl.train_once(2000);
  if (!(pl.report.theta_min < pl.cfg.theta)) {
    // single allowed retry with doubled epochs
    pl.retrained = true;
    pl.train_once(4000);
  }
  chk.require(pl.report.theta_min < pl.cfg.theta,
              "theta_min " + std::to_string(pl.report.theta_min) + " >= theta");
  chk.require(pl.report.vartheta_defined, "vartheta undefined");
  chk.notes.push_back("theta_min " + std::to_string(pl.report.theta_min) + ", vartheta " +
                      std::to_string(pl.report.vartheta) + ", du_bar " +
                      std::to_string(pl.gap.du_bar) + ", dP_bar " +
                      std::to_string(pl.gap.dP_bar));

  const Controller nn = make_nn_controller(pl.trained.params, vec1(0));
  SimConfig sim;
  sim.x0 = vec2(-2.3, 5.0);
  sim.r = vec1(0);
  sim.steps = 200;
  try {
    const SimulationTrace trace = simulate(pl.pendulum, nn, sim);
    chk.require(trace.terminal_error <= pl.report.vartheta,
                "terminal error " + std::to_string(trace.terminal_error) + " above vartheta");
    // positive dV excursions happen near the equilibrium only; report the
    // empirical radius; vartheta is only an upper bound for it
    double vartheta_emp = 0.0;
    for (std::size_t t = 0; t < trace.dV.size(); ++t) {
      if (trace.dV[t] > 0.0) vartheta_emp = std::max(vartheta_emp, trace.states[t].norm());
    }
    chk.notes.push_back("empirical positive-dV radius " + std::to_string(vartheta_emp) +
                        " (bound " + std::to_string(pl.report.vartheta) + ")");
  } catch (const DivergenceError&) {
    chk.require(false, "NN trajectory left the safety box");
  }
}

void c09_roa_reproduction(Checker& chk, Pipeline& pl) {
  const double t0 = now_seconds();
  pl.train_once(2000);
  const Controller nn = make_nn_controller(pl.trained.params, vec1(0));

  GridSpec grid;  // 100 x 100 points across the operating box
  grid.lower = Vec::Constant(2, -5.0);
  grid.upper = Vec::Constant(2, 5.0);
  grid.step = Vec::Constant(2, 10.0 / 99.0);
  const double radius = std::max(pl.report.sigma, 1e-2);
  const RoaGrid roa = estimate_roa(pl.pendulum, nn, vec1(0), grid, 500, radius, 1);

  auto cell_index = [&](double x1, double x2) {
    const long i = std::lround((x1 - grid.lower[0]) / grid.step[0]);
    const long j = std::lround((x2 - grid.lower[1]) / grid.step[1]);
    return static_cast<std::size_t>(i * grid.axis_count(1) + j);
  };
  chk.require(roa.membership[cell_index(-2.3, 5.0)] == 1, "study cell [-2.3, 5] excluded");
  chk.require(roa.membership[cell_index(0.0, 0.0)] == 1, "origin cell excluded");

  int corner_outside = 0;
  for (const double cx : {-5.0, 5.0})
    for (const double cy : {-5.0, 5.0})
      if (roa.membership[cell_index(cx, cy)] == 0) ++corner_outside;
  chk.require(corner_outside >= 1, "no corner cell escapes");
  chk.notes.push_back("inside " + std::to_string(roa.inside_count()) + " of " +
                      std::to_string(roa.membership.size()) + " cells");
  chk.require(now_seconds() - t0 < 600.0, "runtime above 10 minutes");
}

void c10_performance_ratio(Checker& chk, Pipeline& pl) {
  pl.train_once(2000);
  const SteadyStatePair ss = steady_state(pl.pendulum, vec1(0));
  Rng rng(10);
  std::vector<Vec> states;
  for (int i = 0; i < 50; ++i)
    states.push_back(vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)));

  double t0 = now_seconds();
  for (int k = 0; k < 200; ++k) {
    const ControlSolution sol = solve_at(pl.pendulum, states[k % states.size()], ss, pl.cfg);
    (void)sol;
  }
  const double solver_step = (now_seconds() - t0) / 200.0;

  t0 = now_seconds();
  double sink = 0.0;
  for (int k = 0; k < 20000; ++k) {
    sink += mlp_forward(pl.trained.params, states[k % states.size()], vec1(0)).u_hat[0];
  }
  const double nn_step = (now_seconds() - t0) / 20000.0;
  chk.require(std::isfinite(sink), "non-finite inference outputs");

  const double ratio = solver_step / nn_step;
  chk.require(ratio >= 50.0, "speedup " + std::to_string(ratio) + " below 50x");
  chk.notes.push_back("solver " + std::to_string(solver_step * 1e3) + " ms vs nn " +
                      std::to_string(nn_step * 1e3) + " ms per step (" +
                      std::to_string(ratio) + "x)");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void c11_determinism(Checker& chk, Pipeline& pl) {
  // dataset bytes across worker counts
  GridSpec xs, rs;
  xs.lower = Vec::Constant(2, -5);
  xs.upper = Vec::Constant(2, 5);
  xs.step = Vec::Constant(2, 1.25);
  rs.lower = Vec::Constant(1, -1);
  rs.upper = Vec::Constant(1, 1);
  rs.step = Vec::Constant(1, 1.0);
  const auto points = generate_grid(xs, rs);
  const TrainingDataset a = build_dataset(pl.pendulum, points, pl.cfg, 1);
  const TrainingDataset b = build_dataset(pl.pendulum, points, pl.cfg, 4);
  save_binary(a, "acc_ds_a.bin");
  save_binary(b, "acc_ds_b.bin");
  chk.require(slurp("acc_ds_a.bin") == slurp("acc_ds_b.bin"), "dataset bytes differ by workers");

  // checkpoint bytes across reruns
  const auto [tr, va] = split(a, 0.2, 4);
  MlpArchitecture arch;
  arch.hidden = {8, 8};
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 32;
  tc.seed = 12;
  const TrainResult r1 = mlp_train(tr, va, arch, tc);
  const TrainResult r2 = mlp_train(tr, va, arch, tc);
  save_checkpoint(r1.params, "acc_ck_a.bin");
  save_checkpoint(r2.params, "acc_ck_b.bin");
  chk.require(slurp("acc_ck_a.bin") == slurp("acc_ck_b.bin"), "checkpoint bytes differ");

  // trace bytes across reruns
  const Controller ctrl = make_osap_controller(pl.pendulum, pl.cfg, vec1(0));
  SimConfig sim;
  sim.x0 = vec2(0.4, -0.3);
  sim.r = vec1(0);
  sim.steps = 25;
  write_trace_csv(simulate(pl.pendulum, ctrl, sim), "acc_tr_a.csv");
  write_trace_csv(simulate(pl.pendulum, ctrl, sim), "acc_tr_b.csv");
  chk.require(slurp("acc_tr_a.csv") == slurp("acc_tr_b.csv"), "trace bytes differ");

  // report bytes and RoA bitmaps across worker counts
  pl.build_dataset_once();
  pl.refresh_report();
  const std::string rep1 = bound_report_json(pl.report);
  pl.refresh_report();
  chk.require(rep1 == bound_report_json(pl.report), "bound report differs");

  GridSpec small;
  small.lower = Vec::Constant(2, -2.0);
  small.upper = Vec::Constant(2, 2.0);
  small.step = Vec::Constant(2, 0.8);
  const RoaGrid roa1 = estimate_roa(pl.pendulum, ctrl, vec1(0), small, 40, 1e9, 1);
  const RoaGrid roa2 = estimate_roa(pl.pendulum, ctrl, vec1(0), small, 40, 1e9, 3);
  save_roa_bitmap(roa1, "acc_roa_a.bin");
  save_roa_bitmap(roa2, "acc_roa_b.bin");
  chk.require(slurp("acc_roa_a.bin") == slurp("acc_roa_b.bin"), "roa bytes differ by workers");

  for (const char* f : {"acc_ds_a.bin", "acc_ds_b.bin", "acc_ck_a.bin", "acc_ck_b.bin",
                        "acc_tr_a.csv", "acc_tr_b.csv", "acc_roa_a.bin", "acc_roa_b.bin"}) {
    std::remove(f);
  }
}

}  // namespace

int main() {
  struct Entry {
    const char* id;
    const char* title;
    Criterion fn;
  };
  const std::vector<Entry> criteria = {
      {"C01", "solver feasibility and certification (500 seeded queries)", c01_solver_feasibility},
      {"C02", "brute-force oracle equivalence on the scalar system", c02_scalar_oracle},
      {"C03", "horizon-one LQR closed form (frozen P, no decrease constraint)", c03_lqr1_equivalence},
      {"C04", "DARE golden-ratio fixture and bitwise iterative-LQR match", c04_dare_fixture},
      {"C05", "bounded trajectories, dV sign beyond sigma, linear-plant convergence", c05_stability_behavior},
      {"C06", "mean performance index non-increasing in theta (2% slack)", c06_pi_trend},
      {"C07", "training pipeline: 10x validation-MSE drop and gradient check", c07_training_pipeline},
      {"C08", "tracking-bound gate: theta_min < theta and terminal error <= vartheta", c08_tracking_bound_gate},
      {"C09", "region-of-attraction structure under the trained policy", c09_roa_reproduction},
      {"C10", "per-step inference at least 50x faster than the solver", c10_performance_ratio},
      {"C11", "byte-identical artifacts across reruns and worker counts", c11_determinism},
  };

  Pipeline pipeline;
  int failures = 0;
  for (const auto& entry : criteria) {
    Checker chk;
    const double t0 = now_seconds();
    try {
      entry.fn(chk, pipeline);
    } catch (const std::exception& e) {
      chk.ok = false;
      chk.notes.push_back(std::string("exception: ") + e.what());
    }
    const double dt = now_seconds() - t0;
    std::printf("[%s] %-72s %s (%.1fs)\n", entry.id, entry.title, chk.ok ? "PASS" : "FAIL", dt);
    for (const auto& note : chk.notes) std::printf("      %s\n", note.c_str());
    std::fflush(stdout);
    if (!chk.ok) ++failures;
  }
  if (failures == 0) {
    std::printf("acceptance: all %zu criteria passed\n", criteria.size());
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures;
}
