#include "osap/closed_loop.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "osap/parallel.hpp"
#include "osap/rng.hpp"

#include <json.hpp>

namespace osap {

Controller make_osap_controller(const SystemModel& model, const SolverConfig& cfg, const Vec& r) {
  const SteadyStatePair ss = steady_state(model, r);
  Controller ctrl;
  ctrl.name = "osap(theta=" + std::to_string(cfg.theta) + ")";
  ctrl.act = [model, cfg, ss](const Vec& x, int) {
    const ControlSolution sol = solve_at(model, x, ss, cfg);
    ControllerOutput out;
    out.u = sol.u_star;
    out.P = sol.P_star.P();
    out.status = sol.status;
    return out;
  };
  return ctrl;
}

Controller make_nn_controller(const MlpParameters& params, const Vec& r) {
  Controller ctrl;
  ctrl.name = "nn";
  ctrl.act = [params, r](const Vec& x, int) {
    const NnOutput nn = mlp_forward(params, x, r);
    ControllerOutput out;
    out.u = nn.u_hat;
    out.P = nn.P_hat;
    return out;
  };
  return ctrl;
}

Controller make_lqr1_controller(const SystemModel& model, const Mat& Ru, const Mat& Rf,
                                const Vec& r) {
  const SteadyStatePair ss = steady_state(model, r);
  Controller ctrl;
  ctrl.name = "lqr1";
  ctrl.act = [model, Ru, Rf, ss](const Vec& x, int) {
    const LinearizedDynamics lin = linearize(model, x);
    ControllerOutput out;
    out.u = lqr_one_step(lin.A, lin.B, x, ss.x_bar, ss.u_bar,
                         Mat::Identity(model.n, model.n), Ru, Rf);
    return out;
  };
  return ctrl;
}

Controller make_ilqr_controller(const SystemModel& model, const Mat& Qx, const Mat& Qu,
                                const Vec& r) {
  auto policy = make_ilqr_policy(model, Qx, Qu, r);
  Controller ctrl;
  ctrl.name = "ilqr";
  ctrl.act = [policy](const Vec& x, int) {
    ControllerOutput out;
    out.u = policy(x);
    return out;
  };
  return ctrl;
}

void SimConfig::validate() const {
  if (steps < 1) throw ConfigError("SimConfig: steps must be >= 1");
  if (!(safety_factor >= 1.0)) throw ConfigError("SimConfig: safety_factor must be >= 1");
}

SimulationTrace simulate(const SystemModel& model, const Controller& controller,
                         const SimConfig& cfg) {
  cfg.validate();
  if (!model.X.contains(cfg.x0, 1e-12)) {
    throw ConfigError("simulate: x0 lies outside the operating box of '" + model.id + "'");
  }
  const SteadyStatePair ss = steady_state(model, cfg.r);
  const Box safety = model.X.scaled(cfg.safety_factor);

  SimulationTrace trace;
  trace.x_bar = ss.x_bar;
  trace.states.reserve(cfg.steps + 1);
  trace.states.push_back(cfg.x0);

  Vec x = cfg.x0;
  for (int t = 0; t < cfg.steps; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const ControllerOutput out = controller.act(x, t);
    trace.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    trace.inputs.push_back(out.u);
    trace.statuses.push_back(out.status);
    const Mat P = out.P ? *out.P : Mat::Identity(model.n, model.n);
    if (cfg.record_P) trace.P_seq.push_back(P);
    trace.V.push_back(lyapunov_value(x, ss.x_bar, P));

    x = step(model, x, out.u);  // true nonlinear plant
    trace.states.push_back(x);
    if (!safety.contains(x)) {
      throw DivergenceError("simulate: state left the safety box at step " + std::to_string(t + 1),
                            t + 1);
    }
  }
  for (std::size_t t = 0; t + 1 < trace.V.size(); ++t) {
    trace.dV.push_back(trace.V[t + 1] - trace.V[t]);
  }
  trace.terminal_error = (trace.states.back() - ss.x_bar).norm();
  trace.pi = performance_index(trace);
  return trace;
}

double performance_index(const SimulationTrace& trace) {
  double pi = 0.0;
  for (const Vec& x : trace.states) pi += x.norm();
  return pi;
}

std::vector<BatchStats> batch_experiments(const SystemModel& model,
                                          const std::vector<Controller>& controllers, int count,
                                          const Box& init_box, std::uint64_t seed, const Vec& r,
                                          int steps, int workers) {
  if (count < 1) throw ConfigError("batch_experiments: count must be >= 1");

  // one shared draw sequence so every controller sees identical x0
  std::vector<Vec> draws(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    Vec x0(init_box.dim());
    for (int d = 0; d < init_box.dim(); ++d)
      x0[d] = rng.uniform(init_box.lower[d], init_box.upper[d]);
    draws[static_cast<std::size_t>(i)] = x0;
  }

  std::vector<BatchStats> all;
  for (const Controller& ctrl : controllers) {
    BatchStats stats;
    stats.controller_name = ctrl.name;
    stats.pis.assign(draws.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> step_time(draws.size(), 0.0);
    std::vector<long> step_count(draws.size(), 0);
    std::vector<std::uint8_t> failed(draws.size(), 0);

    parallel_for(draws.size(), workers, [&](std::size_t i) {
      SimConfig cfg;
      cfg.x0 = draws[i];
      cfg.r = r;
      cfg.steps = steps;
      cfg.record_P = false;
      try {
        const SimulationTrace trace = simulate(model, ctrl, cfg);
        stats.pis[i] = trace.pi;
        for (double s : trace.step_seconds) step_time[i] += s;
        step_count[i] = static_cast<long>(trace.step_seconds.size());
      } catch (const DivergenceError&) {
        failed[i] = 1;
      }
    });

    double sum = 0.0, tsum = 0.0;
    long tcount = 0;
    int ok = 0;
    stats.min_pi = std::numeric_limits<double>::infinity();
    stats.max_pi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < draws.size(); ++i) {
      if (failed[i]) {
        ++stats.diverged;
        continue;
      }
      ++ok;
      sum += stats.pis[i];
      stats.min_pi = std::min(stats.min_pi, stats.pis[i]);
      stats.max_pi = std::max(stats.max_pi, stats.pis[i]);
      tsum += step_time[i];
      tcount += step_count[i];
    }
    stats.mean_pi = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    stats.mean_step_seconds = tcount > 0 ? tsum / static_cast<double>(tcount) : 0.0;
    all.push_back(std::move(stats));
  }
  return all;
}

double timing_report(const BatchStats& slow, const BatchStats& fast) {
  if (fast.mean_step_seconds <= 0.0)
    throw ConfigError("timing_report: missing timings for the fast controller");
  return slow.mean_step_seconds / fast.mean_step_seconds;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const SimulationTrace& trace, const std::string& path,
                     bool include_timings) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("trace csv: cannot open '" + path + "'");
  const int n = static_cast<int>(trace.states.empty() ? 0 : trace.states[0].size());
  const int p = static_cast<int>(trace.inputs.empty() ? 0 : trace.inputs[0].size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",x" << (i + 1);
  for (int i = 0; i < p; ++i) out << ",u" << (i + 1);
  out << ",V,dV,solve_ms\n";
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    out << t;
    for (int i = 0; i < n; ++i) out << ',' << fmt(trace.states[t][i]);
    const bool has_input = t < trace.inputs.size();
    for (int i = 0; i < p; ++i) out << ',' << (has_input ? fmt(trace.inputs[t][i]) : "");
    out << ',' << (t < trace.V.size() ? fmt(trace.V[t]) : "");
    out << ',' << (t < trace.dV.size() ? fmt(trace.dV[t]) : "");
    out << ','
        << (include_timings && t < trace.step_seconds.size()
                ? fmt(trace.step_seconds[t] * 1e3)
                : "");
    out << '\n';
  }
}

void write_trace_jsonl(const SimulationTrace& trace, const std::string& path,
                       const std::string& model_id, std::uint64_t config_hash,
                       bool include_timings) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("trace jsonl: cannot open '" + path + "'");
  nlohmann::json header;
  header["record"] = "header";
  header["model_id"] = model_id;
  header["config_hash"] = config_hash;
  header["steps"] = trace.inputs.size();
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    nlohmann::json row;
    row["record"] = "step";
    row["t"] = t;
    row["x"] = std::vector<double>(trace.states[t].data(),
                                   trace.states[t].data() + trace.states[t].size());
    if (t < trace.inputs.size()) {
      row["u"] = std::vector<double>(trace.inputs[t].data(),
                                     trace.inputs[t].data() + trace.inputs[t].size());
      row["status"] = to_string(trace.statuses[t]);
      if (include_timings) row["solve_ms"] = trace.step_seconds[t] * 1e3;
    }
    if (t < trace.V.size()) row["V"] = trace.V[t];
    if (t < trace.dV.size()) row["dV"] = trace.dV[t];
    out << row.dump() << '\n';
  }
}

void write_phase_csv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("phase csv: cannot open '" + path + "'");
  const int n = static_cast<int>(trace.states.empty() ? 0 : trace.states[0].size());
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << (i + 1);
  for (int i = 0; i < n; ++i) out << ",dx" << (i + 1);
  out << '\n';
  for (std::size_t t = 0; t + 1 < trace.states.size(); ++t) {
    for (int i = 0; i < n; ++i) out << (i ? "," : "") << fmt(trace.states[t][i]);
    for (int i = 0; i < n; ++i) out << ',' << fmt(trace.states[t + 1][i] - trace.states[t][i]);
    out << '\n';
  }
}

void write_dv_csv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("dv csv: cannot open '" + path + "'");
  out << "t,dV\n";
  for (std::size_t t = 0; t < trace.dV.size(); ++t) {
    out << t << ',' << fmt(trace.dV[t]) << '\n';
  }
}

}  // namespace osap
