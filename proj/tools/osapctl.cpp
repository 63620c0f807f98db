// osapctl: command-line front end for dataset generation, network training,
// closed-loop simulation, batch benchmarks, region-of-attraction estimation,
// and the tracking-bound report. Every command resolves its configuration,
// writes deterministic artifacts into --out, and drops a manifest with
// content hashes next to them.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "osap/closed_loop.hpp"
#include "osap/dataset.hpp"
#include "osap/mlp.hpp"
#include "osap/roa.hpp"
#include "osap/rng.hpp"

using namespace osap;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitGate = 4;

struct ModelOptions {
  std::string id = "pendulum";
  double dt = 0.1;
  double gravity = 9.81;
  double mass = 1.0;
  double length = 1.0;
};

struct SolverOptions {
  double theta = -1.0;  // negative: model default
  double qx = -1.0;
  double qu = -1.0;
  double eps_p = -1.0;
  double cap_p = -1.0;
  double anchor_weight = -1.0;
  double anchor_margin = -1.0;
  double reg_p = -1.0;
  int multistart = -1;
  double tol_feasibility = -1.0;
};

struct GridOptions {
  double x_step = 0.1;
  double r_step = 0.1;
  std::string endpoint = "inclusive";
};

struct TrainOptions {
  std::string dataset;
  std::string hidden = "8,32,64,64,32,16";
  std::string activation = "relu";
  double lr0 = 1e-3;
  double lr_min = 1e-6;
  int epochs = 2000;
  int t_max = -1;
  int batch = 128;
  double dropout = 0.02;
  double val_fraction = 0.1;
  bool grow = false;           // width-ladder sweep instead of one architecture
  double grow_threshold = 0.05;  // stop at the first rung under this val MSE
};

struct RunContext {
  std::string out_dir = ".";
  int workers = 1;
  std::uint64_t seed = 0;
  bool gnuplot = false;
  bool timings = false;  // wall times vary run to run; opt in explicitly
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SystemModel resolve_model(const ModelOptions& mo) {
  ModelParams prm;
  prm.dt = mo.dt;
  prm.gravity = mo.gravity;
  prm.mass = mo.mass;
  prm.length = mo.length;
  return make_model(mo.id, prm);
}

SolverConfig resolve_solver(const SystemModel& model, const SolverOptions& so,
                            std::uint64_t seed) {
  SolverConfig cfg = default_solver_config(model);
  cfg.seed = seed;
  if (so.theta > 0) cfg.theta = so.theta;
  if (so.qx > 0) cfg.Qx = so.qx * Mat::Identity(model.n, model.n);
  if (so.qu > 0) cfg.Qu = so.qu * Mat::Identity(model.p, model.p);
  if (so.eps_p > 0) cfg.eps_P = so.eps_p;
  if (so.cap_p > 0) cfg.cap_P = so.cap_p;
  if (so.anchor_weight >= 0) cfg.anchor_weight = so.anchor_weight;
  if (so.anchor_margin > 0) cfg.anchor_margin = so.anchor_margin;
  if (so.reg_p >= 0) cfg.reg_P = so.reg_p;
  if (so.multistart > 0) cfg.multistart = so.multistart;
  if (so.tol_feasibility > 0) cfg.tol_feasibility = so.tol_feasibility;
  cfg.validate(model.n, model.p);
  return cfg;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(std::stoi(cell));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(std::stod(cell));
  }
  return out;
}

Vec parse_vec(const std::string& csv, int expected_dim, const std::string& what) {
  const auto values = parse_double_list(csv);
  if (static_cast<int>(values.size()) != expected_dim) {
    throw ConfigError(what + ": expected " + std::to_string(expected_dim) +
                      " comma-separated values, got '" + csv + "'");
  }
  Vec v(expected_dim);
  for (int i = 0; i < expected_dim; ++i) v[i] = values[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  return fnv1a64(bytes.data(), bytes.size());
}

// Resolved configuration + content hashes, written next to the outputs.
void write_manifest(const RunContext& ctx, const std::string& command,
                    const nlohmann::ordered_json& resolved,
                    const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = resolved;
  nlohmann::ordered_json files;
  for (const auto& path : outputs) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(hash_file(path)));
    files[path.filename().string()] = std::string("fnv1a64:") + hex;
  }
  j["outputs"] = files;
  std::ofstream out(fs::path(ctx.out_dir) / (command + "_manifest.json"), std::ios::trunc);
  out << j.dump(2) << '\n';
}

nlohmann::ordered_json solver_json(const SolverConfig& cfg) {
  nlohmann::ordered_json j;
  j["theta"] = cfg.theta;
  j["qx"] = cfg.Qx(0, 0);
  j["qu"] = cfg.Qu(0, 0);
  j["eps_p"] = cfg.eps_P;
  j["cap_p"] = cfg.cap_P;
  j["anchor_weight"] = cfg.anchor_weight;
  j["anchor_margin"] = cfg.anchor_margin;
  j["reg_p"] = cfg.reg_P;
  j["multistart"] = cfg.multistart;
  j["tol_feasibility"] = cfg.tol_feasibility;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(cfg.hash()));
  j["hash"] = hex;
  return j;
}

GridSpec grid_over_box(const Box& box, double step, const std::string& endpoint) {
  GridSpec g;
  g.lower = box.lower;
  g.upper = box.upper;
  g.step = Vec::Constant(box.dim(), step);
  if (endpoint == "inclusive") {
    g.endpoint = EndpointMode::inclusive;
  } else if (endpoint == "exclusive") {
    g.endpoint = EndpointMode::exclusive_upper;
  } else {
    throw ConfigError("grid.endpoint must be 'inclusive' or 'exclusive', got '" + endpoint + "'");
  }
  return g;
}

Controller resolve_controller(const std::string& kind, const SystemModel& model,
                              const SolverConfig& cfg, const Vec& r,
                              const std::string& checkpoint) {
  if (kind == "osap") return make_osap_controller(model, cfg, r);
  if (kind == "lqr1") return make_lqr1_controller(model, cfg.Qu, cfg.Qx, r);
  if (kind == "ilqr") return make_ilqr_controller(model, cfg.Qx, cfg.Qu, r);
  if (kind == "nn") {
    if (checkpoint.empty())
      throw ConfigError("controller 'nn' needs a checkpoint (--checkpoint)");
    return make_nn_controller(load_checkpoint(checkpoint), r);
  }
  throw ConfigError("unknown controller '" + kind + "' (use osap|nn|lqr1|ilqr)");
}

void emit_gnuplot_script(const fs::path& out_dir) {
  std::ofstream out(out_dir / "plots.gp", std::ios::trunc);
  out << "# gnuplot script for the simulation plot data\n"
         "set datafile separator ','\n"
         "set key autotitle columnhead\n"
         "set terminal pngcairo size 900,600\n"
         "set output 'states.png'\n"
         "plot 'trace.csv' using 1:2 with lines title 'x1', '' using 1:3 with lines title 'x2'\n"
         "set output 'input.png'\n"
         "plot 'trace.csv' using 1:4 with lines title 'u'\n"
         "set output 'phase.png'\n"
         "plot 'phase.csv' using 1:2:3:4 with vectors head filled\n"
         "set output 'dv.png'\n"
         "plot 'dv.csv' using 1:2 with lines title 'dV'\n";
}

// ---------------------------------------------------------------------------

int cmd_dataset(const RunContext& ctx, const ModelOptions& mo, const SolverOptions& so,
                const GridOptions& go) {
  const SystemModel model = resolve_model(mo);
  const SolverConfig cfg = resolve_solver(model, so, ctx.seed);

  const GridSpec xs = grid_over_box(model.X, go.x_step, go.endpoint);
  const GridSpec rs = grid_over_box(model.R, go.r_step, go.endpoint);
  const auto points = generate_grid(xs, rs);
  std::cout << "labeling " << points.size() << " grid points on '" << model.id << "'\n";

  TrainingDataset ds = build_dataset(model, points, cfg, ctx.workers);
  ds.meta.xs = xs;
  ds.meta.rs = rs;

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  save_binary(ds, (dir / "dataset.bin").string());
  save_csv(ds, (dir / "dataset.csv").string());

  nlohmann::ordered_json resolved;
  resolved["model"] = model.id;
  resolved["solver"] = solver_json(cfg);
  resolved["grid"] = {{"x_step", go.x_step}, {"r_step", go.r_step}, {"endpoint", go.endpoint}};
  resolved["points"] = points.size();
  resolved["samples"] = ds.samples.size();
  resolved["failures"] = ds.meta.failure_count;
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "dataset", resolved, {dir / "dataset.bin", dir / "dataset.csv"});
  std::cout << "dataset: " << ds.samples.size() << " samples, " << ds.meta.failure_count
            << " failures\n";
  return kExitOk;
}

int cmd_train(const RunContext& ctx, const TrainOptions& to) {
  if (to.dataset.empty()) throw ConfigError("train: --dataset is required");
  const TrainingDataset ds = load(to.dataset);
  if (ds.samples.empty()) throw ConfigError("train: dataset is empty");
  const auto [train_set, val_set] = split(ds, to.val_fraction, ctx.seed);

  MlpArchitecture arch;
  arch.hidden = parse_int_list(to.hidden);
  arch.activation = activation_from_string(to.activation);
  TrainConfig tc;
  tc.lr0 = to.lr0;
  tc.lr_min = to.lr_min;
  tc.epochs = to.epochs;
  tc.t_max = to.t_max;
  tc.batch_size = to.batch;
  tc.dropout_rate = to.dropout;
  tc.seed = ctx.seed;

  std::cout << "training on " << train_set.samples.size() << " samples ("
            << val_set.samples.size() << " held out)\n";

  TrainResult res;
  std::string chosen_hidden = to.hidden;
  if (to.grow) {
    // start small and add capacity until the accuracy target is met
    const std::vector<std::vector<int>> ladder = {
        {8}, {8, 16}, {8, 32, 16}, {8, 32, 64, 32, 16}, {8, 32, 64, 64, 32, 16}};
    bool met = false;
    for (const auto& rung : ladder) {
      arch.hidden = rung;
      res = mlp_train(train_set, val_set, arch, tc);
      std::string label;
      for (int w : rung) label += (label.empty() ? "" : ",") + std::to_string(w);
      std::cout << "ladder " << label << ": val mse " << fmt_double(res.curve.back().val_mse)
                << '\n';
      chosen_hidden = label;
      if (res.curve.back().val_mse <= to.grow_threshold) {
        met = true;
        break;
      }
    }
    if (!met)
      std::cout << "ladder exhausted above the threshold; keeping the largest network\n";
  } else {
    res = mlp_train(train_set, val_set, arch, tc);
  }
  const ImitationGap gap = measure_gap(res.params, val_set);

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  save_checkpoint(res.params, (dir / "checkpoint.bin").string());
  save_loss_csv(res.curve, (dir / "loss.csv").string());
  {
    nlohmann::ordered_json j;
    j["du_bar"] = gap.du_bar;
    j["dP_bar"] = gap.dP_bar;
    j["val_mse"] = gap.val_mse;
    std::ofstream out(dir / "gap.json", std::ios::trunc);
    out << j.dump(2) << '\n';
  }

  nlohmann::ordered_json resolved;
  resolved["dataset"] = to.dataset;
  resolved["hidden"] = chosen_hidden;
  resolved["grow"] = to.grow;
  resolved["activation"] = to.activation;
  resolved["lr0"] = to.lr0;
  resolved["lr_min"] = to.lr_min;
  resolved["epochs"] = to.epochs;
  resolved["batch"] = to.batch;
  resolved["dropout"] = to.dropout;
  resolved["val_fraction"] = to.val_fraction;
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "train", resolved,
                 {dir / "checkpoint.bin", dir / "loss.csv", dir / "gap.json"});
  std::cout << "final val mse " << fmt_double(res.curve.back().val_mse) << ", du_bar "
            << fmt_double(gap.du_bar) << ", dP_bar " << fmt_double(gap.dP_bar) << '\n';
  return kExitOk;
}

int cmd_simulate(const RunContext& ctx, const ModelOptions& mo, const SolverOptions& so,
                 const std::string& controller, const std::string& checkpoint,
                 const std::string& x0_csv, double r_value, int steps, double safety) {
  const SystemModel model = resolve_model(mo);
  const SolverConfig cfg = resolve_solver(model, so, ctx.seed);
  const Vec r = Vec::Constant(model.m, r_value);
  const Controller ctrl = resolve_controller(controller, model, cfg, r, checkpoint);

  SimConfig sim;
  sim.x0 = parse_vec(x0_csv, model.n, "x0");
  sim.r = r;
  sim.steps = steps;
  sim.safety_factor = safety;
  const SimulationTrace trace = simulate(model, ctrl, sim);

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  write_trace_csv(trace, (dir / "trace.csv").string(), ctx.timings);
  write_trace_jsonl(trace, (dir / "trace.jsonl").string(), model.id, cfg.hash(), ctx.timings);
  write_phase_csv(trace, (dir / "phase.csv").string());
  write_dv_csv(trace, (dir / "dv.csv").string());
  if (ctx.gnuplot) emit_gnuplot_script(dir);
  {
    // volatile sidecar, deliberately outside the manifest hashes
    double total = 0.0;
    for (double s : trace.step_seconds) total += s;
    nlohmann::ordered_json jt;
    jt["mean_step_ms"] = trace.step_seconds.empty()
                             ? 0.0
                             : 1e3 * total / static_cast<double>(trace.step_seconds.size());
    jt["total_s"] = total;
    std::ofstream out(dir / "timings.json", std::ios::trunc);
    out << jt.dump(2) << '\n';
  }

  nlohmann::ordered_json resolved;
  resolved["model"] = model.id;
  resolved["controller"] = ctrl.name;
  resolved["solver"] = solver_json(cfg);
  resolved["x0"] = x0_csv;
  resolved["r"] = r_value;
  resolved["steps"] = steps;
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "simulate", resolved,
                 {dir / "trace.csv", dir / "trace.jsonl", dir / "phase.csv", dir / "dv.csv"});
  std::cout << "terminal error " << fmt_double(trace.terminal_error) << ", PI "
            << fmt_double(trace.pi) << '\n';
  return kExitOk;
}

int cmd_bench(const RunContext& ctx, const ModelOptions& mo, const SolverOptions& so,
              const std::string& controllers_csv, const std::string& thetas_csv, int count,
              int steps, double box_halfwidth, const std::string& checkpoint, bool check) {
  const SystemModel model = resolve_model(mo);
  const Vec r = Vec::Constant(model.m, 0.0);
  Box box;
  box.lower = Vec::Constant(model.n, -box_halfwidth);
  box.upper = Vec::Constant(model.n, box_halfwidth);

  std::vector<std::string> kinds;
  {
    std::stringstream ss(controllers_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) kinds.push_back(cell);
  }
  const std::vector<double> thetas = parse_double_list(thetas_csv);
  if (kinds.empty() || thetas.empty()) throw ConfigError("bench: controllers/thetas empty");

  // rows: theta; columns: controllers; cells: mean PI over the shared draws
  std::vector<std::vector<BatchStats>> table;
  for (const double theta : thetas) {
    SolverOptions so_theta = so;
    so_theta.theta = theta;
    const SolverConfig cfg = resolve_solver(model, so_theta, ctx.seed);
    std::vector<Controller> ctrls;
    for (const auto& kind : kinds) ctrls.push_back(resolve_controller(kind, model, cfg, r, checkpoint));
    table.push_back(batch_experiments(model, ctrls, count, box, ctx.seed, r, steps, ctx.workers));
  }

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bench.csv", std::ios::trunc);
    out << "theta";
    for (const auto& kind : kinds) out << ",mean_pi_" << kind << ",mean_step_ms_" << kind
                                       << ",diverged_" << kind;
    out << '\n';
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      out << fmt_double(thetas[i]);
      for (const auto& stats : table[i]) {
        out << ',' << fmt_double(stats.mean_pi) << ',';
        if (ctx.timings) out << fmt_double(stats.mean_step_seconds * 1e3);
        out << ',' << stats.diverged;
      }
      out << '\n';
    }
  }
  {
    // volatile sidecar, deliberately outside the manifest hashes
    nlohmann::ordered_json jt;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      nlohmann::ordered_json row;
      for (std::size_t c = 0; c < kinds.size(); ++c)
        row[kinds[c]] = table[i][c].mean_step_seconds * 1e3;
      jt[fmt_double(thetas[i])] = row;
    }
    std::ofstream out(dir / "timings.json", std::ios::trunc);
    out << jt.dump(2) << '\n';
  }

  nlohmann::ordered_json resolved;
  resolved["model"] = model.id;
  resolved["controllers"] = controllers_csv;
  resolved["thetas"] = thetas_csv;
  resolved["count"] = count;
  resolved["steps"] = steps;
  resolved["box_halfwidth"] = box_halfwidth;
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "bench", resolved, {dir / "bench.csv"});

  for (std::size_t i = 0; i < thetas.size(); ++i) {
    std::cout << "theta=" << fmt_double(thetas[i]) << ':';
    for (std::size_t c = 0; c < kinds.size(); ++c) {
      std::cout << ' ' << kinds[c] << " PI=" << fmt_double(table[i][c].mean_pi);
    }
    std::cout << '\n';
  }

  if (check) {
    // gate: the first controller's mean PI must be non-increasing as theta
    // increases, within a 2% slack band
    std::vector<std::pair<double, double>> by_theta;
    for (std::size_t i = 0; i < thetas.size(); ++i) by_theta.emplace_back(thetas[i], table[i][0].mean_pi);
    std::sort(by_theta.begin(), by_theta.end());
    for (std::size_t i = 1; i < by_theta.size(); ++i) {
      if (by_theta[i].second > 1.02 * by_theta[i - 1].second) {
        std::cerr << "bench --check: PI trend violated at theta=" << by_theta[i].first << '\n';
        return kExitGate;
      }
    }
    std::cout << "bench --check: PI trend holds\n";
  }
  return kExitOk;
}

int cmd_roa(const RunContext& ctx, const ModelOptions& mo, const SolverOptions& so,
            const std::string& controller, const std::string& checkpoint, double r_value,
            double step, int horizon, double radius) {
  const SystemModel model = resolve_model(mo);
  const SolverConfig cfg = resolve_solver(model, so, ctx.seed);
  const Vec r = Vec::Constant(model.m, r_value);
  const Controller ctrl = resolve_controller(controller, model, cfg, r, checkpoint);
  const GridSpec grid = grid_over_box(model.X, step, "inclusive");

  if (radius <= 0.0) {
    // default proxy radius: max(sigma, 1e-2) with sample-estimated constants
    const ModelConstants constants = estimate_constants(model, 51, ctx.workers);
    const SteadyStatePair ss = steady_state(model, r);
    const LinearizedDynamics lin = linearize(model, ss.x_bar);
    const DareResult d = dare(lin.A, lin.B, cfg.Qx, cfg.Qu);
    Eigen::SelfAdjointEigenSolver<Mat> es(d.P);
    const double lambda_bar = es.eigenvalues().maxCoeff();
    radius = std::max(sigma_bound(lambda_bar, constants.delta, cfg.theta), 1e-2);
  }

  std::cout << "estimating RoA over " << grid.total_count() << " cells (horizon " << horizon
            << ", radius " << fmt_double(radius) << ")\n";
  const RoaGrid roa = estimate_roa(model, ctrl, r, grid, horizon, radius, ctx.workers);

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  write_roa_csv(roa, (dir / "roa.csv").string());
  save_roa_bitmap(roa, (dir / "roa.bin").string());

  nlohmann::ordered_json resolved;
  resolved["model"] = model.id;
  resolved["controller"] = ctrl.name;
  resolved["solver"] = solver_json(cfg);
  resolved["r"] = r_value;
  resolved["step"] = step;
  resolved["horizon"] = horizon;
  resolved["radius"] = radius;
  resolved["inside"] = roa.inside_count();
  resolved["cells"] = roa.membership.size();
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "roa", resolved, {dir / "roa.csv", dir / "roa.bin"});
  std::cout << "inside: " << roa.inside_count() << " / " << roa.membership.size() << '\n';
  return kExitOk;
}

int cmd_bounds(const RunContext& ctx, const ModelOptions& mo, const SolverOptions& so,
               const std::string& dataset_path, const std::string& checkpoint_path,
               double val_fraction, int density) {
  if (dataset_path.empty()) throw ConfigError("bounds: --dataset is required");
  const SystemModel model = resolve_model(mo);
  const SolverConfig cfg = resolve_solver(model, so, ctx.seed);
  const TrainingDataset ds = load(dataset_path);
  if (ds.samples.empty()) throw ConfigError("bounds: dataset is empty");

  const ModelConstants constants = estimate_constants(model, density, ctx.workers);
  const auto [lambda_lo, lambda_hi] = dataset_p_extrema(ds);

  ImitationGap gap;  // zero gaps = optimizer-in-the-loop report
  if (!checkpoint_path.empty()) {
    const MlpParameters params = load_checkpoint(checkpoint_path);
    const auto [train_set, val_set] = split(ds, val_fraction, ctx.seed);
    (void)train_set;
    gap = measure_gap(params, val_set);
  }

  const Vec r_center = 0.5 * (model.R.lower + model.R.upper);
  const SteadyStatePair ss = steady_state(model, r_center);
  const double g_norm = model.g(ss.x_bar).jacobiSvd().singularValues()[0];
  const BoundReport rep =
      make_bound_report(constants, lambda_lo, lambda_hi, gap, cfg.theta, g_norm);

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bounds.json", std::ios::trunc);
    out << bound_report_json(rep) << '\n';
  }

  nlohmann::ordered_json resolved;
  resolved["model"] = model.id;
  resolved["dataset"] = dataset_path;
  resolved["checkpoint"] = checkpoint_path;
  resolved["grid_density"] = density;
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "bounds", resolved, {dir / "bounds.json"});
  std::cout << "sigma " << fmt_double(rep.sigma) << ", theta_min " << fmt_double(rep.theta_min)
            << (rep.vartheta_defined ? ", vartheta " + fmt_double(rep.vartheta)
                                     : std::string(", vartheta undefined"))
            << '\n';
  return kExitOk;
}

int cmd_compare(const RunContext& ctx, const SolverOptions& so, int steps,
                const std::string& checkpoints_csv) {
  // per-axis drone comparison: control effort sum|u(t)| of the learned scheme
  // (or the optimizer when no checkpoints are given) against the LQR baseline
  const std::vector<std::string> axes = {"drone-x", "drone-y", "drone-z"};
  std::vector<std::string> checkpoints(3);
  if (!checkpoints_csv.empty()) {
    std::stringstream ss(checkpoints_csv);
    std::string cell;
    int i = 0;
    while (std::getline(ss, cell, ',') && i < 3) checkpoints[static_cast<std::size_t>(i++)] = cell;
  }

  std::vector<double> effort_scheme, effort_lqr;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const SystemModel model = make_model(axes[a]);
    const SolverConfig cfg = resolve_solver(model, so, ctx.seed);
    const Vec r = 0.5 * (model.R.lower + model.R.upper);

    SimConfig sim;
    sim.r = r;
    sim.steps = steps;
    sim.x0 = model.X.lower + 0.25 * (model.X.upper - model.X.lower);

    const Controller scheme = checkpoints[a].empty()
                                  ? make_osap_controller(model, cfg, r)
                                  : make_nn_controller(load_checkpoint(checkpoints[a]), r);
    const Controller lqr = make_ilqr_controller(model, cfg.Qx, cfg.Qu, r);

    auto effort = [&](const Controller& ctrl) {
      const SimulationTrace trace = simulate(model, ctrl, sim);
      double sum = 0.0;
      for (const Vec& u : trace.inputs) sum += u.cwiseAbs().sum();
      return sum;
    };
    effort_scheme.push_back(effort(scheme));
    effort_lqr.push_back(effort(lqr));
  }

  const fs::path dir(ctx.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "compare.csv", std::ios::trunc);
    out << "method,X,Y,Z\n";
    out << "proposed";
    for (double e : effort_scheme) out << ',' << fmt_double(e);
    out << "\nlqr";
    for (double e : effort_lqr) out << ',' << fmt_double(e);
    out << '\n';
  }

  nlohmann::ordered_json resolved;
  resolved["steps"] = steps;
  resolved["checkpoints"] = checkpoints_csv;
  resolved["seed"] = ctx.seed;
  write_manifest(ctx, "compare", resolved, {dir / "compare.csv"});
  for (std::size_t a = 0; a < axes.size(); ++a) {
    std::cout << axes[a] << ": proposed " << fmt_double(effort_scheme[a]) << " vs lqr "
              << fmt_double(effort_lqr[a]) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-step-ahead predictive control pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "read options from an INI config file");
  app.allow_config_extras(false);

  RunContext ctx;
  const char* env_out = std::getenv("OSAP_OUT_DIR");
  if (env_out != nullptr) ctx.out_dir = env_out;
  app.add_option("--out", ctx.out_dir, "output directory")->capture_default_str();
  app.add_option("--workers", ctx.workers, "worker thread cap")->capture_default_str();
  app.add_option("--seed", ctx.seed, "seed for every randomized stage")->capture_default_str();
  app.add_flag("--gnuplot", ctx.gnuplot, "also emit a gnuplot script for plot data");
  app.add_flag("--timings", ctx.timings,
               "include wall-time columns in outputs (breaks byte reproducibility)");

  ModelOptions mo;
  app.add_option("--model_id", mo.id, "model id (pendulum, pendulum-linearized, drone-x/y/z, scalar)")
      ->capture_default_str();
  app.add_option("--model_dt", mo.dt, "sampling period")->capture_default_str();
  app.add_option("--model_gravity", mo.gravity, "gravity constant")->capture_default_str();
  app.add_option("--model_mass", mo.mass, "pendulum mass")->capture_default_str();
  app.add_option("--model_length", mo.length, "pendulum length")->capture_default_str();

  SolverOptions so;
  app.add_option("--solver_theta", so.theta, "decrease margin (negative: model default)")
      ->capture_default_str();
  app.add_option("--solver_qx", so.qx, "state weight scale (negative: model default)")
      ->capture_default_str();
  app.add_option("--solver_qu", so.qu, "input weight scale (negative: model default)")
      ->capture_default_str();
  app.add_option("--solver_eps_p", so.eps_p, "eigenvalue floor of P")->capture_default_str();
  app.add_option("--solver_cap_p", so.cap_p, "eigenvalue cap of P")->capture_default_str();
  app.add_option("--solver_anchor_weight", so.anchor_weight,
                 "certificate anchor weight (negative: model default)")
      ->capture_default_str();
  app.add_option("--solver_anchor_margin", so.anchor_margin, "anchor decrease margin")
      ->capture_default_str();
  app.add_option("--solver_reg_p", so.reg_p, "tie-break regularizer weight")
      ->capture_default_str();
  app.add_option("--solver_multistart", so.multistart, "number of optimizer starts")
      ->capture_default_str();
  app.add_option("--solver_tol_feasibility", so.tol_feasibility, "decrease-residual tolerance")
      ->capture_default_str();

  GridOptions go;
  TrainOptions to;
  std::string controller = "osap";
  std::string checkpoint;
  std::string x0_csv = "-2.3,5";
  double r_value = 0.0;
  int steps = 100;
  double safety = 10.0;
  std::string bench_controllers = "osap,lqr1,ilqr";
  std::string bench_thetas = "0.0001,0.001,0.01";
  int bench_count = 100;
  double bench_box = 1.0;
  bool bench_check = false;
  double roa_step = 0.1;
  int roa_horizon = 500;
  double roa_radius = -1.0;
  std::string bounds_dataset;
  std::string bounds_checkpoint;
  int bounds_density = 101;
  std::string compare_checkpoints;

  CLI::App* c_dataset = app.add_subcommand("dataset", "label a grid and write the dataset");
  c_dataset->add_option("--x_step", go.x_step, "state grid step")->capture_default_str();
  c_dataset->add_option("--r_step", go.r_step, "reference grid step")->capture_default_str();
  c_dataset->add_option("--endpoint", go.endpoint, "inclusive|exclusive")
      ->capture_default_str();

  CLI::App* c_train = app.add_subcommand("train", "train the imitation network");
  c_train->add_option("--dataset", to.dataset, "dataset file (binary or csv)");
  c_train->add_option("--hidden", to.hidden, "hidden layer widths")->capture_default_str();
  c_train->add_option("--activation", to.activation, "relu|tanh")->capture_default_str();
  c_train->add_option("--lr0", to.lr0, "initial learning rate")->capture_default_str();
  c_train->add_option("--lr_min", to.lr_min, "cosine floor")->capture_default_str();
  c_train->add_option("--epochs", to.epochs, "training epochs")->capture_default_str();
  c_train->add_option("--t_max", to.t_max, "cosine period (-1: epochs)")
      ->capture_default_str();
  c_train->add_option("--batch", to.batch, "minibatch size")->capture_default_str();
  c_train->add_option("--dropout", to.dropout, "hidden dropout rate")
      ->capture_default_str();
  c_train->add_option("--val_fraction", to.val_fraction, "held-out fraction")
      ->capture_default_str();
  c_train->add_flag("--grow", to.grow,
                    "sweep a width ladder and keep the smallest network under the threshold");
  c_train->add_option("--grow_threshold", to.grow_threshold,
                      "validation-MSE target for the ladder sweep")
      ->capture_default_str();

  CLI::App* c_sim = app.add_subcommand("simulate", "closed-loop run with trace/plot data");
  c_sim->add_option("--controller", controller, "osap|nn|lqr1|ilqr")->capture_default_str();
  c_sim->add_option("--checkpoint", checkpoint, "checkpoint for the nn controller");
  c_sim->add_option("--x0", x0_csv, "initial state (comma separated)")->capture_default_str();
  c_sim->add_option("--r", r_value, "reference value")->capture_default_str();
  c_sim->add_option("--steps", steps, "horizon")->capture_default_str();
  c_sim->add_option("--safety", safety, "safety box factor")->capture_default_str();

  CLI::App* c_bench = app.add_subcommand("bench", "batch experiments over seeded draws");
  c_bench->add_option("--controllers", bench_controllers, "comma list of controllers")
      ->capture_default_str();
  c_bench->add_option("--thetas", bench_thetas, "comma list of theta values")
      ->capture_default_str();
  c_bench->add_option("--count", bench_count, "number of seeded draws")
      ->capture_default_str();
  c_bench->add_option("--steps", steps, "horizon per run")->capture_default_str();
  c_bench->add_option("--box", bench_box, "init box half width")->capture_default_str();
  c_bench->add_option("--checkpoint", checkpoint, "checkpoint when 'nn' is benchmarked");
  c_bench->add_flag("--check", bench_check, "exit 4 unless the PI trend over theta holds");

  CLI::App* c_roa = app.add_subcommand("roa", "region-of-attraction falsification");
  c_roa->add_option("--controller", controller, "osap|nn|lqr1|ilqr")->capture_default_str();
  c_roa->add_option("--checkpoint", checkpoint, "checkpoint for the nn controller");
  c_roa->add_option("--r", r_value, "reference value")->capture_default_str();
  c_roa->add_option("--step", roa_step, "grid step over the operating box")
      ->capture_default_str();
  c_roa->add_option("--horizon", roa_horizon, "simulation horizon per cell")
      ->capture_default_str();
  c_roa->add_option("--radius", roa_radius, "convergence ball (negative: max(sigma, 1e-2))")
      ->capture_default_str();

  CLI::App* c_bounds = app.add_subcommand("bounds", "tracking-bound report (sigma, theta_min, vartheta)");
  c_bounds->add_option("--dataset", bounds_dataset, "labeled dataset");
  c_bounds->add_option("--checkpoint", bounds_checkpoint, "trained checkpoint (optional)");
  c_bounds->add_option("--val_fraction", to.val_fraction, "held-out fraction for gaps")
      ->capture_default_str();
  c_bounds->add_option("--density", bounds_density, "constants estimation grid density")
      ->capture_default_str();

  CLI::App* c_compare = app.add_subcommand("compare", "drone per-axis control effort table");
  c_compare->add_option("--steps", steps, "horizon per axis")->capture_default_str();
  c_compare->add_option("--checkpoints", compare_checkpoints,
                        "nn checkpoints for x,y,z (omit to use the optimizer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (c_dataset->parsed()) return cmd_dataset(ctx, mo, so, go);
    if (c_train->parsed()) return cmd_train(ctx, to);
    if (c_sim->parsed())
      return cmd_simulate(ctx, mo, so, controller, checkpoint, x0_csv, r_value, steps, safety);
    if (c_bench->parsed())
      return cmd_bench(ctx, mo, so, bench_controllers, bench_thetas, bench_count, steps,
                       bench_box, checkpoint, bench_check);
    if (c_roa->parsed())
      return cmd_roa(ctx, mo, so, controller, checkpoint, r_value, roa_step, roa_horizon,
                     roa_radius);
    if (c_bounds->parsed())
      return cmd_bounds(ctx, mo, so, bounds_dataset, bounds_checkpoint, to.val_fraction,
                        bounds_density);
    if (c_compare->parsed()) return cmd_compare(ctx, so, steps, compare_checkpoints);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitConfig;
}
