#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osap/errors.hpp"

namespace osap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned box in R^d.
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x, double slack = 0.0) const;
  /// The same box scaled by `factor` about its center.
  Box scaled(double factor) const;
};

/// Discrete-time control-affine plant x+ = f(x) + g(x) u, y = h(x, u).
/// All maps are pure; evaluation is safe from any number of threads.
struct SystemModel {
  std::string id;
  int n = 0;  // state dimension
  int p = 0;  // input dimension
  int m = 0;  // output dimension

  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> g;
  std::function<Vec(const Vec&, const Vec&)> h;

  Box X;  // operating box
  Box R;  // steady-state admissible reference box

  std::optional<std::function<Mat(const Vec&)>> analytic_jacobian;
  /// Optional closed-form (x_bar, u_bar) used as the Newton initial guess.
  std::optional<std::function<std::pair<Vec, Vec>(const Vec&)>> steady_state_guess;
};

/// Result of a stabilizability check on a linearization.
struct StabilizabilityInfo {
  int controllability_rank = 0;
  bool stabilizable = true;
  std::string note;
};

struct LinearizedDynamics {
  Mat A;
  Mat B;
  Vec x_ref;
  StabilizabilityInfo diag;
};

struct SteadyStatePair {
  Vec x_bar;
  Vec u_bar;
  Vec r;
  double residual = 0.0;
  int iterations = 0;
};

/// Sample-based estimates of the linearization-error bound and Lipschitz
/// constants; lower estimates of the true suprema, labeled as such.
struct ModelConstants {
  double delta = 0.0;
  double mu_f = 0.0;
  double mu_g = 0.0;
  long sample_count = 0;
  int grid_density = 0;
};

Vec step(const SystemModel& model, const Vec& x, const Vec& u);

LinearizedDynamics linearize(const SystemModel& model, const Vec& x_ref);

SteadyStatePair steady_state(const SystemModel& model, const Vec& r,
                             double tol = 1e-10, int max_iters = 100);

ModelConstants estimate_constants(const SystemModel& model, int grid_density,
                                  int workers = 1, std::uint64_t seed = 17);

/// Model parameters overridable from the CLI config ([model] section).
struct ModelParams {
  double dt = 0.1;
  double gravity = 9.81;
  double mass = 1.0;
  double length = 1.0;
};

/// Registry of built-in benchmark models. Known ids: "pendulum",
/// "pendulum-linearized", "drone-x", "drone-y", "drone-z", "scalar".
SystemModel make_model(const std::string& id, const ModelParams& params = {});

std::vector<std::string> model_registry_ids();

}  // namespace osap
