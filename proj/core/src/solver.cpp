#include "osap/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <cstring>
#include <limits>

#include "osap/rng.hpp"

namespace osap {

namespace {

constexpr double kSqrtSmoothing = 1e-18;  // inside the decrease-constraint sqrt
constexpr double kCapWeight = 1e4;        // eigenvalue-cap penalty weight

void append_bytes(std::vector<unsigned char>& buf, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  buf.insert(buf.end(), b, b + n);
}

void append_double(std::vector<unsigned char>& buf, double v) { append_bytes(buf, &v, sizeof(v)); }

void append_mat(std::vector<unsigned char>& buf, const Mat& m) {
  const std::int64_t r = m.rows(), c = m.cols();
  append_bytes(buf, &r, sizeof(r));
  append_bytes(buf, &c, sizeof(c));
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) append_double(buf, m(i, j));
}

bool is_symmetric(const Mat& m, double tol = 1e-12) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

}  // namespace

void SolverConfig::validate(int n, int p) const {
  if (!(theta > 0.0)) throw ConfigError("SolverConfig: theta must be > 0");
  if (!(eps_P > 0.0)) throw ConfigError("SolverConfig: eps_P must be > 0");
  if (!(cap_P > eps_P)) throw ConfigError("SolverConfig: cap_P must exceed eps_P");
  if (multistart < 1) throw ConfigError("SolverConfig: multistart must be >= 1");
  if (Qx.rows() != n || Qx.cols() != n) throw ConfigError("SolverConfig: Qx must be n x n");
  if (Qu.rows() != p || Qu.cols() != p) throw ConfigError("SolverConfig: Qu must be p x p");
  if (!is_symmetric(Qx) || !is_symmetric(Qu)) throw ConfigError("SolverConfig: weights must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> ex(Qx);
  if (ex.eigenvalues().minCoeff() < -1e-12) throw ConfigError("SolverConfig: Qx must be PSD");
  Eigen::SelfAdjointEigenSolver<Mat> eu(Qu);
  if (eu.eigenvalues().minCoeff() <= 0.0) throw ConfigError("SolverConfig: Qu must be PD");
  if (!(penalty_init > 0.0) || !(penalty_growth > 1.0))
    throw ConfigError("SolverConfig: penalty schedule must be positive and growing");
  if (anchor_weight < 0.0) throw ConfigError("SolverConfig: anchor_weight must be >= 0");
  if (!(anchor_margin > 0.0)) throw ConfigError("SolverConfig: anchor_margin must be > 0");
  if (!(anchor_scale > 0.0)) throw ConfigError("SolverConfig: anchor_scale must be > 0");
}

std::uint64_t SolverConfig::hash() const {
  std::vector<unsigned char> buf;
  append_double(buf, theta);
  append_mat(buf, Qx);
  append_mat(buf, Qu);
  append_double(buf, eps_P);
  append_double(buf, cap_P);
  append_double(buf, penalty_init);
  append_double(buf, penalty_growth);
  const std::int64_t ms = multistart;
  append_bytes(buf, &ms, sizeof(ms));
  append_bytes(buf, &seed, sizeof(seed));
  append_double(buf, tol_stationarity);
  append_double(buf, tol_feasibility);
  const std::int64_t mo = max_outer, mi = max_inner;
  append_bytes(buf, &mo, sizeof(mo));
  append_bytes(buf, &mi, sizeof(mi));
  append_double(buf, reg_P);
  append_double(buf, anchor_weight);
  append_double(buf, anchor_margin);
  append_double(buf, anchor_scale);
  const unsigned char ed = enforce_decrease ? 1 : 0;
  append_bytes(buf, &ed, 1);
  const unsigned char fz = freeze_P ? 1 : 0;
  append_bytes(buf, &fz, 1);
  if (freeze_P) append_mat(buf, *freeze_P);
  return fnv1a64(buf.data(), buf.size());
}

SolverConfig default_solver_config(const SystemModel& model) {
  SolverConfig cfg;
  cfg.Qx = 2.0 * Mat::Identity(model.n, model.n);
  cfg.Qu = 0.1 * Mat::Identity(model.p, model.p);
  cfg.theta = 0.01;
  cfg.tol_feasibility = 1e-7;
  cfg.eps_P = 1e-3;
  cfg.cap_P = 10.0;
  if (model.id.rfind("pendulum", 0) == 0) {
    cfg.anchor_weight = 1e8;
  } else if (model.id.rfind("drone", 0) == 0) {
    cfg.Qx = 20.0 * Mat::Identity(model.n, model.n);
    cfg.theta = 1.0;
    cfg.cap_P = 5e3;  // theta = 1 needs a large certificate scale
    cfg.anchor_weight = 1e8;
  } else if (model.id == "scalar") {
    cfg.Qx = Mat::Identity(1, 1);
    cfg.theta = 0.1;
  }
  return cfg;
}

double LyapunovMatrix::lambda_min() const {
  Eigen::SelfAdjointEigenSolver<Mat> es(P());
  return es.eigenvalues().minCoeff();
}

double LyapunovMatrix::lambda_max() const {
  Eigen::SelfAdjointEigenSolver<Mat> es(P());
  return es.eigenvalues().maxCoeff();
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible_suboptimal: return "feasible-suboptimal";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

double lyapunov_value(const Vec& x, const Vec& x_bar, const Mat& P) {
  const Vec d = x - x_bar;
  return std::sqrt(std::abs(d.dot(P * d)));
}

double decrease_residual(const Vec& x, const Vec& x_plus, const Vec& x_bar, const Mat& P,
                         double theta) {
  return lyapunov_value(x_plus, x_bar, P) - lyapunov_value(x, x_bar, P) +
         theta * (x - x_bar).norm();
}

namespace {

// One (x, r) instance of problem (4) in penalty form over z = [u; vecL],
// where vecL stacks the lower triangle of L and P = L L' + eps I.
struct PenaltyProblem {
  int n = 0, p = 0, nL = 0, dim = 0;
  Mat A, B, Qx, Qu;
  Vec x, x_bar, u_bar, d0;  // d0 = A x - x_bar
  Vec e;                    // x - x_bar
  double e_norm = 0.0;
  double theta = 0.0, eps = 0.0, rho = 0.0, cap = 0.0;
  bool optimize_P = true;
  bool with_constraint = true;
  bool with_anchor = false;
  double w_anchor = 0.0;  // already scaled by (1 + ||e||^2)
  Mat P_anchor;
  Mat P_frozen;

  Vec u_of(const Vec& z) const { return z.head(p); }

  Mat L_of(const Vec& z) const {
    Mat L = Mat::Zero(n, n);
    int k = p;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) L(i, j) = z[k++];
    return L;
  }

  Mat P_of(const Vec& z) const {
    if (!optimize_P) return P_frozen;
    const Mat L = L_of(z);
    return L * L.transpose() + eps * Mat::Identity(n, n);
  }

  // bare objective value at z (no regularizer, no penalties)
  double base_cost(const Vec& z) const {
    const Vec u = u_of(z);
    const Mat P = P_of(z);
    const Vec d = d0 + B * u;
    const Vec du = u - u_bar;
    return d.dot(Qx * d) + du.dot(Qu * du) + e.dot(P * e);
  }

  double constraint_exact(const Vec& z) const {
    if (!with_constraint) return 0.0;
    const Vec u = u_of(z);
    const Vec x_plus = A * x + B * u;
    return decrease_residual(x, x_plus, x_bar, P_of(z), theta);
  }

  // Penalty objective and gradient. Smooth (C^1) everywhere.
  double eval(const Vec& z, double lambda, Vec& grad) const {
    grad.setZero(dim);
    const Vec u = u_of(z);
    const Vec d = d0 + B * u;
    const Vec du = u - u_bar;

    double val = d.dot(Qx * d) + du.dot(Qu * du);
    grad.head(p) = 2.0 * (B.transpose() * (Qx * d)) + 2.0 * (Qu * du);

    Mat L, P;
    if (optimize_P) {
      L = L_of(z);
      P = L * L.transpose() + eps * Mat::Identity(n, n);
    } else {
      P = P_frozen;
    }

    Mat gL = Mat::Zero(n, n);
    const Vec Pe = P * e;
    val += e.dot(Pe);
    if (optimize_P) {
      gL.noalias() += 2.0 * e * (L.transpose() * e).transpose();

      const Mat LLt = P - eps * Mat::Identity(n, n);
      val += rho * LLt.squaredNorm();
      gL.noalias() += 4.0 * rho * (LLt * L);

      if (with_anchor) {
        const Mat dPa = P - P_anchor;
        val += w_anchor * dPa.squaredNorm();
        gL.noalias() += 4.0 * w_anchor * (dPa * L);
      }

      // soft eigenvalue cap; d(lambda_max)/dP = v v' for the top eigenvector.
      // Its weight tracks the constraint penalty so neither can starve the
      // other as lambda grows.
      const double cap_weight = std::max(kCapWeight, lambda);
      Eigen::SelfAdjointEigenSolver<Mat> es;
      es.computeDirect(P);
      const double lmax = es.eigenvalues()[n - 1];
      const double over = lmax - cap;
      if (over > 0.0) {
        val += cap_weight * over * over;
        const Vec v = es.eigenvectors().col(n - 1);
        gL.noalias() += cap_weight * 2.0 * over * 2.0 * v * (L.transpose() * v).transpose();
      }
    }

    if (with_constraint) {
      const Vec Pd = P * d;
      const double q_plus = d.dot(Pd) + kSqrtSmoothing;
      const double q_now = e.dot(Pe) + kSqrtSmoothing;
      const double sq_plus = std::sqrt(q_plus);
      const double sq_now = std::sqrt(q_now);
      const double c = sq_plus - sq_now + theta * e_norm;
      if (c > 0.0) {
        val += lambda * c * c;
        const double w = 2.0 * lambda * c;
        grad.head(p) += w * (B.transpose() * Pd) / sq_plus;
        if (optimize_P) {
          gL.noalias() += (w / sq_plus) * d * (L.transpose() * d).transpose();
          gL.noalias() -= (w / sq_now) * e * (L.transpose() * e).transpose();
        }
      }
    }

    if (optimize_P) {
      int k = p;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) grad[k++] = gL(i, j);
    }
    return val;
  }
};

struct InnerResult {
  double value = 0.0;
  int iterations = 0;
  bool grad_converged = false;
};

// Dense BFGS with Armijo backtracking on the penalty objective.
InnerResult bfgs_minimize(const PenaltyProblem& pr, double lambda, Vec& z, int max_iter,
                          double grad_tol) {
  InnerResult res;
  const int dim = pr.dim;
  Vec g(dim), g_new(dim), dir(dim), z_try(dim);
  double f = pr.eval(z, lambda, g);
  Mat H = Mat::Identity(dim, dim);

  for (int it = 0; it < max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() <= grad_tol * std::max(1.0, std::abs(f))) {
      res.grad_converged = true;
      break;
    }
    dir.noalias() = -(H * g);
    double gd = g.dot(dir);
    if (!(gd < 0.0)) {  // reset on loss of descent direction
      H.setIdentity();
      dir = -g;
      gd = g.dot(dir);
      if (!(gd < 0.0)) break;
    }

    double alpha = 1.0;
    double f_try = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      z_try = z + alpha * dir;
      f_try = pr.eval(z_try, lambda, g_new);
      if (std::isfinite(f_try) && f_try <= f + 1e-4 * alpha * gd) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++res.iterations;
    if (!accepted) break;

    const Vec s = alpha * dir;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Vec Hy = H * y;
      const double yHy = y.dot(Hy);
      // standard inverse-Hessian BFGS update
      H += ((sy + yHy) / (sy * sy)) * (s * s.transpose());
      H -= (Hy * s.transpose() + s * Hy.transpose()) / sy;
    } else {
      H.setIdentity();
    }
    z = z_try;
    f = f_try;
    g = g_new;
    if (s.cwiseAbs().maxCoeff() < 1e-15 * std::max(1.0, z.cwiseAbs().maxCoeff())) break;
  }
  res.value = f;
  return res;
}

struct Candidate {
  Vec z;
  double cost = std::numeric_limits<double>::infinity();       // bare objective
  double objective = std::numeric_limits<double>::infinity();  // with regularizers
  double viol = std::numeric_limits<double>::infinity();
  double P_fro = 0.0;
  int inner = 0;
  int outer = 0;
  bool grad_converged = false;
};

bool candidate_better(const Candidate& a, const Candidate& b, double tol_feas) {
  const bool fa = a.viol <= tol_feas, fb = b.viol <= tol_feas;
  if (fa != fb) return fa;
  if (!fa) return a.viol < b.viol;  // both infeasible: smaller violation
  const double tie = 1e-12 * std::max({1.0, std::abs(a.objective), std::abs(b.objective)});
  if (std::abs(a.objective - b.objective) > tie) return a.objective < b.objective;
  if (std::abs(a.P_fro - b.P_fro) > 1e-12 * std::max(1.0, a.P_fro)) return a.P_fro < b.P_fro;
  for (int i = 0; i < a.z.size(); ++i) {
    if (a.z[i] != b.z[i]) return a.z[i] < b.z[i];
  }
  return false;
}

}  // namespace

namespace {

// Constant per (model, config): the infinite-horizon certificate of the
// linearization at the reference-box center's equilibrium, scaled so the
// certified decrease keeps `anchor_margin * theta` in reserve along the worst
// unit direction (and never drops below twice the eps floor).
Mat anchor_certificate(const SystemModel& model, const SolverConfig& cfg) {
  const Vec r_center = 0.5 * (model.R.lower + model.R.upper);
  const SteadyStatePair ss_c = steady_state(model, r_center);
  const LinearizedDynamics lin_c = linearize(model, ss_c.x_bar);
  const DareResult d = dare(lin_c.A, lin_c.B, cfg.Qx, cfg.Qu);

  // worst-direction decrease of the raw certificate per unit state
  double drop0 = std::numeric_limits<double>::infinity();
  const int n = model.n;
  const Mat BtP = lin_c.B.transpose() * d.P;
  const Mat M = BtP * lin_c.B;
  const Eigen::FullPivLU<Mat> lu(M);
  const int dirs = n == 1 ? 2 : 64;
  for (int k = 0; k < dirs; ++k) {
    Vec dir(n);
    if (n == 1) {
      dir[0] = k == 0 ? 1.0 : -1.0;
    } else {
      // n = 2 covers the in-tree models; higher n falls back to axis probes
      if (n == 2) {
        const double phi = 2.0 * 3.14159265358979323846 * k / dirs;
        dir << std::cos(phi), std::sin(phi);
      } else {
        dir = Vec::Zero(n);
        dir[k % n] = (k / n) % 2 == 0 ? 1.0 : -1.0;
        if (k >= 2 * n) break;
      }
    }
    const Vec d_free = lin_c.A * dir;
    Vec u = Vec::Zero(model.p);
    if (lu.isInvertible()) u = lu.solve(-(BtP * d_free));
    const Vec xp = d_free + lin_c.B * u;
    const double drop = std::sqrt(std::abs(dir.dot(d.P * dir))) -
                        std::sqrt(std::abs(xp.dot(d.P * xp)));
    drop0 = std::min(drop0, drop);
  }

  Eigen::SelfAdjointEigenSolver<Mat> es(d.P);
  const double lmin_raw = std::max(es.eigenvalues().minCoeff(), 1e-300);
  double scale = cfg.anchor_margin * cfg.theta / std::max(0.95 * drop0, 1e-12);
  scale *= scale;
  scale = std::max(scale, 2.0 * cfg.eps_P / lmin_raw);
  return cfg.anchor_scale * scale * d.P;
}

PenaltyProblem make_problem(const SystemModel& model, const Vec& x, const SteadyStatePair& ss,
                            const LinearizedDynamics& lin, const SolverConfig& cfg) {
  PenaltyProblem pr;
  pr.n = model.n;
  pr.p = model.p;
  pr.nL = pr.n * (pr.n + 1) / 2;
  pr.optimize_P = !cfg.freeze_P.has_value();
  pr.with_constraint = cfg.enforce_decrease;
  pr.dim = pr.p + (pr.optimize_P ? pr.nL : 0);
  pr.A = lin.A;
  pr.B = lin.B;
  pr.Qx = cfg.Qx;
  pr.Qu = cfg.Qu;
  pr.x = x;
  pr.x_bar = ss.x_bar;
  pr.u_bar = ss.u_bar;
  pr.e = x - ss.x_bar;
  pr.e_norm = pr.e.norm();
  pr.d0 = lin.A * x - ss.x_bar;
  pr.theta = cfg.theta;
  pr.eps = cfg.eps_P;
  pr.rho = cfg.reg_P;
  pr.cap = cfg.cap_P;
  if (!pr.optimize_P) pr.P_frozen = *cfg.freeze_P;
  if (pr.optimize_P && cfg.anchor_weight > 0.0) {
    pr.with_anchor = true;
    pr.P_anchor = anchor_certificate(model, cfg);
    pr.w_anchor = cfg.anchor_weight * (1.0 + pr.e.squaredNorm());
  }
  return pr;
}

}  // namespace

namespace detail {

double penalty_eval(const SystemModel& model, const Vec& x, const SteadyStatePair& ss,
                    const SolverConfig& cfg, double lambda, const Vec& z, Vec& grad) {
  const LinearizedDynamics lin = linearize(model, x);
  const PenaltyProblem pr = make_problem(model, x, ss, lin, cfg);
  grad.resize(pr.dim);
  return pr.eval(z, lambda, grad);
}

int penalty_dim(const SystemModel& model, const SolverConfig& cfg) {
  const int nL = model.n * (model.n + 1) / 2;
  return model.p + (cfg.freeze_P ? 0 : nL);
}

}  // namespace detail

ControlSolution solve_at(const SystemModel& model, const Vec& x, const SteadyStatePair& ss,
                         const SolverConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate(model.n, model.p);

  const LinearizedDynamics lin = linearize(model, x);
  const PenaltyProblem pr = make_problem(model, x, ss, lin, cfg);

  // deterministic multistart: LQR-1 warm start, steady input, seeded perturbations
  Vec u_warm;
  try {
    u_warm = lqr_one_step(lin.A, lin.B, x, ss.x_bar, ss.u_bar, Mat::Identity(pr.n, pr.n), cfg.Qu,
                          cfg.Qx);
  } catch (const SingularSystemError&) {
    u_warm = ss.u_bar;
  }
  // isotropic anchor inside the eigenvalue band
  const double mid = 0.5 * (cfg.eps_P + std::min(cfg.cap_P, 1.0 + cfg.eps_P));
  const double l_unit = std::sqrt(std::max(0.0, mid - cfg.eps_P));

  auto pack_start = [&](const Vec& u0, const Mat& L0) {
    Vec z(pr.dim);
    z.head(pr.p) = u0;
    if (pr.optimize_P) {
      int k = pr.p;
      for (int i = 0; i < pr.n; ++i)
        for (int j = 0; j <= i; ++j) z[k++] = L0(i, j);
    }
    return z;
  };

  std::vector<Vec> starts;
  if (pr.with_anchor) {
    // factor the anchor so the first start sits in its basin
    Mat M = pr.P_anchor - cfg.eps_P * Mat::Identity(pr.n, pr.n);
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) {
      M += (1e-9 * std::max(1.0, pr.P_anchor.norm())) * Mat::Identity(pr.n, pr.n);
      llt.compute(M);
    }
    if (llt.info() == Eigen::Success) {
      starts.push_back(pack_start(u_warm, Mat(llt.matrixL())));
    }
  }
  // L = 0 start: P stays exactly at the eps*I floor (L = 0 is stationary in
  // L), so wherever the floor certificate is feasible the label comes out as
  // eps*I bit-for-bit; the inner loop then only shapes u.
  starts.push_back(pack_start(u_warm, Mat::Zero(pr.n, pr.n)));
  if (pr.optimize_P && pr.n >= 2) {
    // band-extremal sheared certificates; the decrease constraint often needs
    // these in the directions the input cannot reach within one step
    const double c = std::sqrt(0.5 * (cfg.cap_P - cfg.eps_P));
    for (double sign : {1.0, -1.0}) {
      if (static_cast<int>(starts.size()) >= std::max(cfg.multistart, 3)) break;
      Mat L0 = Mat::Zero(pr.n, pr.n);
      L0(0, 0) = c;
      L0(1, 0) = sign * c;
      // seed u so that x+ already sits near the metric-optimal point of this
      // shear, which puts the start close to the feasible sliver
      Vec u0 = u_warm;
      const Mat P0 = L0 * L0.transpose() + cfg.eps_P * Mat::Identity(pr.n, pr.n);
      const Vec d_free = lin.A * x - ss.x_bar;
      // least-squares u for P0-optimal d: minimize (d_free + B u)' P0 (d_free + B u)
      const Mat BtP = lin.B.transpose() * P0;
      const Mat M = BtP * lin.B;
      Eigen::FullPivLU<Mat> lu(M);
      if (lu.isInvertible()) u0 = lu.solve(-(BtP * d_free));
      starts.push_back(pack_start(u0, L0));
    }
  }
  if (static_cast<int>(starts.size()) < cfg.multistart) {
    starts.push_back(pack_start(ss.u_bar, l_unit * Mat::Identity(pr.n, pr.n)));
  }
  for (int k = static_cast<int>(starts.size()); k < cfg.multistart; ++k) {
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(k));
    Vec u0 = u_warm;
    const double scale = 0.5 * std::max(1.0, (u_warm - ss.u_bar).norm());
    for (int i = 0; i < pr.p; ++i) u0[i] += scale * rng.gaussian();
    Mat L0 = l_unit * Mat::Identity(pr.n, pr.n);
    for (int i = 0; i < pr.n; ++i)
      for (int j = 0; j <= i; ++j) L0(i, j) += 0.3 * l_unit * rng.gaussian();
    starts.push_back(pack_start(u0, L0));
  }

  Candidate best;
  bool have_best = false;
  const bool debug = std::getenv("OSAP_SOLVER_DEBUG") != nullptr;
  int start_idx = -1;
  for (const Vec& z0 : starts) {
    ++start_idx;
    Candidate cand;
    cand.z = z0;
    double lambda = pr.with_constraint ? cfg.penalty_init : 0.0;
    double prev_viol = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < cfg.max_outer; ++outer) {
      const InnerResult inner =
          bfgs_minimize(pr, lambda, cand.z, cfg.max_inner, cfg.tol_stationarity);
      cand.inner += inner.iterations;
      cand.grad_converged = inner.grad_converged;
      ++cand.outer;
      cand.viol = std::max(0.0, pr.constraint_exact(cand.z));
      if (debug) {
        std::fprintf(stderr, "  [start %d outer %d] lambda=%.1e viol=%.3e f=%.6e it=%d conv=%d\n",
                     start_idx, outer, lambda, cand.viol, inner.value, inner.iterations,
                     inner.grad_converged ? 1 : 0);
      }
      if (!pr.with_constraint || cand.viol <= cfg.tol_feasibility) break;
      if (cand.viol > 0.1 * prev_viol) lambda *= cfg.penalty_growth;
      prev_viol = cand.viol;
      if (lambda > 1e14) break;
    }

    // hard eigenvalue cap: scale the factor back onto the cap, let the inner
    // loop recover feasibility, and finish with a pure projection
    if (pr.optimize_P) {
      for (int round = 0; round < 3; ++round) {
        Eigen::SelfAdjointEigenSolver<Mat> es(pr.P_of(cand.z));
        const double lmax = es.eigenvalues().maxCoeff();
        if (lmax <= cfg.cap_P * (1.0 + 1e-12)) break;
        const double s = std::sqrt((cfg.cap_P - cfg.eps_P) / (lmax - cfg.eps_P));
        for (int i = pr.p; i < pr.dim; ++i) cand.z[i] *= s;
        if (round == 2) break;  // keep the final projection unconditional
        const InnerResult inner = bfgs_minimize(pr, lambda, cand.z, cfg.max_inner,
                                                cfg.tol_stationarity);
        cand.inner += inner.iterations;
        cand.grad_converged = inner.grad_converged;
      }
      cand.viol = std::max(0.0, pr.constraint_exact(cand.z));
    }

    cand.cost = pr.base_cost(cand.z);
    {
      Vec tmp_grad(pr.dim);
      cand.objective = pr.eval(cand.z, 0.0, tmp_grad);
    }
    cand.P_fro = pr.P_of(cand.z).norm();
    if (!have_best || candidate_better(cand, best, cfg.tol_feasibility)) {
      best = cand;
      have_best = true;
    }
  }

  ControlSolution sol;
  sol.u_star = pr.u_of(best.z);
  if (pr.optimize_P) {
    sol.P_star.L = pr.L_of(best.z);
    sol.P_star.eps = cfg.eps_P;
  } else {
    // factor the frozen matrix so that P() reproduces it
    const Mat Pf = *cfg.freeze_P;
    Eigen::SelfAdjointEigenSolver<Mat> es(Pf - cfg.eps_P * Mat::Identity(pr.n, pr.n));
    const Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    sol.P_star.L = es.eigenvectors() * lam.asDiagonal();
    sol.P_star.eps = cfg.eps_P;
  }
  sol.cost = best.cost;
  sol.feas_residual = best.viol;
  sol.x_plus = lin.A * x + lin.B * sol.u_star;
  sol.outer_iterations = best.outer;
  sol.inner_iterations = best.inner;
  const bool feasible = !pr.with_constraint || best.viol <= cfg.tol_feasibility;
  sol.status = !feasible              ? SolveStatus::infeasible
               : best.grad_converged ? SolveStatus::optimal
                                     : SolveStatus::feasible_suboptimal;
  sol.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return sol;
}

ControlSolution solve(const SystemModel& model, const Vec& x, const Vec& r,
                      const SolverConfig& cfg) {
  const SteadyStatePair ss = steady_state(model, r);
  return solve_at(model, x, ss, cfg);
}

Vec lqr_one_step(const Mat& A, const Mat& B, const Vec& x, const Vec& x_bar, const Vec& u_bar,
                 const Mat& Rx, const Mat& Ru, const Mat& Rf) {
  (void)Rx;  // u-independent term of the cost
  const Mat M = Ru + B.transpose() * Rf * B;
  Eigen::FullPivLU<Mat> lu(M);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw SingularSystemError("lqr_one_step: singular normal matrix Ru + B'Rf B");
  }
  const Vec rhs = Ru * u_bar + B.transpose() * (Rf * (x_bar - A * x));
  return lu.solve(rhs);
}

DareResult dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol,
                long max_iters) {
  DareResult out;
  Mat P = Q;
  for (long it = 0; it < max_iters; ++it) {
    const Mat BtP = B.transpose() * P;
    const Mat S = R + BtP * B;
    Eigen::FullPivLU<Mat> lu(S);
    lu.setThreshold(1e-14);
    if (!lu.isInvertible()) throw DareError("dare: singular input-weight block");
    const Mat P_next = Q + A.transpose() * (P - P * B * lu.solve(BtP)) * A;
    if (!P_next.allFinite()) throw DareError("dare: iteration diverged");
    const double change = (P_next - P).cwiseAbs().maxCoeff();
    P = P_next;
    if (change <= tol) {
      out.P = P;
      out.iterations = static_cast<int>(it) + 1;
      const Mat S_final = R + B.transpose() * P * B;
      out.K = S_final.fullPivLu().solve(B.transpose() * P * A);
      return out;
    }
  }
  throw DareError("dare: no fixed point within the iteration cap");
}

std::function<Vec(const Vec&)> make_ilqr_policy(const SystemModel& model, const Mat& Qx,
                                                const Mat& Qu, const Vec& r) {
  const SteadyStatePair ss = steady_state(model, r);
  return [model, Qx, Qu, ss](const Vec& x) -> Vec {
    const LinearizedDynamics lin = linearize(model, x);
    const DareResult dr = dare(lin.A, lin.B, Qx, Qu);
    return ss.u_bar - dr.K * (x - ss.x_bar);
  };
}

}  // namespace osap
