#include "osap/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "osap/parallel.hpp"
#include "osap/rng.hpp"

namespace osap {

bool Box::contains(const Vec& x, double slack) const {
  for (int i = 0; i < dim(); ++i) {
    if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
  }
  return true;
}

Box Box::scaled(double factor) const {
  Box out;
  const Vec center = 0.5 * (lower + upper);
  const Vec half = 0.5 * (upper - lower);
  out.lower = center - factor * half;
  out.upper = center + factor * half;
  return out;
}

Vec step(const SystemModel& model, const Vec& x, const Vec& u) {
  Vec next = model.f(x) + model.g(x) * u;
  if (!next.allFinite()) {
    std::vector<double> bad(x.data(), x.data() + x.size());
    throw NumericOverflowError("step: non-finite state from model '" + model.id + "'", bad);
  }
  return next;
}

namespace {

Mat numeric_jacobian(const SystemModel& model, const Vec& x_ref) {
  const int n = model.n;
  Mat A(n, n);
  Vec xp = x_ref, xm = x_ref;
  for (int i = 0; i < n; ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x_ref[i]));
    xp[i] = x_ref[i] + h;
    xm[i] = x_ref[i] - h;
    const Vec fp = model.f(xp);
    const Vec fm = model.f(xm);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw LinearizationError("linearize: finite differencing left the numeric domain of '" +
                               model.id + "'");
    }
    A.col(i) = (fp - fm) / (2.0 * h);
    xp[i] = x_ref[i];
    xm[i] = x_ref[i];
  }
  return A;
}

StabilizabilityInfo check_stabilizability(const Mat& A, const Mat& B) {
  StabilizabilityInfo info;
  const int n = static_cast<int>(A.rows());
  Mat ctrb(n, n * static_cast<int>(B.cols()));
  Mat AkB = B;
  for (int k = 0; k < n; ++k) {
    ctrb.middleCols(k * B.cols(), B.cols()) = AkB;
    AkB = A * AkB;
  }
  Eigen::FullPivLU<Mat> lu(ctrb);
  lu.setThreshold(1e-10);
  info.controllability_rank = static_cast<int>(lu.rank());
  if (info.controllability_rank == n) {
    info.stabilizable = true;
    return info;
  }
  // PBH test on the unstable eigenvalues only.
  Eigen::EigenSolver<Mat> eig(A);
  info.stabilizable = true;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> lam = eig.eigenvalues()[i];
    if (std::abs(lam) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd pbh(n, n + static_cast<int>(B.cols()));
    pbh.leftCols(n) = A.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::FullPivLU<Eigen::MatrixXcd> plu(pbh);
    plu.setThreshold(1e-10);
    if (static_cast<int>(plu.rank()) < n) {
      info.stabilizable = false;
      info.note = "PBH rank deficiency at an unstable eigenvalue";
      break;
    }
  }
  return info;
}

}  // namespace

LinearizedDynamics linearize(const SystemModel& model, const Vec& x_ref) {
  LinearizedDynamics lin;
  lin.x_ref = x_ref;
  lin.A = model.analytic_jacobian ? (*model.analytic_jacobian)(x_ref)
                                  : numeric_jacobian(model, x_ref);
  lin.B = model.g(x_ref);
  if (!lin.A.allFinite() || !lin.B.allFinite()) {
    throw LinearizationError("linearize: non-finite Jacobian for '" + model.id + "'");
  }
  lin.diag = check_stabilizability(lin.A, lin.B);
  return lin;
}

SteadyStatePair steady_state(const SystemModel& model, const Vec& r, double tol, int max_iters) {
  const int n = model.n, p = model.p, m = model.m;
  Vec z(n + p);  // unknowns: (x_bar, u_bar)
  z.setZero();
  if (model.steady_state_guess) {
    auto [xg, ug] = (*model.steady_state_guess)(r);
    z.head(n) = xg;
    z.tail(p) = ug;
  }

  auto residual = [&](const Vec& zz) -> Vec {
    const Vec x = zz.head(n);
    const Vec u = zz.tail(p);
    Vec res(n + m);
    res.head(n) = x - model.f(x) - model.g(x) * u;
    res.tail(m) = r - model.h(x, u);
    return res;
  };

  Vec res = residual(z);
  double rnorm = res.norm();
  int iter = 0;
  for (; iter < max_iters && rnorm > tol; ++iter) {
    // numeric Jacobian of the residual
    Mat J(n + m, n + p);
    for (int i = 0; i < n + p; ++i) {
      const double h = std::max(1e-7, 1e-7 * std::abs(z[i]));
      Vec zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      J.col(i) = (residual(zp) - residual(zm)) / (2.0 * h);
    }
    const Vec dz = J.colPivHouseholderQr().solve(-res);
    if (!dz.allFinite()) break;

    // damped update: backtrack until the residual norm decreases
    double alpha = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec z_try = z + alpha * dz;
      const Vec res_try = residual(z_try);
      if (res_try.allFinite() && res_try.norm() < rnorm) {
        z = z_try;
        res = res_try;
        rnorm = res.norm();
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }

  if (!(rnorm <= tol)) {
    throw ReferenceInadmissibleError("steady_state: no solution of the equilibrium system for '" +
                                     model.id + "' (residual " + std::to_string(rnorm) + ")");
  }
  SteadyStatePair out;
  out.x_bar = z.head(n);
  out.u_bar = z.tail(p);
  out.r = r;
  out.residual = rnorm;
  out.iterations = iter;
  if (!model.X.contains(out.x_bar, 1e-9)) {
    throw ReferenceInadmissibleError("steady_state: equilibrium for '" + model.id +
                                     "' lies outside the operating box");
  }
  return out;
}

ModelConstants estimate_constants(const SystemModel& model, int grid_density, int workers,
                                  std::uint64_t seed) {
  if (grid_density < 2) throw ConfigError("estimate_constants: grid_density must be >= 2");
  const int n = model.n;

  // enumerate the grid points of X (grid_density per axis)
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(grid_density);
  auto point_at = [&](std::size_t flat) {
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
      const std::size_t k = flat % static_cast<std::size_t>(grid_density);
      flat /= static_cast<std::size_t>(grid_density);
      x[i] = model.X.lower[i] +
             (model.X.upper[i] - model.X.lower[i]) * static_cast<double>(k) /
                 static_cast<double>(grid_density - 1);
    }
    return x;
  };

  std::vector<double> delta_per(total, 0.0);
  std::vector<double> muf_per(total, 0.0);
  std::vector<double> mug_per(total, 0.0);

  parallel_for(total, workers, [&](std::size_t idx) {
    const Vec x = point_at(idx);
    const Mat A = model.analytic_jacobian ? (*model.analytic_jacobian)(x)
                                          : numeric_jacobian(model, x);
    delta_per[idx] = (model.f(x) - A * x).norm();

    // difference quotients against the +1 neighbor along each axis
    std::size_t rem = idx;
    std::vector<int> coord(n);
    for (int i = n - 1; i >= 0; --i) {
      coord[i] = static_cast<int>(rem % static_cast<std::size_t>(grid_density));
      rem /= static_cast<std::size_t>(grid_density);
    }
    const Vec fx = model.f(x);
    const Mat gx = model.g(x);
    double muf = 0.0, mug = 0.0;
    for (int axis = 0; axis < n; ++axis) {
      if (coord[axis] + 1 >= grid_density) continue;
      std::size_t nb = 0;
      for (int i = 0; i < n; ++i) {
        nb = nb * static_cast<std::size_t>(grid_density) +
             static_cast<std::size_t>(coord[i] + (i == axis ? 1 : 0));
      }
      const Vec y = point_at(nb);
      const double dist = (x - y).norm();
      if (dist <= 0) continue;
      muf = std::max(muf, (fx - model.f(y)).norm() / dist);
      const Mat dg = gx - model.g(y);
      mug = std::max(mug, dg.jacobiSvd().singularValues()[0] / dist);
    }
    muf_per[idx] = muf;
    mug_per[idx] = mug;
  });

  ModelConstants c;
  c.grid_density = grid_density;
  for (std::size_t i = 0; i < total; ++i) {
    c.delta = std::max(c.delta, delta_per[i]);
    c.mu_f = std::max(c.mu_f, muf_per[i]);
    c.mu_g = std::max(c.mu_g, mug_per[i]);
  }

  // seeded random pair sample; independent of worker count
  Rng rng = Rng::stream(seed, 0);
  const int random_pairs = 512;
  for (int k = 0; k < random_pairs; ++k) {
    Vec a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.uniform(model.X.lower[i], model.X.upper[i]);
      b[i] = rng.uniform(model.X.lower[i], model.X.upper[i]);
    }
    const double dist = (a - b).norm();
    if (dist < 1e-12) continue;
    c.mu_f = std::max(c.mu_f, (model.f(a) - model.f(b)).norm() / dist);
    const Mat dg = model.g(a) - model.g(b);
    c.mu_g = std::max(c.mu_g, dg.jacobiSvd().singularValues()[0] / dist);
  }
  c.sample_count = static_cast<long>(total) + random_pairs;
  return c;
}

namespace {

SystemModel make_pendulum(const ModelParams& prm, bool linearized) {
  SystemModel mdl;
  mdl.id = linearized ? "pendulum-linearized" : "pendulum";
  mdl.n = 2;
  mdl.p = 1;
  mdl.m = 1;
  const double dt = prm.dt;
  const double gl = prm.gravity / prm.length;        // angular acceleration per sin(angle)
  const double bin = 1.0 / (prm.mass * prm.length * prm.length);  // torque gain
  if (linearized) {
    mdl.f = [dt, gl](const Vec& x) {
      Vec out(2);
      out[0] = x[0] + dt * x[1];
      out[1] = x[1] + dt * gl * x[0];
      return out;
    };
    mdl.analytic_jacobian = [dt, gl](const Vec&) {
      Mat A(2, 2);
      A << 1.0, dt, dt * gl, 1.0;
      return A;
    };
  } else {
    mdl.f = [dt, gl](const Vec& x) {
      Vec out(2);
      out[0] = x[0] + dt * x[1];
      out[1] = x[1] + dt * gl * std::sin(x[0]);
      return out;
    };
    mdl.analytic_jacobian = [dt, gl](const Vec& x) {
      Mat A(2, 2);
      A << 1.0, dt, dt * gl * std::cos(x[0]), 1.0;
      return A;
    };
  }
  mdl.g = [dt, bin](const Vec&) {
    Mat B(2, 1);
    B << 0.0, dt * bin;
    return B;
  };
  mdl.h = [](const Vec& x, const Vec&) {
    Vec y(1);
    y[0] = x[0];
    return y;
  };
  mdl.X.lower = Vec::Constant(2, -5.0);
  mdl.X.upper = Vec::Constant(2, 5.0);
  mdl.R.lower = Vec::Constant(1, -1.0);
  mdl.R.upper = Vec::Constant(1, 1.0);
  const double mgl = prm.mass * prm.gravity * prm.length;
  if (linearized) {
    mdl.steady_state_guess = [mgl](const Vec& r) {
      Vec x(2), u(1);
      x << r[0], 0.0;
      u << -mgl * r[0];
      return std::make_pair(x, u);
    };
  } else {
    mdl.steady_state_guess = [mgl](const Vec& r) {
      Vec x(2), u(1);
      x << r[0], 0.0;
      u << -mgl * std::sin(r[0]);
      return std::make_pair(x, u);
    };
  }
  return mdl;
}

SystemModel make_drone_axis(const std::string& id, double a22c, double b2c, double pos_lo,
                            double pos_hi, double r_lo, double r_hi, const ModelParams& prm) {
  SystemModel mdl;
  mdl.id = id;
  mdl.n = 2;
  mdl.p = 1;
  mdl.m = 1;
  const double dt = prm.dt;
  Mat A(2, 2);
  A << 1.0, dt, 0.0, 1.0 + dt * a22c;  // Euler discretization of the axis dynamics
  Mat B(2, 1);
  B << 0.0, dt * b2c;
  mdl.f = [A](const Vec& x) { return Vec(A * x); };
  mdl.g = [B](const Vec&) { return B; };
  mdl.h = [](const Vec& x, const Vec&) {
    Vec y(1);
    y[0] = x[0];
    return y;
  };
  mdl.analytic_jacobian = [A](const Vec&) { return A; };
  mdl.X.lower = Vec(2);
  mdl.X.upper = Vec(2);
  mdl.X.lower << pos_lo, -1.0;
  mdl.X.upper << pos_hi, 1.0;
  mdl.R.lower = Vec::Constant(1, r_lo);
  mdl.R.upper = Vec::Constant(1, r_hi);
  mdl.steady_state_guess = [](const Vec& r) {
    Vec x(2), u(1);
    x << r[0], 0.0;
    u << 0.0;
    return std::make_pair(x, u);
  };
  return mdl;
}

SystemModel make_scalar() {
  SystemModel mdl;
  mdl.id = "scalar";
  mdl.n = 1;
  mdl.p = 1;
  mdl.m = 1;
  mdl.f = [](const Vec& x) { return x; };
  mdl.g = [](const Vec&) { return Mat::Identity(1, 1); };
  mdl.h = [](const Vec& x, const Vec&) { return x; };
  mdl.analytic_jacobian = [](const Vec&) { return Mat::Identity(1, 1); };
  mdl.X.lower = Vec::Constant(1, -3.0);
  mdl.X.upper = Vec::Constant(1, 3.0);
  mdl.R.lower = Vec::Constant(1, -1.0);
  mdl.R.upper = Vec::Constant(1, 1.0);
  mdl.steady_state_guess = [](const Vec& r) {
    Vec u(1);
    u << 0.0;
    return std::make_pair(r, u);
  };
  return mdl;
}

}  // namespace

SystemModel make_model(const std::string& id, const ModelParams& params) {
  if (id == "pendulum") return make_pendulum(params, false);
  if (id == "pendulum-linearized") return make_pendulum(params, true);
  if (id == "drone-x")
    return make_drone_axis(id, -0.0527, -5.4779, -0.5, 0.5, 0.0, 0.0, params);
  if (id == "drone-y")
    return make_drone_axis(id, -0.0187, -7.0608, -0.5, 0.5, 0.0, 0.0, params);
  if (id == "drone-z")
    return make_drone_axis(id, -1.7873, -1.7382, 1.0, 2.0, 1.5, 1.5, params);
  if (id == "scalar") return make_scalar();
  throw ConfigError("unknown model id '" + id + "'");
}

std::vector<std::string> model_registry_ids() {
  return {"pendulum", "pendulum-linearized", "drone-x", "drone-y", "drone-z", "scalar"};
}

}  // namespace osap
