#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "osap/roa.hpp"
#include "osap/sym.hpp"

using namespace osap;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

GridSpec scalar_grid(double lo, double hi, double step) {
  GridSpec g;
  g.lower = Vec::Constant(1, lo);
  g.upper = Vec::Constant(1, hi);
  g.step = Vec::Constant(1, step);
  return g;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE_BEGIN("roa");

TEST_CASE("sigma bound formula") {
  CHECK(sigma_bound(1.0, 0.0, 0.01) == 0.0);
  CHECK(sigma_bound(1.0, 0.1, 0.01) == doctest::Approx(30.0).epsilon(1e-14));
  // homogeneity: doubling theta halves sigma, scaling delta scales sigma
  CHECK(sigma_bound(1.0, 0.1, 0.02) == doctest::Approx(15.0).epsilon(1e-14));
  CHECK(sigma_bound(1.0, 0.2, 0.01) == doctest::Approx(60.0).epsilon(1e-14));
  CHECK_THROWS_AS(sigma_bound(1.0, 0.1, 0.0), ConfigError);
}

TEST_CASE("theta_min bound formula") {
  CHECK(theta_min_bound(0.0, 1.0, 1.0, 0.0, 0.0) == 0.0);
  CHECK(theta_min_bound(0.0, 1.0, 1.0, 0.0, 0.7) == 0.0);  // constant g kills the coupling
  CHECK(theta_min_bound(0.01, 1.0, 1.0, 1.0, 0.1) == doctest::Approx(0.31).epsilon(1e-12));
  CHECK_THROWS_AS(theta_min_bound(0.01, 1.0, 0.0, 0.0, 0.0), ConfigError);
}

TEST_CASE("vartheta bound formula") {
  // ideal network: vartheta collapses to sigma
  const double sigma = sigma_bound(2.0, 0.3, 0.01);
  CHECK(vartheta_bound(0.3, 2.0, 0.5, 0.0, 0.0, 0.7, 1.3, 0.01) ==
        doctest::Approx(sigma).epsilon(1e-12));
  // exact linear plant and exact network: zero radius
  CHECK(vartheta_bound(0.0, 2.0, 0.5, 0.0, 0.0, 0.0, 1.3, 0.01) == 0.0);
  // undefined below theta_min
  CHECK_THROWS_AS(vartheta_bound(0.3, 2.0, 0.5, 0.09, 0.0, 0.0, 1.3, 0.01),
                  BoundUndefinedError);
}

TEST_CASE("vartheta approaches sigma as the gaps vanish") {
  const double sigma = sigma_bound(2.0, 0.3, 0.01);
  double prev_err = std::numeric_limits<double>::infinity();
  for (double gap : {1e-8, 1e-10, 1e-13, 1e-16}) {
    const double vt = vartheta_bound(0.3, 2.0, 0.5, gap, gap, 0.7, 1.3, 0.01);
    const double err = std::abs(vt - sigma);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err <= 1e-5 * sigma);
}

TEST_CASE("bound report composes the formulas and brackets the labels") {
  TrainingDataset ds;
  ds.meta.eps_P = 0.1;
  for (double d : {0.3, 0.5, 0.9}) {
    TrainingSample s;
    s.x = Vec::Zero(2);
    s.r = Vec::Zero(1);
    s.u = Vec::Zero(1);
    Mat P(2, 2);
    P << d, 0.1, 0.1, 2.0 * d;
    s.P_packed = pack_sym(P);
    ds.samples.push_back(std::move(s));
  }
  const auto [lo, hi] = dataset_p_extrema(ds);
  // definitional re-check: every eigenvalue of every stored P is bracketed
  for (const auto& s : ds.samples) {
    Eigen::SelfAdjointEigenSolver<Mat> es(unpack_sym(s.P_packed, 2));
    CHECK(es.eigenvalues().minCoeff() >= lo - 1e-15);
    CHECK(es.eigenvalues().maxCoeff() <= hi + 1e-15);
  }

  ModelConstants constants;
  constants.delta = 0.2;
  constants.mu_f = 1.5;
  constants.mu_g = 0.0;
  ImitationGap gap;
  gap.du_bar = 0.05;
  gap.dP_bar = 1e-6;
  const BoundReport rep = make_bound_report(constants, lo, hi, gap, 0.01, 0.1);
  CHECK(rep.sigma == doctest::Approx(sigma_bound(hi, 0.2, 0.01)));
  CHECK(rep.theta_min ==
        doctest::Approx(theta_min_bound(1e-6, hi, lo, 0.0, 0.05)).epsilon(1e-12));
  CHECK(rep.vartheta_defined);
  CHECK(rep.vartheta >= rep.sigma);

  const std::string json = bound_report_json(rep);
  CHECK(json.find("\"lambda_bar_P\"") != std::string::npos);
  CHECK(json.find("\"vartheta\"") != std::string::npos);
  CHECK(json.find("\"theta_min\"") != std::string::npos);
}

TEST_CASE("roa estimation on the scalar benchmark") {
  const SystemModel mdl = make_model("scalar");
  const SolverConfig cfg = default_solver_config(mdl);
  const Controller ctrl = make_osap_controller(mdl, cfg, vec1(0));
  const GridSpec grid = scalar_grid(-1.0, 1.0, 0.25);

  const RoaGrid roa = estimate_roa(mdl, ctrl, vec1(0), grid, 60, 0.05);
  CHECK(roa.membership.size() == 9);
  // the steady-state cell converged and is marked inside
  CHECK(roa.membership[4] == 1);  // grid point 0.0
  CHECK(roa.inside_count() == 9);  // the contracting scalar loop keeps all cells

  SUBCASE("worker-count independence") {
    const RoaGrid roa3 = estimate_roa(mdl, ctrl, vec1(0), grid, 60, 0.05, 3);
    CHECK(roa3.membership == roa.membership);
  }
}

TEST_CASE("a cell that leaves X stays outside for any longer horizon") {
  const SystemModel mdl = make_model("scalar");
  Controller push;
  push.name = "push-out";
  push.act = [](const Vec&, int) {
    ControllerOutput out;
    out.u = Vec::Constant(1, 0.5);
    return out;
  };
  const GridSpec grid = scalar_grid(2.0, 2.9, 0.45);
  const RoaGrid h1 = estimate_roa(mdl, push, vec1(0), grid, 1, 1e9);
  const RoaGrid h2 = estimate_roa(mdl, push, vec1(0), grid, 25, 1e9);
  for (std::size_t i = 0; i < h1.membership.size(); ++i) {
    if (h1.membership[i] == 0) CHECK(h2.membership[i] == 0);
  }
  // with u = +0.5 every cell eventually leaves [-3, 3]
  CHECK(h2.inside_count() == 0);
}

TEST_CASE("reference partition") {
  const auto two = roa_reference_partition(-1.0, 1.0, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].first == -1.0);
  CHECK(two[0].second == 0.0);
  CHECK(two[1].first == 0.0);
  CHECK(two[1].second == 1.0);

  const auto one = roa_reference_partition(-1.0, 1.0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].first == -1.0);
  CHECK(one[0].second == 1.0);

  // the sampled reference of each region has its steady state at (r, 0)
  const SystemModel mdl = make_model("pendulum");
  for (const auto& [lo, hi] : roa_reference_partition(-1.0, 1.0, 4)) {
    const double mid = 0.5 * (lo + hi);
    const SteadyStatePair ss = steady_state(mdl, vec1(mid));
    CHECK(ss.x_bar[0] == doctest::Approx(mid).epsilon(1e-10));
    CHECK(std::abs(ss.x_bar[1]) <= 1e-10);
  }

  CHECK_THROWS_AS(roa_reference_partition(0.0, 1.0, 0), ConfigError);
}

TEST_CASE("roa exports round trip") {
  RoaGrid roa;
  roa.region = scalar_grid(-1.0, 1.0, 0.5);
  roa.membership = {1, 1, 0, 1, 0};
  roa.r = vec1(0.25);
  roa.horizon = 77;
  roa.convergence_radius = 0.125;
  roa.controller = "nn";

  save_roa_bitmap(roa, "roa.bin");
  const RoaGrid back = load_roa_bitmap("roa.bin");
  CHECK(back.membership == roa.membership);
  CHECK(back.horizon == 77);
  CHECK(back.convergence_radius == 0.125);
  CHECK(back.controller == "nn");
  CHECK(back.r[0] == 0.25);
  CHECK(back.region.step[0] == 0.5);

  write_roa_csv(roa, "roa.csv");
  std::ifstream in("roa.csv");
  std::string header, row0;
  std::getline(in, header);
  std::getline(in, row0);
  CHECK(header == "x1,inside");
  CHECK(row0 == "-1,1");

  save_roa_bitmap(roa, "roa2.bin");
  CHECK(read_file("roa.bin") == read_file("roa2.bin"));
  for (const char* f : {"roa.bin", "roa2.bin", "roa.csv"}) std::remove(f);
}

TEST_SUITE_END();
