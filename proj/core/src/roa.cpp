#include "osap/roa.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "osap/parallel.hpp"
#include "osap/sym.hpp"

#include <json.hpp>

namespace osap {

long RoaGrid::inside_count() const {
  long c = 0;
  for (auto b : membership) c += b;
  return c;
}

double sigma_bound(double lambda_bar_P, double delta, double theta) {
  if (!(theta > 0.0)) throw ConfigError("sigma_bound: theta must be > 0");
  return 3.0 * std::sqrt(lambda_bar_P) * delta / theta;
}

double theta_min_bound(double dP_bar, double lambda_bar_P, double lambda_underbar_P, double mu_g,
                       double du_bar) {
  if (!(lambda_underbar_P > 0.0))
    throw ConfigError("theta_min_bound: lambda_underbar_P must be > 0");
  const double sp = std::sqrt(dP_bar);
  const double sl = std::sqrt(lambda_bar_P);
  return sp + sp * sl / std::sqrt(lambda_underbar_P) + (sl + sp) * mu_g * du_bar;
}

double vartheta_bound(double delta, double lambda_bar_P, double lambda_underbar_P, double dP_bar,
                      double du_bar, double mu_g, double g_norm_at_xbar, double theta) {
  const double sp = std::sqrt(dP_bar);
  const double sl = std::sqrt(lambda_bar_P);
  const double numerator = 3.0 * sl * delta + sp * delta + (sl + sp) * g_norm_at_xbar * du_bar;
  const double denominator =
      theta - theta_min_bound(dP_bar, lambda_bar_P, lambda_underbar_P, mu_g, du_bar);
  if (!(denominator > 0.0)) {
    throw BoundUndefinedError("vartheta_bound: theta <= theta_min, bound undefined");
  }
  return numerator / denominator;
}

std::pair<double, double> dataset_p_extrema(const TrainingDataset& ds) {
  if (ds.samples.empty()) throw ConfigError("dataset_p_extrema: empty dataset");
  const int n = ds.n();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : ds.samples) {
    Eigen::SelfAdjointEigenSolver<Mat> es(unpack_sym(s.P_packed, n));
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  return {lo, hi};
}

BoundReport make_bound_report(const ModelConstants& constants, double lambda_underbar_P,
                              double lambda_bar_P, const ImitationGap& gap, double theta,
                              double g_norm_at_xbar) {
  BoundReport rep;
  rep.delta = constants.delta;
  rep.mu_f = constants.mu_f;
  rep.mu_g = constants.mu_g;
  rep.lambda_bar_P = lambda_bar_P;
  rep.lambda_underbar_P = lambda_underbar_P;
  rep.du_bar = gap.du_bar;
  rep.dP_bar = gap.dP_bar;
  rep.theta = theta;
  rep.g_norm_at_xbar = g_norm_at_xbar;
  rep.sigma = sigma_bound(lambda_bar_P, constants.delta, theta);
  rep.theta_min =
      theta_min_bound(gap.dP_bar, lambda_bar_P, lambda_underbar_P, constants.mu_g, gap.du_bar);
  if (theta > rep.theta_min) {
    rep.vartheta = vartheta_bound(constants.delta, lambda_bar_P, lambda_underbar_P, gap.dP_bar,
                                  gap.du_bar, constants.mu_g, g_norm_at_xbar, theta);
    rep.vartheta_defined = true;
  }
  return rep;
}

std::string bound_report_json(const BoundReport& rep) {
  nlohmann::ordered_json j;
  j["delta"] = rep.delta;
  j["mu_f"] = rep.mu_f;
  j["mu_g"] = rep.mu_g;
  j["lambda_bar_P"] = rep.lambda_bar_P;
  j["lambda_underbar_P"] = rep.lambda_underbar_P;
  j["du_bar"] = rep.du_bar;
  j["dP_bar"] = rep.dP_bar;
  j["theta"] = rep.theta;
  j["g_norm_at_xbar"] = rep.g_norm_at_xbar;
  j["sigma"] = rep.sigma;
  j["theta_min"] = rep.theta_min;
  j["vartheta_defined"] = rep.vartheta_defined;
  if (rep.vartheta_defined) j["vartheta"] = rep.vartheta;
  j["note"] = "constants are sample-based estimates of the underlying suprema/infima";
  return j.dump(2);
}

RoaGrid estimate_roa(const SystemModel& model, const Controller& controller, const Vec& r,
                     const GridSpec& grid, int horizon, double convergence_radius, int workers) {
  grid.validate();
  if (horizon < 1) throw ConfigError("estimate_roa: horizon must be >= 1");
  const SteadyStatePair ss = steady_state(model, r);
  const long total = grid.total_count();

  RoaGrid roa;
  roa.region = grid;
  roa.r = r;
  roa.horizon = horizon;
  roa.convergence_radius = convergence_radius;
  roa.controller = controller.name;
  roa.membership.assign(static_cast<std::size_t>(total), 0);

  parallel_for(static_cast<std::size_t>(total), workers, [&](std::size_t idx) {
    Vec x = grid.point(static_cast<long>(idx));
    if (!model.X.contains(x, 1e-12)) return;  // outside by definition
    bool reached = (x - ss.x_bar).norm() <= convergence_radius;
    bool contained = true;
    try {
      for (int k = 0; k < horizon; ++k) {
        const ControllerOutput out = controller.act(x, k);
        x = step(model, x, out.u);
        if (!model.X.contains(x, 1e-12)) {
          contained = false;
          break;
        }
        if (!reached && (x - ss.x_bar).norm() <= convergence_radius) reached = true;
      }
    } catch (const Error&) {
      contained = false;  // numeric blow-up marks the cell outside
    }
    roa.membership[idx] = (contained && reached) ? 1 : 0;
  });
  return roa;
}

std::vector<std::pair<double, double>> roa_reference_partition(double lo, double hi, int count) {
  if (count < 1) throw ConfigError("roa_reference_partition: count must be >= 1");
  std::vector<std::pair<double, double>> parts;
  const double width = (hi - lo) / count;
  for (int i = 0; i < count; ++i) {
    parts.emplace_back(lo + i * width, i + 1 == count ? hi : lo + (i + 1) * width);
  }
  return parts;
}

void write_roa_csv(const RoaGrid& roa, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("roa csv: cannot open '" + path + "'");
  const int d = roa.region.dim();
  for (int i = 0; i < d; ++i) out << (i ? "," : "") << 'x' << (i + 1);
  out << ",inside\n";
  char buf[32];
  for (long idx = 0; idx < static_cast<long>(roa.membership.size()); ++idx) {
    const Vec x = roa.region.point(idx);
    for (int i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", x[i]);
      out << (i ? "," : "") << buf;
    }
    out << ',' << int(roa.membership[static_cast<std::size_t>(idx)]) << '\n';
  }
}

namespace {
constexpr char kRoaMagic[8] = {'O', 'S', 'A', 'P', 'R', 'O', 'A', '1'};
}

void save_roa_bitmap(const RoaGrid& roa, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("roa bitmap: cannot open '" + path + "'");
  out.write(kRoaMagic, 8);
  auto write_pod = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  const std::int32_t d = roa.region.dim();
  write_pod(d);
  auto write_vec = [&](const Vec& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * v.size()));
  };
  write_vec(roa.region.lower);
  write_vec(roa.region.upper);
  write_vec(roa.region.step);
  const std::uint8_t e = static_cast<std::uint8_t>(roa.region.endpoint);
  write_pod(e);
  const std::int32_t rdim = static_cast<std::int32_t>(roa.r.size());
  write_pod(rdim);
  write_vec(roa.r);
  const std::int32_t horizon = roa.horizon;
  write_pod(horizon);
  write_pod(roa.convergence_radius);
  const std::uint32_t name_len = static_cast<std::uint32_t>(roa.controller.size());
  write_pod(name_len);
  out.write(roa.controller.data(), name_len);
  const std::uint64_t count = roa.membership.size();
  write_pod(count);
  // packed bits, grid order, LSB first
  std::uint8_t byte = 0;
  int fill = 0;
  for (std::size_t i = 0; i < roa.membership.size(); ++i) {
    byte |= static_cast<std::uint8_t>((roa.membership[i] & 1) << fill);
    if (++fill == 8) {
      write_pod(byte);
      byte = 0;
      fill = 0;
    }
  }
  if (fill > 0) write_pod(byte);
  if (!out) throw FormatError("roa bitmap: write failed for '" + path + "'");
}

RoaGrid load_roa_bitmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("roa bitmap: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kRoaMagic, 8) != 0)
    throw FormatError("roa bitmap: bad magic");
  auto read_pod = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw FormatError("roa bitmap: truncated file");
  };
  RoaGrid roa;
  std::int32_t d;
  read_pod(d);
  auto read_vec = [&](Vec& v, int size) {
    v.resize(size);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * size));
    if (!in) throw FormatError("roa bitmap: truncated vector");
  };
  read_vec(roa.region.lower, d);
  read_vec(roa.region.upper, d);
  read_vec(roa.region.step, d);
  std::uint8_t e;
  read_pod(e);
  roa.region.endpoint = static_cast<EndpointMode>(e);
  std::int32_t rdim;
  read_pod(rdim);
  read_vec(roa.r, rdim);
  std::int32_t horizon;
  read_pod(horizon);
  roa.horizon = horizon;
  read_pod(roa.convergence_radius);
  std::uint32_t name_len;
  read_pod(name_len);
  roa.controller.resize(name_len);
  in.read(roa.controller.data(), name_len);
  std::uint64_t count;
  read_pod(count);
  roa.membership.assign(count, 0);
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 8 == 0) read_pod(byte);
    roa.membership[i] = (byte >> (i % 8)) & 1;
  }
  return roa;
}

}  // namespace osap
