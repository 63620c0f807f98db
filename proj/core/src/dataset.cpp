#include "osap/dataset.hpp"

#include <Eigen/Eigenvalues>
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "osap/parallel.hpp"
#include "osap/rng.hpp"
#include "osap/sym.hpp"

namespace osap {

namespace {

constexpr char kMagic[8] = {'O', 'S', 'A', 'P', 'D', 'S', 'E', 'T'};
constexpr std::uint32_t kSchemaVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "dataset files are defined little-endian; big-endian hosts are unsupported");

}  // namespace

long GridSpec::axis_count(int axis) const {
  const double span = (upper[axis] - lower[axis]) / step[axis];
  long count;
  if (endpoint == EndpointMode::inclusive) {
    count = static_cast<long>(std::floor(span + 1e-9)) + 1;
  } else {
    count = static_cast<long>(std::ceil(span - 1e-9));
  }
  return std::max<long>(count, 1);
}

long GridSpec::total_count() const {
  long total = 1;
  for (int i = 0; i < dim(); ++i) {
    const long c = axis_count(i);
    if (total > (200000000L / std::max(c, 1L))) return 200000001L;  // saturate past the guard
    total *= c;
  }
  return total;
}

Vec GridSpec::point(long flat_index) const {
  Vec x(dim());
  for (int i = dim() - 1; i >= 0; --i) {
    const long c = axis_count(i);
    x[i] = coordinate(i, flat_index % c);
    flat_index /= c;
  }
  return x;
}

void GridSpec::validate() const {
  if (lower.size() != upper.size() || lower.size() != step.size())
    throw ConfigError("GridSpec: lower/upper/step dimensions disagree");
  for (int i = 0; i < dim(); ++i) {
    if (!(upper[i] >= lower[i])) throw ConfigError("GridSpec: upper must be >= lower");
    if (!(step[i] > 0.0)) throw ConfigError("GridSpec: step must be > 0");
  }
}

bool operator==(const TrainingSample& a, const TrainingSample& b) {
  return a.x == b.x && a.r == b.r && a.u == b.u && a.P_packed == b.P_packed &&
         a.status == b.status && a.cost == b.cost;
}

bool operator==(const TrainingDataset& a, const TrainingDataset& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (!(a.samples[i] == b.samples[i])) return false;
  return a.meta.model_id == b.meta.model_id && a.meta.config_hash == b.meta.config_hash &&
         a.meta.failure_count == b.meta.failure_count;
}

std::vector<std::pair<Vec, Vec>> generate_grid(const GridSpec& xs, const GridSpec& rs) {
  xs.validate();
  rs.validate();
  const long nx = xs.total_count();
  const long nr = rs.total_count();
  if (nx > 100000000L || nr > 100000000L || nx * nr > 100000000L) {
    throw ConfigError("generate_grid: more than 1e8 points requested");
  }
  std::vector<std::pair<Vec, Vec>> points;
  points.reserve(static_cast<std::size_t>(nx * nr));
  for (long i = 0; i < nx; ++i) {
    const Vec x = xs.point(i);
    for (long j = 0; j < nr; ++j) points.emplace_back(x, rs.point(j));
  }
  return points;
}

TrainingDataset build_dataset(const SystemModel& model,
                              const std::vector<std::pair<Vec, Vec>>& points,
                              const SolverConfig& cfg, int workers,
                              double max_failure_fraction) {
  if (points.empty()) throw ConfigError("build_dataset: no points");

  // one steady-state solve per distinct reference
  std::map<std::vector<double>, SteadyStatePair> ss_cache;
  for (const auto& [x, r] : points) {
    std::vector<double> key(r.data(), r.data() + r.size());
    if (!ss_cache.count(key)) ss_cache.emplace(key, steady_state(model, r));
  }

  struct Slot {
    TrainingSample sample;
    bool ok = false;
  };
  std::vector<Slot> slots(points.size());

  parallel_for(points.size(), workers, [&](std::size_t i) {
    const auto& [x, r] = points[i];
    Slot& slot = slots[i];
    try {
      std::vector<double> key(r.data(), r.data() + r.size());
      const ControlSolution sol = solve_at(model, x, ss_cache.at(key), cfg);
      if (sol.status == SolveStatus::infeasible) return;
      slot.sample.x = x;
      slot.sample.r = r;
      slot.sample.u = sol.u_star;
      slot.sample.P_packed = pack_sym(sol.P_star.P());
      slot.sample.status = sol.status;
      slot.sample.cost = sol.cost;
      slot.ok = true;
    } catch (const Error&) {
      // counted as a labeling failure below
    }
  });

  TrainingDataset ds;
  ds.meta.model_id = model.id;
  ds.meta.config_hash = cfg.hash();
  ds.meta.eps_P = cfg.eps_P;
  ds.meta.theta = cfg.theta;
  ds.samples.reserve(points.size());
  for (auto& slot : slots) {
    if (slot.ok) {
      ds.samples.push_back(std::move(slot.sample));
    } else {
      ++ds.meta.failure_count;
    }
  }
  const double frac = static_cast<double>(ds.meta.failure_count) /
                      static_cast<double>(points.size());
  if (frac > max_failure_fraction) {
    throw DatasetDegenerateError(
        "build_dataset: " + std::to_string(ds.meta.failure_count) + " of " +
            std::to_string(points.size()) +
            " points failed to label; check theta/weights",
        ds.meta.failure_count, points.size());
  }
  return ds;
}

namespace {

void write_raw(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  write_raw(out, &v, sizeof(T));
}

void write_string(std::ofstream& out, const std::string& s) {
  const std::uint32_t len = static_cast<std::uint32_t>(s.size());
  write_pod(out, len);
  write_raw(out, s.data(), s.size());
}

void write_vec(std::ofstream& out, const Vec& v) {
  write_raw(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void write_gridspec(std::ofstream& out, const GridSpec& g) {
  const std::int32_t d = g.dim();
  write_pod(out, d);
  write_vec(out, g.lower);
  write_vec(out, g.upper);
  write_vec(out, g.step);
  const std::uint8_t e = static_cast<std::uint8_t>(g.endpoint);
  write_pod(out, e);
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("dataset load: truncated file");
  return v;
}

std::string read_string(std::ifstream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw FormatError("dataset load: truncated string");
  return s;
}

Vec read_vec(std::ifstream& in, int n) {
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
  if (!in) throw FormatError("dataset load: truncated vector");
  return v;
}

GridSpec read_gridspec(std::ifstream& in) {
  GridSpec g;
  const auto d = read_pod<std::int32_t>(in);
  g.lower = read_vec(in, d);
  g.upper = read_vec(in, d);
  g.step = read_vec(in, d);
  g.endpoint = static_cast<EndpointMode>(read_pod<std::uint8_t>(in));
  return g;
}

void verify_labels(const TrainingDataset& ds) {
  if (!(ds.meta.eps_P > 0.0) || ds.samples.empty()) return;
  const int n = ds.n();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Mat P = unpack_sym(ds.samples[i].P_packed, n);
    Eigen::SelfAdjointEigenSolver<Mat> es(P);
    if (es.eigenvalues().minCoeff() < ds.meta.eps_P - 1e-9) {
      throw FormatError("dataset load: sample " + std::to_string(i) +
                        " stores P with lambda_min below the eps floor");
    }
  }
}

TrainingDataset load_binary(std::ifstream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("dataset load: bad magic");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kSchemaVersion) {
    throw FormatError("dataset load: schema version " + std::to_string(version) +
                      " found, expected " + std::to_string(kSchemaVersion));
  }
  TrainingDataset ds;
  ds.meta.model_id = read_string(in);
  const auto n = read_pod<std::int32_t>(in);
  const auto p = read_pod<std::int32_t>(in);
  const auto m = read_pod<std::int32_t>(in);
  ds.meta.xs = read_gridspec(in);
  ds.meta.rs = read_gridspec(in);
  ds.meta.config_hash = read_pod<std::uint64_t>(in);
  ds.meta.eps_P = read_pod<double>(in);
  ds.meta.theta = read_pod<double>(in);
  ds.meta.failure_count = read_pod<std::uint64_t>(in);
  ds.meta.generated_at = read_string(in);
  const auto count = read_pod<std::uint64_t>(in);
  ds.samples.resize(count);
  const int np = sym_packed_size(n);
  for (auto& s : ds.samples) {
    s.x = read_vec(in, n);
    s.r = read_vec(in, m);
    s.u = read_vec(in, p);
    s.P_packed = read_vec(in, np);
    s.cost = read_pod<double>(in);
    s.status = static_cast<SolveStatus>(read_pod<std::uint8_t>(in));
  }
  verify_labels(ds);
  return ds;
}

TrainingDataset load_csv(std::ifstream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("dataset load: empty CSV");
  int n = 0, m = 0, p = 0, np = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind('x', 0) == 0) ++n;
      else if (col.rfind('r', 0) == 0) ++m;
      else if (col.rfind('u', 0) == 0) ++p;
      else if (col.rfind('P', 0) == 0) ++np;
      else throw FormatError("dataset load: unexpected CSV column '" + col + "'");
    }
  }
  if (n == 0 || np != sym_packed_size(n))
    throw FormatError("dataset load: CSV header does not describe a packed dataset");

  TrainingDataset ds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    TrainingSample s;
    s.x = Vec(n);
    s.r = Vec(m);
    s.u = Vec(p);
    s.P_packed = Vec(np);
    auto read_cell = [&](double& target) {
      if (!std::getline(ss, cell, ',')) throw FormatError("dataset load: short CSV row");
      target = std::strtod(cell.c_str(), nullptr);
    };
    for (int i = 0; i < n; ++i) read_cell(s.x[i]);
    for (int i = 0; i < m; ++i) read_cell(s.r[i]);
    for (int i = 0; i < p; ++i) read_cell(s.u[i]);
    for (int i = 0; i < np; ++i) read_cell(s.P_packed[i]);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

void save_binary(const TrainingDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("dataset save: cannot open '" + path + "'");
  out.write(kMagic, 8);
  write_pod(out, kSchemaVersion);
  write_string(out, ds.meta.model_id);
  const std::int32_t n = ds.n(), p = ds.p(), m = ds.m();
  write_pod(out, n);
  write_pod(out, p);
  write_pod(out, m);
  write_gridspec(out, ds.meta.xs);
  write_gridspec(out, ds.meta.rs);
  write_pod(out, ds.meta.config_hash);
  write_pod(out, ds.meta.eps_P);
  write_pod(out, ds.meta.theta);
  write_pod(out, ds.meta.failure_count);
  write_string(out, ds.meta.generated_at);
  const std::uint64_t count = ds.samples.size();
  write_pod(out, count);
  for (const auto& s : ds.samples) {
    write_vec(out, s.x);
    write_vec(out, s.r);
    write_vec(out, s.u);
    write_vec(out, s.P_packed);
    write_pod(out, s.cost);
    const std::uint8_t st = static_cast<std::uint8_t>(s.status);
    write_pod(out, st);
  }
  if (!out) throw FormatError("dataset save: write failed for '" + path + "'");
}

void save_csv(const TrainingDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("dataset save: cannot open '" + path + "'");
  const int n = ds.n(), p = ds.p(), m = ds.m();
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << (i + 1);
  for (int i = 0; i < m; ++i) out << ",r" << (i + 1);
  for (int i = 0; i < p; ++i) out << ",u" << (i + 1);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out << ",P" << (i + 1) << (j + 1);
  out << '\n';
  char buf[32];
  auto put = [&](double v, bool lead_comma) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    if (lead_comma) out << ',';
    out << buf;
  };
  for (const auto& s : ds.samples) {
    for (int i = 0; i < n; ++i) put(s.x[i], i > 0);
    for (int i = 0; i < m; ++i) put(s.r[i], true);
    for (int i = 0; i < p; ++i) put(s.u[i], true);
    for (int i = 0; i < s.P_packed.size(); ++i) put(s.P_packed[i], true);
    out << '\n';
  }
  if (!out) throw FormatError("dataset save: write failed for '" + path + "'");
}

void save(const TrainingDataset& ds, const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    save_csv(ds, path);
  } else {
    save_binary(ds, path);
  }
}

TrainingDataset load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("dataset load: cannot open '" + path + "'");
  char magic[8] = {};
  in.read(magic, 8);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, kMagic, 8) == 0) return load_binary(in);
  return load_csv(in);
}

std::pair<TrainingDataset, TrainingDataset> split(const TrainingDataset& ds, double val_fraction,
                                                  std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("split: val_fraction must lie in (0, 1)");
  const std::size_t total = ds.samples.size();
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(total)));

  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  Rng rng = Rng::stream(seed, 0x5EED);
  for (std::size_t i = total; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<bool> is_val(total, false);
  for (std::size_t i = 0; i < n_val && i < total; ++i) is_val[idx[i]] = true;

  TrainingDataset train, val;
  train.meta = ds.meta;
  val.meta = ds.meta;
  for (std::size_t i = 0; i < total; ++i) {
    (is_val[i] ? val : train).samples.push_back(ds.samples[i]);
  }
  return {train, val};
}

}  // namespace osap
