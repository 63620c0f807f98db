#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "osap/dynamics.hpp"
#include "osap/solver.hpp"

namespace osap {

enum class EndpointMode : std::uint8_t { inclusive = 0, exclusive_upper = 1 };

/// Uniform lattice over an axis-aligned box, one step per axis.
struct GridSpec {
  Vec lower;
  Vec upper;
  Vec step;
  EndpointMode endpoint = EndpointMode::inclusive;

  int dim() const { return static_cast<int>(lower.size()); }
  /// Points along one axis: floor((upper-lower)/step)+1 when inclusive.
  long axis_count(int axis) const;
  long total_count() const;
  double coordinate(int axis, long index) const { return lower[axis] + step[axis] * index; }
  Vec point(long flat_index) const;  // row-major, last axis fastest

  void validate() const;
};

struct TrainingSample {
  Vec x;
  Vec r;
  Vec u;
  Vec P_packed;  // upper triangle, row-major
  SolveStatus status = SolveStatus::optimal;
  double cost = 0.0;
};

struct DatasetMeta {
  std::string model_id;
  GridSpec xs;
  GridSpec rs;
  std::uint64_t config_hash = 0;
  double eps_P = 0.0;
  double theta = 0.0;
  std::uint64_t failure_count = 0;
  /// Left empty by generation so that identical runs write identical bytes;
  /// wall-clock info belongs in the run report, not the artifact.
  std::string generated_at;
};

struct TrainingDataset {
  std::vector<TrainingSample> samples;
  DatasetMeta meta;

  int n() const { return samples.empty() ? meta.xs.dim() : static_cast<int>(samples[0].x.size()); }
  int m() const { return samples.empty() ? meta.rs.dim() : static_cast<int>(samples[0].r.size()); }
  int p() const { return samples.empty() ? 0 : static_cast<int>(samples[0].u.size()); }
};

bool operator==(const TrainingSample& a, const TrainingSample& b);
bool operator==(const TrainingDataset& a, const TrainingDataset& b);

/// Cartesian product of the two lattices in row-major order (x outer, r
/// inner). Rejects more than 1e8 points.
std::vector<std::pair<Vec, Vec>> generate_grid(const GridSpec& xs, const GridSpec& rs);

/// Labels every point by solving problem (4); infeasible or failed points are
/// dropped and counted. Order is grid order for any worker count.
TrainingDataset build_dataset(const SystemModel& model,
                              const std::vector<std::pair<Vec, Vec>>& points,
                              const SolverConfig& cfg, int workers = 1,
                              double max_failure_fraction = 0.05);

void save(const TrainingDataset& ds, const std::string& path);        // by extension
void save_binary(const TrainingDataset& ds, const std::string& path);
void save_csv(const TrainingDataset& ds, const std::string& path);
TrainingDataset load(const std::string& path);  // binary or CSV, sniffed

/// Seeded uniform split without replacement; both halves keep dataset order.
std::pair<TrainingDataset, TrainingDataset> split(const TrainingDataset& ds, double val_fraction,
                                                  std::uint64_t seed);

}  // namespace osap
