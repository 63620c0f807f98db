#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "osap/closed_loop.hpp"
#include "osap/dataset.hpp"

namespace osap {

/// Falsification-sampled region of attraction over a state grid.
struct RoaGrid {
  GridSpec region;
  std::vector<std::uint8_t> membership;  // grid order, 1 = inside
  Vec r;
  int horizon = 0;
  double convergence_radius = 0.0;
  std::string controller;

  long inside_count() const;
};

/// Estimated constants of Assumptions 2-3 plus the tracking bounds they
/// imply. All sup/inf quantities are sample-based estimates.
struct BoundReport {
  double delta = 0.0;
  double mu_f = 0.0;
  double mu_g = 0.0;
  double lambda_bar_P = 0.0;       // max eigenvalue seen across P labels
  double lambda_underbar_P = 0.0;  // min eigenvalue seen across P labels
  double du_bar = 0.0;
  double dP_bar = 0.0;
  double theta = 0.0;
  double g_norm_at_xbar = 0.0;
  double sigma = 0.0;
  double theta_min = 0.0;
  double vartheta = 0.0;  // meaningful only when vartheta_defined
  bool vartheta_defined = false;
};

/// sigma = 3 sqrt(lambda_bar_P) delta / theta.
double sigma_bound(double lambda_bar_P, double delta, double theta);

/// Smallest theta for which the NN-in-loop tracking bound exists.
double theta_min_bound(double dP_bar, double lambda_bar_P, double lambda_underbar_P, double mu_g,
                       double du_bar);

/// The NN-in-loop tracking radius; throws BoundUndefinedError when
/// theta <= theta_min.
double vartheta_bound(double delta, double lambda_bar_P, double lambda_underbar_P, double dP_bar,
                      double du_bar, double mu_g, double g_norm_at_xbar, double theta);

/// (lambda_underbar, lambda_bar) over the eigenvalues of every stored P.
std::pair<double, double> dataset_p_extrema(const TrainingDataset& ds);

BoundReport make_bound_report(const ModelConstants& constants, double lambda_underbar_P,
                              double lambda_bar_P, const ImitationGap& gap, double theta,
                              double g_norm_at_xbar);

std::string bound_report_json(const BoundReport& rep);

/// Marks each grid point by simulating up to `horizon` steps: inside iff the
/// trajectory never leaves X and reaches ||x - x_bar|| <= radius.
RoaGrid estimate_roa(const SystemModel& model, const Controller& controller, const Vec& r,
                     const GridSpec& grid, int horizon, double convergence_radius,
                     int workers = 1);

/// Uniform 1-D partition of [lo, hi] into `count` sub-intervals.
std::vector<std::pair<double, double>> roa_reference_partition(double lo, double hi, int count);

void write_roa_csv(const RoaGrid& roa, const std::string& path);
void save_roa_bitmap(const RoaGrid& roa, const std::string& path);
RoaGrid load_roa_bitmap(const std::string& path);

}  // namespace osap
