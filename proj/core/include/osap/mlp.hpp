#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osap/dataset.hpp"

namespace osap {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct MlpArchitecture {
  int input_dim = 0;               // n + m
  std::vector<int> hidden;         // widths of the hidden layers
  int output_dim = 0;              // p + n(n+1)/2
  Activation activation = Activation::relu;
  double dropout_rate = 0.02;

  void validate() const;
};

/// Weights plus the input/output normalization fitted on the training set.
/// A stored std of zero marks a constant feature: the network then emits the
/// training mean for it exactly.
struct MlpParameters {
  MlpArchitecture arch;
  int n = 0;  // state dimension of the labels (for unpacking P)
  int p = 0;  // input dimension of the labels
  std::vector<Mat> W;
  std::vector<Vec> b;
  Vec in_mean, in_std, out_mean, out_std;
};

struct TrainConfig {
  double lr0 = 1e-3;
  int epochs = 2000;
  int batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int t_max = -1;       // cosine period; -1 means `epochs`
  double lr_min = 1e-6;
  // light regularization; heavier dropout slows convergence markedly on the
  // smooth low-dimensional targets this pipeline produces
  double dropout_rate = 0.02;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct ImitationGap {
  double du_bar = 0.0;   // max ||u_hat - u||_2 over the validation set
  double dP_bar = 0.0;   // max spectral norm of P_hat - P
  double val_mse = 0.0;  // on normalized targets
};

struct LossRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  MlpParameters params;
  std::vector<LossRecord> curve;
};

struct NnOutput {
  Vec u_hat;
  Mat P_hat;  // symmetric by construction, not necessarily PD
};

double cosine_lr(int epoch, double lr0, double lr_min, int t_max);

MlpParameters mlp_init(const MlpArchitecture& arch, std::uint64_t seed);

/// Raw normalized-space map; used by training internals and the grad check.
Vec mlp_forward_raw(const MlpParameters& params, const Vec& input, bool train_mode = false,
                    std::uint64_t dropout_seed = 0);

/// Full policy evaluation: normalize, propagate, denormalize, unpack P.
NnOutput mlp_forward(const MlpParameters& params, const Vec& x, const Vec& r,
                     bool train_mode = false, std::uint64_t dropout_seed = 0);

TrainResult mlp_train(const TrainingDataset& train_set, const TrainingDataset& val_set,
                      MlpArchitecture arch, const TrainConfig& cfg);

ImitationGap measure_gap(const MlpParameters& params, const TrainingDataset& val_set);

/// Backprop-vs-central-difference gate; returns the max relative error over
/// `probe_count` seeded parameter coordinates (dropout disabled).
double grad_check(const MlpArchitecture& arch, std::uint64_t seed, int probe_count);

void save_checkpoint(const MlpParameters& params, const std::string& path);
MlpParameters load_checkpoint(const std::string& path);

void save_loss_csv(const std::vector<LossRecord>& curve, const std::string& path);

}  // namespace osap
