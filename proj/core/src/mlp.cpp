#include "osap/mlp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "osap/rng.hpp"
#include "osap/sym.hpp"

namespace osap {

namespace {

constexpr char kMagic[8] = {'O', 'S', 'A', 'P', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kStdFloor = 1e-12;  // below this a feature counts as constant

inline double act_value(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double act_deriv(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

std::vector<int> layer_dims(const MlpArchitecture& arch) {
  std::vector<int> dims;
  dims.push_back(arch.input_dim);
  for (int h : arch.hidden) dims.push_back(h);
  dims.push_back(arch.output_dim);
  return dims;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (use relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void MlpArchitecture::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("MlpArchitecture: dims must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("MlpArchitecture: hidden widths must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("MlpArchitecture: dropout_rate must lie in [0, 1)");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("TrainConfig: lr0 must be > 0");
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("TrainConfig: dropout_rate must lie in [0, 1)");
}

double cosine_lr(int epoch, double lr0, double lr_min, int t_max) {
  if (t_max < 1) return lr0;
  const double e = static_cast<double>(std::min(epoch, t_max));
  return lr_min + 0.5 * (lr0 - lr_min) *
                      (1.0 + std::cos(3.14159265358979323846 * e / static_cast<double>(t_max)));
}

MlpParameters mlp_init(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  MlpParameters params;
  params.arch = arch;
  const auto dims = layer_dims(arch);
  Rng rng = Rng::stream(seed, 0x1217);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat W(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) W(i, j) = rng.uniform(-scale, scale);
    params.W.push_back(std::move(W));
    params.b.push_back(Vec::Zero(fan_out));
  }
  params.in_mean = Vec::Zero(arch.input_dim);
  params.in_std = Vec::Ones(arch.input_dim);
  params.out_mean = Vec::Zero(arch.output_dim);
  params.out_std = Vec::Ones(arch.output_dim);
  return params;
}

Vec mlp_forward_raw(const MlpParameters& params, const Vec& input, bool train_mode,
                    std::uint64_t dropout_seed) {
  const auto& arch = params.arch;
  const double q = arch.dropout_rate;
  Vec a = input;
  Rng rng = Rng::stream(dropout_seed, 0xD20);
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    Vec z = params.W[l] * a + params.b[l];
    if (!z.allFinite()) {
      throw NumericOverflowError("mlp_forward: non-finite activation at layer " +
                                 std::to_string(l));
    }
    if (l + 1 == params.W.size()) return z;  // affine output layer
    for (int i = 0; i < z.size(); ++i) z[i] = act_value(arch.activation, z[i]);
    if (train_mode && q > 0.0) {
      const double keep = 1.0 - q;
      for (int i = 0; i < z.size(); ++i) {
        z[i] = rng.uniform01() < keep ? z[i] / keep : 0.0;  // inverted dropout
      }
    }
    a = std::move(z);
  }
  return a;  // zero-layer degenerate case never reaches here
}

NnOutput mlp_forward(const MlpParameters& params, const Vec& x, const Vec& r, bool train_mode,
                     std::uint64_t dropout_seed) {
  if (params.n <= 0 || params.p <= 0)
    throw ConfigError("mlp_forward: parameters carry no label dimensions; train or load first");
  Vec input(x.size() + r.size());
  input << x, r;
  if (input.size() != params.arch.input_dim)
    throw ConfigError("mlp_forward: input dimension mismatch");

  Vec z(input.size());
  for (int i = 0; i < input.size(); ++i) {
    const double s = params.in_std[i];
    z[i] = s > kStdFloor ? (input[i] - params.in_mean[i]) / s : 0.0;
  }
  Vec y = mlp_forward_raw(params, z, train_mode, dropout_seed);
  for (int i = 0; i < y.size(); ++i) y[i] = y[i] * params.out_std[i] + params.out_mean[i];

  NnOutput out;
  out.u_hat = y.head(params.p);
  out.P_hat = unpack_sym(y.tail(sym_packed_size(params.n)), params.n);
  return out;
}

namespace {

struct BatchCache {
  std::vector<Mat> z;      // pre-activations per layer
  std::vector<Mat> a;      // post-activation (and post-dropout) per layer; a[0] = input
  std::vector<Mat> mask;   // dropout keep-scales, empty when unused
};

// Forward over a (features x batch) block; records what backward needs.
Mat batch_forward(const MlpParameters& params, const Mat& input, bool train_mode, double q,
                  Rng* dropout_rng, BatchCache* cache) {
  const auto& arch = params.arch;
  Mat a = input;
  if (cache) {
    cache->z.clear();
    cache->a.clear();
    cache->mask.clear();
    cache->a.push_back(a);
  }
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    Mat z = (params.W[l] * a).colwise() + params.b[l];
    if (cache) cache->z.push_back(z);
    if (l + 1 == params.W.size()) return z;
    for (int c = 0; c < z.cols(); ++c)
      for (int rr = 0; rr < z.rows(); ++rr) z(rr, c) = act_value(arch.activation, z(rr, c));
    if (train_mode && q > 0.0 && dropout_rng) {
      const double keep = 1.0 - q;
      Mat mask(z.rows(), z.cols());
      for (int c = 0; c < z.cols(); ++c)
        for (int rr = 0; rr < z.rows(); ++rr)
          mask(rr, c) = dropout_rng->uniform01() < keep ? 1.0 / keep : 0.0;
      z.array() *= mask.array();
      if (cache) cache->mask.push_back(std::move(mask));
    } else if (cache) {
      cache->mask.emplace_back();
    }
    a = std::move(z);
    if (cache) cache->a.push_back(a);
  }
  return a;
}

struct Gradients {
  std::vector<Mat> dW;
  std::vector<Vec> db;
};

// MSE over all elements of the block: L = ||Y_hat - Y||^2 / (rows*cols).
double batch_backward(const MlpParameters& params, const Mat& input, const Mat& target,
                      bool train_mode, double q, Rng* dropout_rng, Gradients* grads) {
  BatchCache cache;
  const Mat y_hat = batch_forward(params, input, train_mode, q, dropout_rng, &cache);
  const double denom = static_cast<double>(target.rows() * target.cols());
  Mat delta = (y_hat - target) * (2.0 / denom);
  const double loss = (y_hat - target).squaredNorm() / denom;
  if (!grads) return loss;

  const auto& arch = params.arch;
  grads->dW.assign(params.W.size(), Mat());
  grads->db.assign(params.W.size(), Vec());
  for (int l = static_cast<int>(params.W.size()) - 1; l >= 0; --l) {
    grads->dW[l].noalias() = delta * cache.a[l].transpose();
    grads->db[l] = delta.rowwise().sum();
    if (l == 0) break;
    Mat back = params.W[l].transpose() * delta;
    // through dropout, then through the activation of layer l-1
    if (cache.mask[l - 1].size() > 0) back.array() *= cache.mask[l - 1].array();
    const Mat& z_prev = cache.z[l - 1];
    for (int c = 0; c < back.cols(); ++c)
      for (int rr = 0; rr < back.rows(); ++rr)
        back(rr, c) *= act_deriv(arch.activation, z_prev(rr, c));
    delta = std::move(back);
  }
  return loss;
}

void fit_normalization(const Mat& data, Vec& mean, Vec& std_out) {
  const int dim = static_cast<int>(data.rows());
  const double count = static_cast<double>(data.cols());
  mean = data.rowwise().mean();
  std_out = Vec(dim);
  for (int i = 0; i < dim; ++i) {
    const double var = (data.row(i).array() - mean[i]).square().sum() / count;
    const double sd = std::sqrt(var);
    std_out[i] = sd > kStdFloor ? sd : 0.0;
  }
}

Mat normalize_block(const Mat& data, const Vec& mean, const Vec& std_in) {
  Mat out(data.rows(), data.cols());
  for (int i = 0; i < data.rows(); ++i) {
    const double s = std_in[i];
    if (s > kStdFloor) {
      out.row(i) = (data.row(i).array() - mean[i]) / s;
    } else {
      out.row(i).setZero();
    }
  }
  return out;
}

void dataset_blocks(const TrainingDataset& ds, Mat& inputs, Mat& targets) {
  const int n = ds.n(), m = ds.m(), p = ds.p();
  const int in_dim = n + m;
  const int out_dim = p + sym_packed_size(n);
  inputs.resize(in_dim, static_cast<Eigen::Index>(ds.samples.size()));
  targets.resize(out_dim, static_cast<Eigen::Index>(ds.samples.size()));
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    inputs.col(static_cast<Eigen::Index>(i)) << s.x, s.r;
    targets.col(static_cast<Eigen::Index>(i)) << s.u, s.P_packed;
  }
}

}  // namespace

TrainResult mlp_train(const TrainingDataset& train_set, const TrainingDataset& val_set,
                      MlpArchitecture arch, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.samples.empty()) throw ConfigError("mlp_train: empty training set");
  const int n = train_set.n(), m = train_set.m(), p = train_set.p();
  arch.input_dim = n + m;
  arch.output_dim = p + sym_packed_size(n);
  arch.dropout_rate = cfg.dropout_rate;
  arch.validate();

  Mat train_in, train_tgt, val_in, val_tgt;
  dataset_blocks(train_set, train_in, train_tgt);
  if (!val_set.samples.empty()) dataset_blocks(val_set, val_in, val_tgt);

  MlpParameters params = mlp_init(arch, cfg.seed);
  params.n = n;
  params.p = p;
  fit_normalization(train_in, params.in_mean, params.in_std);
  fit_normalization(train_tgt, params.out_mean, params.out_std);

  const Mat X = normalize_block(train_in, params.in_mean, params.in_std);
  const Mat Y = normalize_block(train_tgt, params.out_mean, params.out_std);
  const Mat Xv = val_set.samples.empty() ? Mat() : normalize_block(val_in, params.in_mean, params.in_std);
  const Mat Yv = val_set.samples.empty() ? Mat() : normalize_block(val_tgt, params.out_mean, params.out_std);

  // Adam state
  std::vector<Mat> mW(params.W.size()), vW(params.W.size());
  std::vector<Vec> mb(params.b.size()), vb(params.b.size());
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    mW[l] = Mat::Zero(params.W[l].rows(), params.W[l].cols());
    vW[l] = mW[l];
    mb[l] = Vec::Zero(params.b[l].size());
    vb[l] = mb[l];
  }

  const int t_max = cfg.t_max < 1 ? cfg.epochs : cfg.t_max;
  const std::size_t count = train_set.samples.size();
  std::vector<Eigen::Index> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = static_cast<Eigen::Index>(i);

  TrainResult result;
  long adam_t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.lr0, cfg.lr_min, t_max);
    if (cfg.shuffle) {
      Rng rng = Rng::stream(cfg.seed + 0x5107, static_cast<std::uint64_t>(epoch));
      for (std::size_t i = count; i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
      }
    }

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < count; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t size = std::min<std::size_t>(cfg.batch_size, count - begin);
      Mat bx(X.rows(), size), by(Y.rows(), size);
      for (std::size_t k = 0; k < size; ++k) {
        bx.col(static_cast<Eigen::Index>(k)) = X.col(order[begin + k]);
        by.col(static_cast<Eigen::Index>(k)) = Y.col(order[begin + k]);
      }
      Rng drop_rng = Rng::stream(cfg.seed ^ 0xDD07ULL,
                                 static_cast<std::uint64_t>(epoch) * 1000003ULL + batches);
      Gradients grads;
      const double loss = batch_backward(params, bx, by, true, cfg.dropout_rate, &drop_rng, &grads);
      epoch_loss += loss;
      ++batches;

      ++adam_t;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
      for (std::size_t l = 0; l < params.W.size(); ++l) {
        mW[l] = cfg.beta1 * mW[l] + (1.0 - cfg.beta1) * grads.dW[l];
        vW[l] = cfg.beta2 * vW[l] + (1.0 - cfg.beta2) * grads.dW[l].cwiseProduct(grads.dW[l]);
        params.W[l].array() -=
            lr * (mW[l].array() / bc1) / ((vW[l].array() / bc2).sqrt() + cfg.eps_adam);
        mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * grads.db[l];
        vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * grads.db[l].cwiseProduct(grads.db[l]);
        params.b[l].array() -=
            lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + cfg.eps_adam);
      }
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDivergedError("mlp_train: non-finite loss at epoch " + std::to_string(epoch),
                                  epoch);
    }

    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (Xv.cols() > 0) {
      val_loss = batch_backward(params, Xv, Yv, false, 0.0, nullptr, nullptr);
    }
    result.curve.push_back({epoch, lr, epoch_loss, val_loss});
  }
  result.params = std::move(params);
  return result;
}

ImitationGap measure_gap(const MlpParameters& params, const TrainingDataset& val_set) {
  if (val_set.samples.empty()) throw ConfigError("measure_gap: empty validation set");
  ImitationGap gap;
  Mat val_in, val_tgt;
  dataset_blocks(val_set, val_in, val_tgt);
  const Mat Xv = normalize_block(val_in, params.in_mean, params.in_std);
  const Mat Yv = normalize_block(val_tgt, params.out_mean, params.out_std);
  gap.val_mse = batch_backward(params, Xv, Yv, false, 0.0, nullptr, nullptr);

  const int n = params.n;
  for (const auto& s : val_set.samples) {
    const NnOutput out = mlp_forward(params, s.x, s.r);
    gap.du_bar = std::max(gap.du_bar, (out.u_hat - s.u).norm());
    const Mat dP = out.P_hat - unpack_sym(s.P_packed, n);
    Eigen::SelfAdjointEigenSolver<Mat> es(dP);
    gap.dP_bar = std::max(gap.dP_bar, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return gap;
}

double grad_check(const MlpArchitecture& arch_in, std::uint64_t seed, int probe_count) {
  MlpArchitecture arch = arch_in;
  arch.dropout_rate = 0.0;
  arch.validate();
  MlpParameters params = mlp_init(arch, seed);

  Rng rng = Rng::stream(seed, 0x6C);
  const int batch = 8;
  Mat input(arch.input_dim, batch), target(arch.output_dim, batch);
  for (int c = 0; c < batch; ++c) {
    for (int i = 0; i < arch.input_dim; ++i) input(i, c) = rng.gaussian();
    for (int i = 0; i < arch.output_dim; ++i) target(i, c) = rng.gaussian();
  }

  Gradients grads;
  batch_backward(params, input, target, false, 0.0, nullptr, &grads);

  // flatten coordinates as (layer, is_bias, row, col)
  struct Coord {
    std::size_t layer;
    bool bias;
    int row, col;
  };
  std::vector<Coord> coords;
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    for (int i = 0; i < params.W[l].rows(); ++i)
      for (int j = 0; j < params.W[l].cols(); ++j) coords.push_back({l, false, i, j});
    for (int i = 0; i < params.b[l].size(); ++i) coords.push_back({l, true, i, 0});
  }

  const double h = 1e-5;
  double max_rel = 0.0;
  for (int probe = 0; probe < probe_count; ++probe) {
    const Coord& c = coords[rng.uniform_index(coords.size())];
    double& theta = c.bias ? params.b[c.layer][c.row] : params.W[c.layer](c.row, c.col);
    const double saved = theta;
    theta = saved + h;
    const double lp = batch_backward(params, input, target, false, 0.0, nullptr, nullptr);
    theta = saved - h;
    const double lm = batch_backward(params, input, target, false, 0.0, nullptr, nullptr);
    theta = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double an = c.bias ? grads.db[c.layer][c.row] : grads.dW[c.layer](c.row, c.col);
    const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - an) / scale);
  }
  return max_rel;
}

void save_checkpoint(const MlpParameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint save: cannot open '" + path + "'");
  out.write(kMagic, 8);
  auto write_pod = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  write_pod(kCheckpointVersion);
  const std::int32_t n = params.n, p = params.p;
  write_pod(n);
  write_pod(p);
  const std::int32_t in_dim = params.arch.input_dim, out_dim = params.arch.output_dim;
  write_pod(in_dim);
  write_pod(out_dim);
  const std::int32_t n_hidden = static_cast<std::int32_t>(params.arch.hidden.size());
  write_pod(n_hidden);
  for (int hdim : params.arch.hidden) {
    const std::int32_t v = hdim;
    write_pod(v);
  }
  const std::uint8_t act = static_cast<std::uint8_t>(params.arch.activation);
  write_pod(act);
  write_pod(params.arch.dropout_rate);
  auto write_vec = [&](const Vec& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * v.size()));
  };
  write_vec(params.in_mean);
  write_vec(params.in_std);
  write_vec(params.out_mean);
  write_vec(params.out_std);
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    const Mat& W = params.W[l];
    for (int i = 0; i < W.rows(); ++i)
      for (int j = 0; j < W.cols(); ++j) {
        const double v = W(i, j);
        write_pod(v);
      }
    write_vec(params.b[l]);
  }
  if (!out) throw FormatError("checkpoint save: write failed for '" + path + "'");
}

MlpParameters load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint load: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("checkpoint load: bad magic");
  auto read_pod = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw FormatError("checkpoint load: truncated file");
  };
  std::uint32_t version;
  read_pod(version);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint load: version " + std::to_string(version) +
                      " found, expected " + std::to_string(kCheckpointVersion));
  }
  MlpParameters params;
  std::int32_t n, p, in_dim, out_dim, n_hidden;
  read_pod(n);
  read_pod(p);
  read_pod(in_dim);
  read_pod(out_dim);
  read_pod(n_hidden);
  params.n = n;
  params.p = p;
  params.arch.input_dim = in_dim;
  params.arch.output_dim = out_dim;
  params.arch.hidden.resize(n_hidden);
  for (auto& hdim : params.arch.hidden) {
    std::int32_t v;
    read_pod(v);
    hdim = v;
  }
  std::uint8_t act;
  read_pod(act);
  params.arch.activation = static_cast<Activation>(act);
  read_pod(params.arch.dropout_rate);
  auto read_vec = [&](Vec& v, int size) {
    v.resize(size);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * size));
    if (!in) throw FormatError("checkpoint load: truncated vector");
  };
  read_vec(params.in_mean, in_dim);
  read_vec(params.in_std, in_dim);
  read_vec(params.out_mean, out_dim);
  read_vec(params.out_std, out_dim);
  const auto dims = layer_dims(params.arch);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Mat W(dims[l + 1], dims[l]);
    for (int i = 0; i < W.rows(); ++i)
      for (int j = 0; j < W.cols(); ++j) {
        double v;
        read_pod(v);
        W(i, j) = v;
      }
    params.W.push_back(std::move(W));
    Vec b;
    read_vec(b, dims[l + 1]);
    params.b.push_back(std::move(b));
  }
  return params;
}

void save_loss_csv(const std::vector<LossRecord>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("loss csv: cannot open '" + path + "'");
  out << "epoch,lr,train_mse,val_mse\n";
  char buf[96];
  for (const auto& rec : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", rec.epoch, rec.lr, rec.train_mse,
                  rec.val_mse);
    out << buf;
  }
}

}  // namespace osap
