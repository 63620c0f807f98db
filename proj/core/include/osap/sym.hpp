#pragma once

#include <Eigen/Dense>

#include "osap/errors.hpp"

namespace osap {

/// Packed length of the upper triangle (diagonal included) of an n x n
/// symmetric matrix.
inline int sym_packed_size(int n) { return n * (n + 1) / 2; }

/// Packs the upper triangle row-major: P11, P12, ..., P1n, P22, ..., Pnn.
inline Eigen::VectorXd pack_sym(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  Eigen::VectorXd v(sym_packed_size(n));
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v[k++] = P(i, j);
  return v;
}

inline Eigen::MatrixXd unpack_sym(const Eigen::VectorXd& v, int n) {
  if (static_cast<int>(v.size()) != sym_packed_size(n))
    throw ConfigError("unpack_sym: packed length does not match dimension");
  Eigen::MatrixXd P(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      P(i, j) = v[k];
      P(j, i) = v[k];
      ++k;
    }
  return P;
}

}  // namespace osap
