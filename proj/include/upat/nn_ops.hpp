// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small dense building blocks shared by the models. Internal header.

#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace upat::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

inline constexpr double kLayerNormEps = 1e-6;

// Exact (erf) GELU.
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

struct LayerNormCache {
  Mat xhat;
  Vec rstd;
};

inline Mat layer_norm_forward(const Mat& x, const ConstVecMap& scale, const ConstVecMap& shift,
                              LayerNormCache& cache) {
  const auto n = x.cols();
  const Vec mean = x.rowwise().mean();
  cache.xhat = x.colwise() - mean;
  const Vec var = cache.xhat.rowwise().squaredNorm() / static_cast<double>(n);
  cache.rstd = (var.array() + kLayerNormEps).rsqrt();
  cache.xhat = cache.rstd.asDiagonal() * cache.xhat;
  Mat y = cache.xhat * scale.asDiagonal();
  y.rowwise() += shift.transpose();
  return y;
}

inline Mat layer_norm_backward(const Mat& dy, const ConstVecMap& scale, const LayerNormCache& cache,
                               Vec* dscale, Vec* dshift) {
  const auto n = static_cast<double>(dy.cols());
  if (dscale) *dscale = dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
  if (dshift) *dshift = dy.colwise().sum().transpose();
  const Mat dxhat = dy * scale.asDiagonal();
  const Vec mean_d = dxhat.rowwise().sum() / n;
  const Vec mean_dx = dxhat.cwiseProduct(cache.xhat).rowwise().sum() / n;
  Mat dx = dxhat.colwise() - mean_d;
  dx -= mean_dx.asDiagonal() * cache.xhat;
  return cache.rstd.asDiagonal() * dx;
}

template <typename Derived>
void softmax_rows_in_place(Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace upat::nn
