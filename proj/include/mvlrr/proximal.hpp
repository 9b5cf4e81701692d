#pragma once

#include <Eigen/Dense>

#include <string>

#include "mvlrr/error.hpp"

namespace mvlrr {

using Eigen::MatrixXd;

/// Elementwise shrinkage sgn(a) * max(|a| - eps, 0), the prox of eps * |.|_1.
inline MatrixXd soft_threshold(const MatrixXd& a, double eps) {
  if (!(eps >= 0.0)) throw Error("soft_threshold: threshold must be nonnegative");
  return a.unaryExpr([eps](double v) {
    if (v > eps) return v - eps;
    if (v < -eps) return v + eps;
    return 0.0;
  });
}

inline double soft_threshold(double a, double eps) {
  if (a > eps) return a - eps;
  if (a < -eps) return a + eps;
  return 0.0;
}

/// Singular value thresholding U S_eps(Sigma) V^T, the prox of eps * |.|_*.
inline MatrixXd svt(const MatrixXd& a, double eps) {
  if (!(eps >= 0.0)) throw Error("svt: threshold must be nonnegative");
  if (a.size() == 0) return a;
  Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw Error("svt: SVD failed on " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " matrix");
  }
  const auto& sigma = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > eps) ++rank;
  if (rank == 0) return MatrixXd::Zero(a.rows(), a.cols());
  const Eigen::VectorXd shrunk = (sigma.head(rank).array() - eps).matrix();
  return svd.matrixU().leftCols(rank) * shrunk.asDiagonal() *
         svd.matrixV().leftCols(rank).transpose();
}

}  // namespace mvlrr
