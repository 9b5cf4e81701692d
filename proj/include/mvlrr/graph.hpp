#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mvlrr/error.hpp"
#include "mvlrr/random.hpp"

namespace mvlrr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-point bandwidth: sigma_j is the distance from x_j to its K-th neighbor.
struct SelfTuning {
  int k = 7;
};

/// One bandwidth shared by all points.
struct GlobalSigma {
  double sigma = 1.0;
};

using SigmaMode = std::variant<SelfTuning, GlobalSigma>;

struct SimilarityGraph {
  MatrixXd weights;   // W, symmetric, zero diagonal
  VectorXd degrees;   // diagonal of D
  MatrixXd laplacian; // L = D - W
  int neighbors = 0;
  SigmaMode sigma_mode;

  MatrixXd degree_matrix() const { return degrees.asDiagonal(); }
};

struct LaplacianParts {
  VectorXd degrees;
  MatrixXd laplacian;
};

/// Degree vector and L = D - W of a symmetric, nonnegative affinity.
inline LaplacianParts laplacian(const MatrixXd& w) {
  if (w.rows() != w.cols()) throw ShapeError("laplacian: affinity matrix must be square");
  if (w.size() > 0 && (w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw Error("laplacian: affinity matrix is not symmetric");
  LaplacianParts parts;
  parts.degrees = w.rowwise().sum();
  parts.laplacian = -w;
  parts.laplacian.diagonal() += parts.degrees;
  return parts;
}

/// Squared Euclidean distances between columns, computed from explicit differences.
inline MatrixXd pairwise_sq_distances(const MatrixXd& x) {
  const Index n = x.cols();
  MatrixXd d2 = MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = j + 1; k < n; ++k) {
      const double v = (x.col(j) - x.col(k)).squaredNorm();
      d2(j, k) = v;
      d2(k, j) = v;
    }
  }
  return d2;
}

/// Indices of the other columns ordered by (distance, index).
inline std::vector<Index> neighbor_order(const MatrixXd& d2, Index j) {
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(d2.rows() - 1));
  for (Index k = 0; k < d2.rows(); ++k)
    if (k != j) order.push_back(k);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return d2(j, a) != d2(j, b) ? d2(j, a) < d2(j, b) : a < b;
  });
  return order;
}

/// s-nearest-neighbor Gaussian affinity over the columns of `x`.
///
/// An edge (j, k) is kept when k is among the s nearest neighbors of j or vice
/// versa, with weight exp(-|x_j - x_k|^2 / (2 sigma_j sigma_k)). Distance ties
/// at the s-th neighbor go to the lower column index.
inline SimilarityGraph knn_similarity(const MatrixXd& x, int s,
                                      SigmaMode mode = SelfTuning{}) {
  const Index n = x.cols();
  if (n < 2) throw ShapeError("knn_similarity: need at least 2 objects");
  if (s < 1 || s >= n)
    throw Error("knn_similarity: neighbor count " + std::to_string(s) + " must lie in [1, " +
                std::to_string(n - 1) + "]");

  const MatrixXd d2 = pairwise_sq_distances(x);
  std::vector<std::vector<Index>> orders(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) orders[static_cast<std::size_t>(j)] = neighbor_order(d2, j);

  VectorXd sigma(n);
  if (const auto* st = std::get_if<SelfTuning>(&mode)) {
    if (st->k < 1) throw Error("knn_similarity: self-tuning rank must be positive");
    const auto kth = static_cast<std::size_t>(std::min<Index>(st->k, n - 1) - 1);
    for (Index j = 0; j < n; ++j) {
      const auto& order = orders[static_cast<std::size_t>(j)];
      double sj = std::sqrt(d2(j, order[kth]));
      if (sj == 0.0) {
        for (Index k : order) {
          if (d2(j, k) > 0.0) {
            sj = std::sqrt(d2(j, k));
            break;
          }
        }
      }
      if (sj == 0.0) throw DegenerateViewError("knn_similarity: all points coincide");
      sigma(j) = sj;
    }
  } else {
    const double g = std::get<GlobalSigma>(mode).sigma;
    if (!(g > 0.0)) throw Error("knn_similarity: global sigma must be positive");
    sigma.setConstant(g);
  }

  std::vector<char> mask(static_cast<std::size_t>(n * n), 0);
  for (Index j = 0; j < n; ++j) {
    const auto& order = orders[static_cast<std::size_t>(j)];
    for (int t = 0; t < s; ++t) {
      const Index k = order[static_cast<std::size_t>(t)];
      mask[static_cast<std::size_t>(j * n + k)] = 1;
      mask[static_cast<std::size_t>(k * n + j)] = 1;
    }
  }

  SimilarityGraph g;
  g.weights = MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = j + 1; k < n; ++k) {
      if (!mask[static_cast<std::size_t>(j * n + k)]) continue;
      const double w = std::exp(-d2(j, k) / (2.0 * sigma(j) * sigma(k)));
      g.weights(j, k) = w;
      g.weights(k, j) = w;
    }
  }
  auto parts = laplacian(g.weights);
  g.degrees = std::move(parts.degrees);
  g.laplacian = std::move(parts.laplacian);
  g.neighbors = s;
  g.sigma_mode = mode;
  return g;
}

/// Tr(Z^T L Z), evaluated as a quadratic form.
inline double graph_regularizer(const MatrixXd& z, const MatrixXd& l) {
  return z.cwiseProduct(l * z).sum();
}

inline constexpr int kPowerIterationCap = 10000;
inline constexpr std::uint64_t kPowerIterationSeed = 0x706f776572ull;

namespace detail {

inline VectorXd random_unit_vector(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = gauss(rng);
  return v / v.norm();
}

/// Power iteration on a PSD operator; returns the Rayleigh quotient. Stops when
/// the relative change drops below tol and the eigen-residual is below sqrt(tol).
template <typename Apply>
double psd_power_iteration(Index n, Apply&& apply, double tol, std::uint64_t seed,
                           const char* what) {
  VectorXd v = random_unit_vector(n, seed);
  VectorXd w = apply(v);
  double theta = v.dot(w);
  const double residual_tol = std::sqrt(tol);
  for (int it = 0; it < kPowerIterationCap; ++it) {
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    w = apply(v);
    const double next = v.dot(w);
    const double scale = std::max(std::abs(next), std::numeric_limits<double>::min());
    const bool settled = std::abs(next - theta) <= tol * scale;
    theta = next;
    if (settled && (w - theta * v).norm() <= residual_tol * scale) return theta;
  }
  throw ConvergenceError(std::string(what) + ": power iteration did not converge in " +
                             std::to_string(kPowerIterationCap) + " iterations",
                         theta);
}

}  // namespace detail

/// Largest eigenvalue of a symmetric matrix by power iteration. Matrices that
/// are not PSD are shifted by their Gershgorin lower bound first.
inline double largest_eigenvalue(const MatrixXd& l, double tol = 1e-10,
                                 std::uint64_t seed = kPowerIterationSeed) {
  if (l.rows() != l.cols()) throw ShapeError("largest_eigenvalue: matrix must be square");
  const Index n = l.rows();
  if (n == 0) return 0.0;
  double lower = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j)
    lower = std::min(lower, l(j, j) - (l.row(j).cwiseAbs().sum() - std::abs(l(j, j))));
  const double shift = std::max(0.0, -lower);
  try {
    return detail::psd_power_iteration(
               n, [&](const VectorXd& v) -> VectorXd { return l * v + shift * v; }, tol, seed,
               "largest_eigenvalue") -
           shift;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(e.what(), e.best_estimate() - shift);
  }
}

/// Largest singular value by power iteration on the smaller Gram matrix.
inline double spectral_norm(const MatrixXd& x, double tol = 1e-10,
                            std::uint64_t seed = kPowerIterationSeed) {
  if (x.size() == 0) return 0.0;
  try {
    double lambda = 0.0;
    if (x.rows() < x.cols()) {
      lambda = detail::psd_power_iteration(
          x.rows(), [&](const VectorXd& v) -> VectorXd { return x * (x.transpose() * v); }, tol,
          seed, "spectral_norm");
    } else {
      lambda = detail::psd_power_iteration(
          x.cols(), [&](const VectorXd& v) -> VectorXd { return x.transpose() * (x * v); }, tol,
          seed, "spectral_norm");
    }
    return std::sqrt(std::max(0.0, lambda));
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(e.what(), std::sqrt(std::max(0.0, e.best_estimate())));
  }
}

}  // namespace mvlrr
