#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mvlrr/error.hpp"
#include "mvlrr/random.hpp"

namespace mvlrr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FusedAffinity {
  MatrixXd fused;
  std::vector<MatrixXd> per_view;
};

struct ClusteringResult {
  MatrixXd fused;
  std::vector<MatrixXd> per_view;
  std::vector<int> labels;
};

/// Turns one representation into an affinity: unit-norm columns, entries with
/// |z| < tau zeroed, negatives clamped, then (Z + Z^T) / 2.
inline MatrixXd representation_affinity(const MatrixXd& z, double tau) {
  if (z.rows() != z.cols()) throw ShapeError("representation must be square");
  MatrixXd a = z;
  for (Index c = 0; c < a.cols(); ++c) {
    const double norm = a.col(c).norm();
    if (norm > 0.0) a.col(c) /= norm;
  }
  a = a.unaryExpr([tau](double v) { return (std::abs(v) < tau || v < 0.0) ? 0.0 : v; });
  return (a + a.transpose()) * 0.5;
}

/// Per-view affinities and their arithmetic mean.
inline FusedAffinity fuse_affinity(std::span<const MatrixXd> z_list, double tau = 1e-3) {
  if (z_list.empty()) throw ShapeError("fuse_affinity: no representations");
  if (!(tau >= 0.0)) throw Error("fuse_affinity: tau must be nonnegative");
  const Index n = z_list.front().rows();
  FusedAffinity out;
  out.fused = MatrixXd::Zero(n, n);
  for (const auto& z : z_list) {
    if (z.rows() != n || z.cols() != n) throw ShapeError("fuse_affinity: shape mismatch");
    out.per_view.push_back(representation_affinity(z, tau));
    out.fused += out.per_view.back();
  }
  out.fused /= static_cast<double>(z_list.size());
  return out;
}

struct KMeansResult {
  std::vector<int> labels;
  MatrixXd centroids;  // k x dim
  double wcss = 0.0;
};

namespace detail {

inline double assign_points(const MatrixXd& pts, const MatrixXd& centroids, std::vector<int>& labels,
                            VectorXd& dist) {
  double wcss = 0.0;
  for (Index i = 0; i < pts.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = (pts.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    dist(i) = best;
    wcss += best;
  }
  return wcss;
}

inline MatrixXd kmeans_plus_plus(const MatrixXd& pts, int k, Rng& rng) {
  const Index n = pts.rows();
  MatrixXd centroids(k, pts.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centroids.row(0) = pts.row(first(rng));
  VectorXd d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (pts.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target < 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centroids.row(c) = pts.row(pick);
    for (Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (pts.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

inline KMeansResult lloyd(const MatrixXd& pts, int k, Rng& rng, int max_iter) {
  const Index n = pts.rows();
  KMeansResult r;
  r.centroids = kmeans_plus_plus(pts, k, rng);
  r.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> next(static_cast<std::size_t>(n));
  VectorXd dist(n);
  for (int it = 0; it < max_iter; ++it) {
    assign_points(pts, r.centroids, next, dist);
    // an empty cluster takes the point farthest from its own centroid
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (int l : next) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      for (Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])] < 2) continue;
        if (far < 0 || dist(i) > dist(far)) far = i;
      }
      if (far < 0) break;
      --counts[static_cast<std::size_t>(next[static_cast<std::size_t>(far)])];
      next[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist(far) = 0.0;
    }
    const bool stable = next == r.labels;
    r.labels = next;
    MatrixXd sums = MatrixXd::Zero(k, pts.cols());
    for (Index i = 0; i < n; ++i) sums.row(next[static_cast<std::size_t>(i)]) += pts.row(i);
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    if (stable) break;
  }
  r.wcss = 0.0;
  for (Index i = 0; i < n; ++i)
    r.wcss += (pts.row(i) - r.centroids.row(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return r;
}

}  // namespace detail

/// Best-of-restarts Lloyd's algorithm with k-means++ seeding. Rows of
/// `points` are the samples. The lowest WCSS wins; ties go to the earlier restart.
inline KMeansResult kmeans(const MatrixXd& points, int k, int restarts, std::uint64_t seed,
                           int max_iter = 300) {
  if (k < 1) throw Error("kmeans: k must be positive");
  if (k > points.rows())
    throw Error("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(points.rows()) +
                " points");
  if (restarts < 1) throw Error("kmeans: restarts must be positive");
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, 0x6b6d6e73, static_cast<std::uint64_t>(r)));
    KMeansResult cur = detail::lloyd(points, k, rng, max_iter);
    if (cur.wcss < best.wcss) best = std::move(cur);
  }
  return best;
}

inline constexpr int kDefaultKMeansRestarts = 20;

/// Normalized spectral clustering on a symmetric nonnegative affinity.
///
/// Embeds with the k eigenvectors of I - D^{-1/2} W D^{-1/2} having the
/// smallest eigenvalues, renormalizes rows, and runs k-means. Isolated nodes
/// (zero degree) take the label of their nearest connected node in the embedding.
inline std::vector<int> spectral_cluster(const MatrixXd& w, int k, std::uint64_t seed,
                                         int restarts = kDefaultKMeansRestarts) {
  const Index n = w.rows();
  if (w.cols() != n) throw ShapeError("spectral_cluster: affinity must be square");
  if (k < 1 || k > n)
    throw Error("spectral_cluster: k=" + std::to_string(k) + " invalid for " + std::to_string(n) +
                " objects");
  const VectorXd degrees = w.rowwise().sum();
  VectorXd inv_sqrt(n);
  std::vector<Index> connected, isolated;
  for (Index i = 0; i < n; ++i) {
    if (degrees(i) > 0.0) {
      inv_sqrt(i) = 1.0 / std::sqrt(degrees(i));
      connected.push_back(i);
    } else {
      inv_sqrt(i) = 0.0;
      isolated.push_back(i);
    }
  }
  MatrixXd lsym = -(inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal());
  lsym.diagonal().array() += 1.0;
  lsym = 0.5 * (lsym + lsym.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(lsym);
  if (eig.info() != Eigen::Success) throw Error("spectral_cluster: eigendecomposition failed");
  MatrixXd embed = eig.eigenvectors().leftCols(k);
  for (Index i = 0; i < n; ++i) {
    const double norm = embed.row(i).norm();
    if (norm > 0.0) embed.row(i) /= norm;
  }

  if (connected.size() < static_cast<std::size_t>(k) || isolated.empty()) {
    return kmeans(embed, k, restarts, seed).labels;
  }
  MatrixXd sub(static_cast<Index>(connected.size()), k);
  for (std::size_t r = 0; r < connected.size(); ++r) sub.row(static_cast<Index>(r)) = embed.row(connected[r]);
  const auto sub_labels = kmeans(sub, k, restarts, seed).labels;
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (std::size_t r = 0; r < connected.size(); ++r)
    labels[static_cast<std::size_t>(connected[r])] = sub_labels[r];
  for (Index i : isolated) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < connected.size(); ++r) {
      const double d = (embed.row(i) - embed.row(connected[r])).squaredNorm();
      if (d < best) {
        best = d;
        labels[static_cast<std::size_t>(i)] = sub_labels[r];
      }
    }
  }
  return labels;
}

/// Fuses the per-view representations and clusters the fused affinity.
inline ClusteringResult cluster_representations(std::span<const MatrixXd> z_list, int k,
                                                double tau, std::uint64_t seed) {
  auto fused = fuse_affinity(z_list, tau);
  ClusteringResult r;
  r.labels = spectral_cluster(fused.fused, k, seed);
  r.fused = std::move(fused.fused);
  r.per_view = std::move(fused.per_view);
  return r;
}

}  // namespace mvlrr
