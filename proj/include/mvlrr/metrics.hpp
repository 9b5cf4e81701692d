#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <span>
#include <vector>

#include "mvlrr/error.hpp"

namespace mvlrr {

namespace detail {

/// Dense contingency table with rows = distinct predicted ids, cols = distinct
/// true ids, both in increasing id order.
inline std::vector<std::vector<long>> contingency(std::span<const int> predicted,
                                                  std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw Error("label sequences differ in length (" + std::to_string(predicted.size()) + " vs " +
                std::to_string(truth.size()) + ")");
  if (predicted.empty()) throw Error("label sequences are empty");
  std::map<int, std::size_t> rows, cols;
  for (int p : predicted) rows.emplace(p, 0);
  for (int t : truth) cols.emplace(t, 0);
  std::size_t idx = 0;
  for (auto& [id, slot] : rows) slot = idx++;
  idx = 0;
  for (auto& [id, slot] : cols) slot = idx++;
  std::vector<std::vector<long>> table(rows.size(), std::vector<long>(cols.size(), 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) ++table[rows[predicted[i]]][cols[truth[i]]];
  return table;
}

}  // namespace detail

/// Minimum-cost assignment for a square cost matrix (Hungarian algorithm,
/// shortest augmenting path form). Returns the column assigned to each row.
/// Ties resolve toward lower indices.
inline std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

/// Fraction of objects whose predicted cluster maps to their true class under
/// the best one-to-one matching of cluster ids.
inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  const auto table = detail::contingency(predicted, truth);
  const std::size_t size = std::max(table.size(), table.front().size());
  long max_count = 0;
  for (const auto& row : table)
    for (long c : row) max_count = std::max(max_count, c);
  // zero-padded to square; maximize matches == minimize (max - count)
  std::vector<std::vector<double>> cost(size, std::vector<double>(size, static_cast<double>(max_count)));
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t c = 0; c < table[r].size(); ++c)
      cost[r][c] = static_cast<double>(max_count - table[r][c]);
  const auto assignment = hungarian_min_cost(cost);
  long matched = 0;
  for (std::size_t r = 0; r < table.size(); ++r)
    if (assignment[r] < table[r].size()) matched += table[r][assignment[r]];
  return static_cast<double>(matched) / static_cast<double>(predicted.size());
}

/// I(U;V) / sqrt(H(U) H(V)) with natural logarithms.
inline double nmi(std::span<const int> predicted, std::span<const int> truth) {
  const auto table = detail::contingency(predicted, truth);
  const double n = static_cast<double>(predicted.size());
  std::vector<double> row_sum(table.size(), 0.0), col_sum(table.front().size(), 0.0);
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      row_sum[r] += static_cast<double>(table[r][c]);
      col_sum[c] += static_cast<double>(table[r][c]);
    }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hu = entropy(row_sum);
  const double hv = entropy(col_sum);
  if (table.size() == 1 && table.front().size() == 1) return 1.0;
  if (hu == 0.0 || hv == 0.0) return 0.0;
  // one nonzero per row and column: the partitions coincide
  if (table.size() == table.front().size()) {
    bool bijective = true;
    std::vector<int> col_hits(table.front().size(), 0);
    for (const auto& row : table) {
      int hits = 0;
      for (std::size_t c = 0; c < row.size(); ++c)
        if (row[c] > 0) {
          ++hits;
          ++col_hits[c];
        }
      bijective = bijective && hits == 1;
    }
    for (int h : col_hits) bijective = bijective && h == 1;
    if (bijective) return 1.0;
  }
  double mi = 0.0;
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      const double nij = static_cast<double>(table[r][c]);
      if (nij > 0) mi += (nij / n) * std::log(n * nij / (row_sum[r] * col_sum[c]));
    }
  // rounding can push the ratio just outside [0, 1]
  return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

}  // namespace mvlrr
