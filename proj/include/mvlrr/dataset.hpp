#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvlrr/error.hpp"
#include "mvlrr/random.hpp"

namespace mvlrr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One view: d_i x n, features in rows, objects in columns.
struct ViewMatrix {
  MatrixXd data;
  std::string name;
};

struct MultiViewDataset {
  std::vector<ViewMatrix> views;
  std::optional<std::vector<int>> labels;
  int num_clusters = 1;

  Index num_objects() const { return views.empty() ? 0 : views.front().data.cols(); }
  Index num_views() const { return static_cast<Index>(views.size()); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> read_nonblank_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) lines.emplace_back(t);
  }
  return lines;
}

inline void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace detail

/// Throws DatasetError if any invariant of the dataset is broken.
inline void validate(const MultiViewDataset& ds) {
  if (ds.views.empty()) throw DatasetError("dataset has no views");
  if (ds.num_clusters < 1) throw DatasetError("num_clusters must be positive");
  const Index n = ds.views.front().data.cols();
  for (const auto& v : ds.views) {
    if (v.data.cols() != n) {
      throw DatasetError("view '" + v.name + "' has " + std::to_string(v.data.cols()) +
                         " objects, expected " + std::to_string(n));
    }
    if (v.data.rows() < 1) throw DatasetError("view '" + v.name + "' has no feature rows");
    for (Index c = 0; c < v.data.cols(); ++c) {
      for (Index r = 0; r < v.data.rows(); ++r) {
        if (!std::isfinite(v.data(r, c))) {
          throw DatasetError("view '" + v.name + "' has non-finite entry at row " +
                             std::to_string(r) + ", column " + std::to_string(c));
        }
      }
    }
  }
  if (n < 2) throw DatasetError("dataset needs at least 2 objects");
  if (ds.labels) {
    const auto& labels = *ds.labels;
    if (static_cast<Index>(labels.size()) != n) {
      throw DatasetError("labels has " + std::to_string(labels.size()) + " entries, expected " +
                         std::to_string(n));
    }
    std::vector<int> counts(static_cast<std::size_t>(ds.num_clusters), 0);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] < 0 || labels[j] >= ds.num_clusters) {
        throw DatasetError("label " + std::to_string(labels[j]) + " at object " +
                           std::to_string(j) + " outside [0, " +
                           std::to_string(ds.num_clusters) + ")");
      }
      ++counts[static_cast<std::size_t>(labels[j])];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) throw DatasetError("class " + std::to_string(c) + " has no objects");
    }
  }
}

/// Parses a headerless CSV of decimal floats. `name` labels error messages.
inline MatrixXd read_csv_matrix(const std::filesystem::path& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw DatasetError("view '" + name + "': cannot open " + path.string());
  std::vector<double> values;
  Index rows = 0;
  Index cols = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    Index c = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      auto field = detail::trim(rest.substr(0, comma));
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw DatasetError("view '" + name + "': cannot parse '" + std::string(field) +
                           "' at row " + std::to_string(rows) + ", column " + std::to_string(c));
      }
      if (!std::isfinite(v)) {
        throw DatasetError("view '" + name + "' has non-finite entry at row " +
                           std::to_string(rows) + ", column " + std::to_string(c));
      }
      values.push_back(v);
      ++c;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cols < 0) {
      cols = c;
    } else if (c != cols) {
      throw DatasetError("view '" + name + "': row " + std::to_string(rows) + " has " +
                         std::to_string(c) + " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw DatasetError("view '" + name + "': empty file " + path.string());
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

/// Writes shortest round-trip decimal representations, so reading back is bit-exact.
inline void write_csv_matrix(const std::filesystem::path& path, const MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  std::string line;
  for (Index r = 0; r < m.rows(); ++r) {
    line.clear();
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) line.push_back(',');
      detail::append_double(line, m(r, c));
    }
    line.push_back('\n');
    out << line;
  }
}

/// Loads a dataset directory: manifest.txt, one CSV per view, optional
/// labels.txt and meta.txt (`k=<int>`).
inline MultiViewDataset load_dataset(const std::filesystem::path& dir) {
  MultiViewDataset ds;
  for (const auto& file : detail::read_nonblank_lines(dir / "manifest.txt")) {
    ds.views.push_back({read_csv_matrix(dir / file, file), file});
  }
  if (ds.views.empty()) throw DatasetError("manifest.txt lists no views");

  std::optional<int> k;
  if (std::filesystem::exists(dir / "meta.txt")) {
    for (const auto& line : detail::read_nonblank_lines(dir / "meta.txt")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      if (detail::trim(std::string_view(line).substr(0, eq)) != "k") continue;
      auto value = detail::trim(std::string_view(line).substr(eq + 1));
      int parsed = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
      if (ec != std::errc() || ptr != value.data() + value.size() || parsed < 1) {
        throw DatasetError("meta.txt: invalid k '" + std::string(value) + "'");
      }
      k = parsed;
    }
  }
  if (std::filesystem::exists(dir / "labels.txt")) {
    std::vector<int> labels;
    for (const auto& line : detail::read_nonblank_lines(dir / "labels.txt")) {
      int parsed = 0;
      auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), parsed);
      if (ec != std::errc() || ptr != line.data() + line.size()) {
        throw DatasetError("labels.txt: invalid label '" + line + "' at line " +
                           std::to_string(labels.size()));
      }
      labels.push_back(parsed);
    }
    if (!k && !labels.empty()) k = *std::max_element(labels.begin(), labels.end()) + 1;
    ds.labels = std::move(labels);
  }
  ds.num_clusters = k.value_or(1);
  validate(ds);
  return ds;
}

inline void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    std::string file = ds.views[v].name.empty() ? "view" + std::to_string(v) + ".csv"
                                                : ds.views[v].name;
    manifest << file << '\n';
    write_csv_matrix(dir / file, ds.views[v].data);
  }
  std::ofstream(dir / "meta.txt") << "k=" << ds.num_clusters << '\n';
  if (ds.labels) {
    std::ofstream labels(dir / "labels.txt");
    for (int l : *ds.labels) labels << l << '\n';
  }
}

/// Adds uniform(low, high) noise to exactly round(fraction * d_i * n)
/// distinct entries of every view. Positions are drawn without replacement,
/// independently per view.
inline MultiViewDataset corrupt_features(const MultiViewDataset& ds, double fraction, double low,
                                         double high, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("corruption fraction must be in [0,1]");
  if (!(low < high)) throw Error("corruption range requires low < high");
  MultiViewDataset out = ds;
  for (std::size_t v = 0; v < out.views.size(); ++v) {
    MatrixXd& x = out.views[v].data;
    const auto total = static_cast<std::size_t>(x.size());
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    Rng rng(derive_seed(seed, 0x636f7272, v));
    std::vector<std::size_t> positions(total);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::uniform_real_distribution<double> noise(low, high);
    // partial Fisher-Yates: the first `count` slots are the sample
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(positions[i], positions[pick(rng)]);
      x.data()[positions[i]] += noise(rng);
    }
  }
  return out;
}

namespace detail {

/// Haar-distributed random orthogonal matrix via QR of a Gaussian matrix.
inline MatrixXd random_rotation(Index d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd g(d, d);
  for (Index c = 0; c < d; ++c)
    for (Index r = 0; r < d; ++r) g(r, c) = gauss(rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  const MatrixXd& packed = qr.matrixQR();
  for (Index c = 0; c < d; ++c)
    if (packed(c, c) < 0) q.col(c) = -q.col(c);
  return q;
}

}  // namespace detail

/// Cluster centers with unit minimum pairwise distance, rotated independently
/// per view, plus isotropic Gaussian noise of scale `noise_sigma`. Object j
/// belongs to class j / (n / k).
inline MultiViewDataset synthesize_multiview(int n, int k, int num_views, std::span<const int> dims,
                                             double noise_sigma, std::uint64_t seed) {
  if (k < 1 || n < 2 || n % k != 0) throw Error("synthesize_multiview: n must be a multiple of k");
  if (num_views < 1 || static_cast<int>(dims.size()) != num_views)
    throw Error("synthesize_multiview: dims must list one dimension per view");
  if (noise_sigma < 0) throw Error("synthesize_multiview: noise_sigma must be nonnegative");

  MultiViewDataset ds;
  ds.num_clusters = k;
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) labels[static_cast<std::size_t>(j)] = j / (n / k);
  ds.labels = labels;

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int v = 0; v < num_views; ++v) {
    const int d = dims[static_cast<std::size_t>(v)];
    if (d < 1) throw Error("synthesize_multiview: dimensions must be positive");
    Rng rng(derive_seed(seed, 0x73796e74, static_cast<std::uint64_t>(v)));

    MatrixXd centers = MatrixXd::Zero(d, k);
    if (d >= k) {
      for (int m = 0; m < k; ++m) centers(m, m) = std::sqrt(0.5);
    } else {
      for (Index c = 0; c < k; ++c)
        for (Index r = 0; r < d; ++r) centers(r, c) = gauss(rng);
      double min_dist = std::numeric_limits<double>::infinity();
      for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
          min_dist = std::min(min_dist, (centers.col(a) - centers.col(b)).norm());
      if (k > 1 && min_dist > 0) centers /= min_dist;
    }
    centers = detail::random_rotation(d, rng) * centers;

    MatrixXd x(d, n);
    for (int j = 0; j < n; ++j) {
      x.col(j) = centers.col(labels[static_cast<std::size_t>(j)]);
      if (noise_sigma > 0)
        for (Index r = 0; r < d; ++r) x(r, j) += noise_sigma * gauss(rng);
    }
    ds.views.push_back({std::move(x), "view" + std::to_string(v) + ".csv"});
  }
  return ds;
}

}  // namespace mvlrr
