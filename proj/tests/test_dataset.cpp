#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "mvlrr/clustering.hpp"
#include "mvlrr/dataset.hpp"
#include "mvlrr/metrics.hpp"
#include "support/oracles.hpp"

using namespace mvlrr;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("mvlrr_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

bool bitwise_equal(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(LoadDataset, MinimalSingleView) {
  auto dir = scratch_dir("minimal");
  write_file(dir / "manifest.txt", "v.csv\n");
  write_file(dir / "v.csv", "1.5,-2e-3\n");
  auto ds = load_dataset(dir);
  EXPECT_EQ(ds.num_views(), 1);
  EXPECT_EQ(ds.num_objects(), 2);
  EXPECT_FALSE(ds.labels.has_value());
  EXPECT_DOUBLE_EQ(ds.views[0].data(0, 1), -2e-3);
}

TEST(LoadDataset, ManifestOrderAndMeta) {
  auto dir = scratch_dir("order");
  write_file(dir / "manifest.txt", "b.csv\na.csv\n");
  write_file(dir / "a.csv", "1,2,3\n");
  write_file(dir / "b.csv", "4,5,6\n7,8,9\n");
  write_file(dir / "labels.txt", "0\n1\n1\n");
  write_file(dir / "meta.txt", "k=2\n");
  auto ds = load_dataset(dir);
  ASSERT_EQ(ds.num_views(), 2);
  EXPECT_EQ(ds.views[0].name, "b.csv");
  EXPECT_EQ(ds.views[0].data.rows(), 2);
  EXPECT_EQ(ds.num_clusters, 2);
  EXPECT_EQ(*ds.labels, (std::vector<int>{0, 1, 1}));
}

TEST(LoadDataset, DimensionMismatchNamesView) {
  auto dir = scratch_dir("mismatch");
  write_file(dir / "manifest.txt", "a.csv\nb.csv\n");
  std::string a, b;
  for (int i = 0; i < 100; ++i) a += (i ? ",1" : "1");
  for (int i = 0; i < 99; ++i) b += (i ? ",1" : "1");
  write_file(dir / "a.csv", a + "\n");
  write_file(dir / "b.csv", b + "\n");
  try {
    load_dataset(dir);
    FAIL() << "expected a dimension mismatch";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("b.csv"), std::string::npos);
  }
}

TEST(LoadDataset, ReportsNonFiniteWithCoordinates) {
  auto dir = scratch_dir("nonfinite");
  write_file(dir / "manifest.txt", "a.csv\n");
  write_file(dir / "a.csv", "1,2\n3,nan\n");
  try {
    load_dataset(dir);
    FAIL();
  } catch (const DatasetError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a.csv"), std::string::npos);
    EXPECT_NE(msg.find("row 1"), std::string::npos);
    EXPECT_NE(msg.find("column 1"), std::string::npos);
  }
}

TEST(LoadDataset, RejectsBadLabelsAndMissingFiles) {
  auto dir = scratch_dir("labels");
  write_file(dir / "manifest.txt", "a.csv\n");
  write_file(dir / "a.csv", "1,2,3\n");
  write_file(dir / "labels.txt", "0\n3\n1\n");
  write_file(dir / "meta.txt", "k=2\n");
  EXPECT_THROW(load_dataset(dir), DatasetError);
  write_file(dir / "labels.txt", "0\n0\n0\n");
  EXPECT_THROW(load_dataset(dir), DatasetError);  // class 1 empty
  write_file(dir / "manifest.txt", "a.csv\nmissing.csv\n");
  EXPECT_THROW(load_dataset(dir), DatasetError);
}

TEST(LoadDataset, SaveRoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  MultiViewDataset ds;
  ds.views.push_back({oracle::random_matrix(4, 7, rng, 1e3), "x.csv"});
  ds.views.push_back({oracle::random_matrix(2, 7, rng, 1e-7), "y.csv"});
  ds.views[0].data(0, 0) = 0.1;
  ds.views[0].data(1, 0) = -0.0;
  ds.views[1].data(0, 0) = std::numeric_limits<double>::denorm_min();
  ds.labels = std::vector<int>{0, 1, 2, 0, 1, 2, 0};
  ds.num_clusters = 3;
  auto dir = scratch_dir("roundtrip");
  save_dataset(ds, dir);
  auto back = load_dataset(dir);
  ASSERT_EQ(back.num_views(), 2);
  for (int v = 0; v < 2; ++v) EXPECT_TRUE(bitwise_equal(ds.views[v].data, back.views[v].data));
  EXPECT_EQ(*back.labels, *ds.labels);
  EXPECT_EQ(back.num_clusters, 3);
}

TEST(CorruptFeatures, ZeroFractionIsIdentity) {
  auto ds = oracle::fixture(1);
  auto out = corrupt_features(ds, 0.0, -1, 1, 9);
  for (int v = 0; v < 3; ++v) EXPECT_TRUE(bitwise_equal(ds.views[v].data, out.views[v].data));
}

TEST(CorruptFeatures, ChangesExactCountWithinRange) {
  MultiViewDataset ds;
  ds.views.push_back({MatrixXd::Zero(10, 10), "a"});
  ds.views.push_back({MatrixXd::Constant(3, 10, 2.0), "b"});
  const auto out = corrupt_features(ds, 0.2, -5, 5, 42);
  for (int v = 0; v < 2; ++v) {
    const MatrixXd diff = out.views[v].data - ds.views[v].data;
    const long changed = (diff.array() != 0.0).count();
    EXPECT_EQ(changed, std::lround(0.2 * static_cast<double>(diff.size())));
    EXPECT_LE(diff.maxCoeff(), 5.0);
    EXPECT_GE(diff.minCoeff(), -5.0);
  }
  // input untouched
  EXPECT_EQ(ds.views[0].data.cwiseAbs().sum(), 0.0);
}

TEST(CorruptFeatures, SeededDeterminism) {
  auto ds = oracle::fixture(2);
  auto a = corrupt_features(ds, 0.3, -1, 2, 77);
  auto b = corrupt_features(ds, 0.3, -1, 2, 77);
  auto c = corrupt_features(ds, 0.3, -1, 2, 78);
  for (int v = 0; v < 3; ++v) EXPECT_TRUE(bitwise_equal(a.views[v].data, b.views[v].data));
  EXPECT_FALSE(bitwise_equal(a.views[0].data, c.views[0].data));
  EXPECT_THROW(corrupt_features(ds, 0.1, 1, 1, 0), Error);
}

TEST(Synthesize, ZeroNoiseRepeatsCenters) {
  auto ds = oracle::fixture(5, 0.0);
  ASSERT_EQ(ds.num_views(), 3);
  for (const auto& v : ds.views) {
    for (int j = 0; j < 90; ++j) {
      const int first = (j / 30) * 30;
      EXPECT_EQ(v.data.col(j), v.data.col(first));
    }
    EXPECT_NE(v.data.col(0), v.data.col(30));
    EXPECT_NEAR((v.data.col(0) - v.data.col(30)).norm(), oracle::kFixtureSeparation, 1e-12);
  }
}

TEST(Synthesize, DeterministicPerSeed) {
  auto a = oracle::fixture(11), b = oracle::fixture(11), c = oracle::fixture(12);
  for (int v = 0; v < 3; ++v) EXPECT_TRUE(bitwise_equal(a.views[v].data, b.views[v].data));
  EXPECT_FALSE(bitwise_equal(a.views[0].data, c.views[0].data));
  EXPECT_NO_THROW(validate(a));
}

TEST(Synthesize, ViewsAreRotatedDifferently) {
  auto ds = synthesize_multiview(30, 3, 2, std::vector<int>{6, 6}, 0.0, 4);
  EXPECT_GT((ds.views[0].data - ds.views[1].data).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Synthesize, SmallNoiseIsRecoverableByRawKMeans) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto ds = oracle::fixture(seed);
    const auto& truth = *ds.labels;
    for (const auto& view : ds.views) {
      // brute-force nearest class-mean assignment
      MatrixXd means = MatrixXd::Zero(view.data.rows(), 3);
      for (int j = 0; j < 90; ++j) means.col(truth[j]) += view.data.col(j) / 30.0;
      std::vector<int> nearest(90);
      for (int j = 0; j < 90; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < 3; ++c) {
          const double d = (view.data.col(j) - means.col(c)).squaredNorm();
          if (d < best) {
            best = d;
            nearest[j] = c;
          }
        }
      }
      EXPECT_EQ(nearest, truth);
      auto km = kmeans(view.data.transpose(), 3, 5, seed);
      EXPECT_DOUBLE_EQ(accuracy(km.labels, truth), 1.0);
    }
  }
}
