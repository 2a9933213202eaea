#include "prisampler/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

namespace prisampler {
namespace {

TEST(RngStream, SameSeedAndStreamIsBitIdentical) {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64());
  }
  RngStream c(42, 7);
  RngStream d(42, 7);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(c.normal(), d.normal());
  }
}

TEST(RngStream, DifferentSeedsOrStreamsDiffer) {
  RngStream a(42, 0);
  RngStream b(43, 0);
  RngStream c(42, 1);
  bool differs_seed = false;
  bool differs_stream = false;
  RngStream a2(42, 0);
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t va = a.next_u64();
    differs_seed |= va != b.next_u64();
    differs_stream |= a2.next_u64() != c.next_u64();
  }
  EXPECT_TRUE(differs_seed);
  EXPECT_TRUE(differs_stream);
}

TEST(RngStream, UniformStaysInHalfOpenUnitInterval) {
  RngStream rng(1, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(RngStream, NormalMomentsMatchStandardGaussian) {
  RngStream rng(123, 5);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(RngStream, DistinctStreamsAreUncorrelated) {
  RngStream a(2024, 0);
  RngStream b(2024, 1);
  const int n = 100000;
  double sum_ab = 0.0;
  double sum_a = 0.0;
  double sum_b = 0.0;
  double sum_a2 = 0.0;
  double sum_b2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    sum_ab += x * y;
    sum_a += x;
    sum_b += y;
    sum_a2 += x * x;
    sum_b2 += y * y;
  }
  const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
  const double var_a = sum_a2 / n - (sum_a / n) * (sum_a / n);
  const double var_b = sum_b2 / n - (sum_b / n) * (sum_b / n);
  const double corr = cov / std::sqrt(var_a * var_b);
  EXPECT_LT(std::abs(corr), 0.02);
}

TEST(RngStream, UniformIntCoversInclusiveRange) {
  RngStream rng(9, 3);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const std::int64_t v = rng.uniform_int(3, 7);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 7);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_EQ(rng.uniform_int(4, 4), 4);
}

TEST(RngStream, SplitIsIndependentOfParentConsumption) {
  RngStream parent_a(77, 2);
  for (int i = 0; i < 10; ++i) {
    parent_a.next_u64();
  }
  RngStream child_a = parent_a.split(3);

  RngStream parent_b(77, 2);
  RngStream child_b = parent_b.split(3);

  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(child_a.next_u64(), child_b.next_u64());
  }
}

TEST(RngStream, SplitChildrenDifferFromParentAndEachOther) {
  RngStream parent(5, 0);
  RngStream c0 = parent.split(0);
  RngStream c1 = parent.split(1);
  RngStream parent_copy(5, 0);
  bool c0_differs = false;
  bool c1_differs = false;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t v0 = c0.next_u64();
    const std::uint64_t v1 = c1.next_u64();
    c0_differs |= v0 != parent_copy.next_u64();
    c1_differs |= v0 != v1;
  }
  EXPECT_TRUE(c0_differs);
  EXPECT_TRUE(c1_differs);
}

TEST(RngStream, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  RngStream rng(11, 0);
  rng.shuffle(v);

  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(sorted[i], i);
  }

  std::vector<int> w(100);
  std::iota(w.begin(), w.end(), 0);
  RngStream rng2(11, 0);
  rng2.shuffle(w);
  EXPECT_EQ(v, w);
}

TEST(RngStream, EigenHelpersHaveRequestedShapes) {
  RngStream rng(3, 1);
  const Eigen::VectorXd v = rng.normal_vector(17);
  const Eigen::MatrixXd m = rng.normal_matrix(4, 6);
  EXPECT_EQ(v.size(), 17);
  EXPECT_EQ(m.rows(), 4);
  EXPECT_EQ(m.cols(), 6);
  EXPECT_TRUE(v.allFinite());
  EXPECT_TRUE(m.allFinite());
}

}  // namespace
}  // namespace prisampler
