#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace icnn;
using icnn::testing::random_discrete;

namespace {

// Straight from the definition: group rows by comparing subset values
// pairwise, then sum n_j^2 (ybar_j - ybar)^2 over the groups.
double naive_raw(const DiscreteDataset &d, const std::vector<std::size_t> &subset) {
  const auto n = d.n();
  double ybar = 0.0;
  for (double v : d.response()) ybar += v;
  ybar /= static_cast<double>(n);
  std::vector<bool> done(n, false);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) continue;
    double count = 0.0, sum = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      bool same = true;
      for (auto c : subset) same = same && d.features()(i, c) == d.features()(j, c);
      if (same) {
        done[j] = true;
        count += 1.0;
        sum += d.response()[j];
      }
    }
    total += count * count * (sum / count - ybar) * (sum / count - ybar);
  }
  return total;
}

double naive_standardized(const DiscreteDataset &d, const std::vector<std::size_t> &subset) {
  const auto n = static_cast<double>(d.n());
  double m = 0.0;
  for (double v : d.response()) m += v;
  m /= n;
  double s2 = 0.0;
  for (double v : d.response()) s2 += (v - m) * (v - m);
  s2 /= n;
  return s2 == 0.0 ? 0.0 : naive_raw(d, subset) / (n * s2);
}

std::vector<std::size_t> random_subset(Rng &rng, std::size_t p) {
  auto all = icnn::testing::iota(p);
  rng.shuffle(std::span<std::size_t>(all));
  all.resize(1 + rng.below(std::min<std::size_t>(p, 6)));
  return all;
}

DiscreteDataset tiny(std::vector<Level> x, std::vector<double> y) {
  const auto n = x.size();
  return DiscreteDataset::binary(Matrix<Level>(n, 1, std::move(x)), std::move(y));
}

} // namespace

TEST(Partition, TwoCells) {
  auto d = tiny({0, 0, 1, 1}, {0, 1, 1, 1});
  const std::vector<std::size_t> s{0};
  auto t = build_partition(d, s);
  ASSERT_EQ(t.cells.size(), 2u);
  EXPECT_EQ(t.cells[0].key, 0u);
  EXPECT_EQ(t.cells[0].count, 2u);
  EXPECT_EQ(t.cells[1].count, 2u);
  EXPECT_DOUBLE_EQ(t.cells[1].response_sum, 2.0);
  EXPECT_EQ(t.find(1), &t.cells[1]);
  EXPECT_EQ(t.find(7), nullptr);
}

TEST(Partition, PairHasAtMostFourCells) {
  Rng rng(2);
  auto d = random_discrete(rng, 200, 2, 2);
  const std::vector<std::size_t> s{0, 1};
  EXPECT_LE(build_partition(d, s).cells.size(), 4u);
}

TEST(Partition, SingleRow) {
  auto d = tiny({1}, {1});
  const std::vector<std::size_t> s{0};
  auto t = build_partition(d, s);
  ASSERT_EQ(t.cells.size(), 1u);
  EXPECT_EQ(t.cells[0].count, 1u);
}

TEST(Partition, MixedRadixKey) {
  Matrix<Level> X(1, 3, std::vector<Level>{2, 1, 1});
  DiscreteDataset d(X, {1.0}, {3, 2, 2});
  const std::vector<std::size_t> s{0, 1, 2};
  EXPECT_EQ(build_partition(d, s).cells[0].key, 2u + 1u * 3u + 1u * 6u);
  const std::vector<std::size_t> r{2, 0};
  EXPECT_EQ(build_partition(d, r).cells[0].key, 1u + 2u * 2u);
}

TEST(Partition, Errors) {
  auto d = tiny({0, 1}, {0, 1});
  EXPECT_THROW(build_partition(d, std::vector<std::size_t>{}), DataError);
  EXPECT_THROW(build_partition(d, std::vector<std::size_t>{1}), DataError);
  Rng rng(1);
  auto wide = random_discrete(rng, 4, 30, 2);
  EXPECT_THROW(build_partition(wide, std::vector<std::size_t>{0, 0}), DataError);
  EXPECT_THROW(build_partition(wide, icnn::testing::iota(26)), DataError);
  EXPECT_NO_THROW(build_partition(wide, icnn::testing::iota(25)));
}

TEST(Iscore, HandComputed) {
  auto d = tiny({0, 0, 1, 1}, {0, 0, 1, 1});
  auto v = iscore(d, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(v.raw, 2.0);
  EXPECT_DOUBLE_EQ(v.sigma2, 0.25);
  EXPECT_DOUBLE_EQ(v.standardized, 2.0);
  EXPECT_EQ(v.n, 4u);
}

TEST(Iscore, ConstantResponseIsZero) {
  for (double c : {0.0, 1.0}) {
    auto d = tiny({0, 1, 1, 0, 1}, std::vector<double>(5, c));
    auto v = iscore(d, std::vector<std::size_t>{0});
    EXPECT_EQ(v.raw, 0.0);
    EXPECT_EQ(v.standardized, 0.0);
  }
}

TEST(Iscore, SingleCellIsZero) {
  auto d = tiny({1, 1, 1, 1}, {0, 1, 1, 0});
  EXPECT_EQ(iscore(d, std::vector<std::size_t>{0}).raw, 0.0);
}

TEST(Iscore, ParityPairBeatsSingletons) {
  // Y = X1 xor X2 over the full design, replicated
  Matrix<Level> X(8, 2, std::vector<Level>{0, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1, 1});
  auto d = DiscreteDataset::binary(X, {0, 1, 1, 0, 0, 1, 1, 0});
  EXPECT_EQ(iscore(d, std::vector<std::size_t>{0}).raw, 0.0);
  EXPECT_EQ(iscore(d, std::vector<std::size_t>{1}).raw, 0.0);
  EXPECT_DOUBLE_EQ(iscore(d, std::vector<std::size_t>{0, 1}).standardized, 2.0);
}

TEST(Iscore, MatchesNaiveOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng.below(120), p = 1 + rng.below(10);
    auto d = random_discrete(rng, n, p, 1 + static_cast<std::uint32_t>(rng.below(4)));
    auto s = random_subset(rng, p);
    const auto v = iscore(d, s);
    const double raw = naive_raw(d, s);
    EXPECT_NEAR(v.raw, raw, 1e-12 * std::max(1.0, raw));
    const double st = naive_standardized(d, s);
    EXPECT_NEAR(v.standardized, st, 1e-12 * std::max(1.0, st));
    EXPECT_GE(v.raw, 0.0);
  }
}

TEST(Iscore, SparsePathMatchesOracle) {
  // 20 binary variables: more cells than the dense table allows
  Rng rng(5);
  auto d = random_discrete(rng, 300, 20, 2);
  const auto s = icnn::testing::iota(20);
  EXPECT_NEAR(iscore(d, s).raw, naive_raw(d, s), 1e-9);
}

TEST(Iscore, RowPermutationInvariance) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto d = random_discrete(rng, 2 + rng.below(80), 5, 3);
    auto s = random_subset(rng, 5);
    auto order = icnn::testing::iota(d.n());
    rng.shuffle(std::span<std::size_t>(order));
    auto shuffled = d.subset_rows(order);
    EXPECT_NEAR(iscore(d, s).raw, iscore(shuffled, s).raw, 1e-9);
  }
}

TEST(Iscore, LevelRelabelingInvariance) {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    auto d = random_discrete(rng, 2 + rng.below(80), 4, 4);
    const std::vector<std::size_t> s{0, 1, 2, 3};
    // reverse the levels of column 0
    Matrix<Level> X = d.features();
    const auto lc = d.level_counts()[0];
    for (std::size_t i = 0; i < X.rows(); ++i) X(i, 0) = static_cast<Level>(lc - 1 - X(i, 0));
    DiscreteDataset r(X, std::vector<double>(d.response().begin(), d.response().end()),
                      std::vector<std::uint32_t>(d.level_counts().begin(), d.level_counts().end()));
    EXPECT_NEAR(iscore(d, s).raw, iscore(r, s).raw, 1e-9);
  }
}

TEST(Iscore, ZeroIffAllCellMeansEqualGlobal) {
  // balanced: every cell has mean 1/2
  auto d = tiny({0, 0, 1, 1}, {0, 1, 0, 1});
  EXPECT_EQ(iscore(d, std::vector<std::size_t>{0}).raw, 0.0);
  auto e = tiny({0, 0, 1, 1}, {0, 1, 1, 1});
  EXPECT_GT(iscore(e, std::vector<std::size_t>{0}).raw, 0.0);
}

TEST(Iscore, NullMeanBelowOne) {
  Rng rng(77);
  double total = 0.0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    auto d = random_discrete(rng, 500, 4, 2);
    total += iscore(d, icnn::testing::iota(4)).standardized;
  }
  EXPECT_LT(total / reps, 1.05);
}
