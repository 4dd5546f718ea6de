#pragma once

// Influence score (I-score) of a variable subset over the partition it induces:
//   I = sum_j n_j^2 (Ybar_j - Ybar)^2,   standardized I / (n sigma^2).

#include "icnn/core.hpp"

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace icnn {

inline constexpr std::size_t kMaxSubsetSize = 25;

struct PartitionCell {
  std::uint64_t key = 0;
  std::size_t count = 0;
  double response_sum = 0.0;

  double mean() const noexcept { return response_sum / static_cast<double>(count); }
};

/// Occupied cells of the partition induced by `subset`, sorted by key. The key
/// is the mixed-radix code sum_m level_m * radix_m, radix_0 = 1 and
/// radix_{m+1} = radix_m * level_count(subset[m]).
struct PartitionTable {
  std::vector<std::size_t> subset;
  std::vector<std::uint32_t> levels; // level count of each subset variable
  std::vector<PartitionCell> cells;

  const PartitionCell *find(std::uint64_t key) const {
    auto it = std::lower_bound(cells.begin(), cells.end(), key,
                               [](const PartitionCell &c, std::uint64_t k) { return c.key < k; });
    return it != cells.end() && it->key == key ? &*it : nullptr;
  }
};

struct IscoreValue {
  double raw = 0.0;
  double standardized = 0.0;
  std::size_t n = 0;
  double sigma2 = 0.0;
};

/// Global mean and population variance of a response vector.
struct ResponseStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sigma2 = 0.0;

  explicit ResponseStats(std::span<const double> y) : n(y.size()) {
    if (n == 0) return;
    double s = 0.0;
    for (double v : y) s += v;
    mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    sigma2 = ss / static_cast<double>(n);
  }
};

namespace detail {

inline void check_subset(std::span<const std::size_t> subset, std::size_t p) {
  if (subset.empty()) throw DataError("variable subset is empty");
  if (subset.size() > kMaxSubsetSize)
    throw DataError("variable subset of size " + std::to_string(subset.size()) +
                    " exceeds the limit of " + std::to_string(kMaxSubsetSize));
  for (std::size_t a = 0; a < subset.size(); ++a) {
    if (subset[a] >= p)
      throw DataError("feature index " + std::to_string(subset[a] + 1) + " out of range");
    for (std::size_t b = a + 1; b < subset.size(); ++b)
      if (subset[a] == subset[b])
        throw DataError("duplicate feature index " + std::to_string(subset[a] + 1));
  }
}

// Returns the number of cells, or 0 if it does not fit in 64 bits.
inline std::uint64_t cell_space(std::span<const std::uint32_t> levels) {
  std::uint64_t total = 1;
  for (auto lc : levels) {
    if (total > UINT64_MAX / lc) return 0;
    total *= lc;
  }
  return total;
}

} // namespace detail

/// Mixed-radix cell key of one observation.
inline std::uint64_t cell_key(std::span<const Level> row, std::span<const std::size_t> subset,
                              std::span<const std::uint32_t> levels) {
  std::uint64_t key = 0;
  std::uint64_t radix = 1;
  for (std::size_t m = 0; m < subset.size(); ++m) {
    key += row[subset[m]] * radix;
    radix *= levels[m];
  }
  return key;
}

/// Single pass over the rows; works for any real-valued response.
inline PartitionTable build_partition(const Matrix<Level> &features,
                                      std::span<const std::uint32_t> level_counts,
                                      std::span<const double> response,
                                      std::span<const std::size_t> subset) {
  detail::check_subset(subset, features.cols());
  if (response.size() != features.rows()) throw DataError("response length mismatch");

  PartitionTable table;
  table.subset.assign(subset.begin(), subset.end());
  table.levels.reserve(subset.size());
  for (auto s : subset) table.levels.push_back(level_counts[s]);
  const std::uint64_t space = detail::cell_space(table.levels);
  if (space == 0) throw DataError("partition cell space overflows a 64-bit key");

  constexpr std::uint64_t kDenseLimit = 1u << 16;
  if (space <= kDenseLimit) {
    std::vector<std::size_t> counts(space, 0);
    std::vector<double> sums(space, 0.0);
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const auto k = cell_key(features.row(i), subset, table.levels);
      ++counts[k];
      sums[k] += response[i];
    }
    for (std::uint64_t k = 0; k < space; ++k)
      if (counts[k] != 0) table.cells.push_back({k, counts[k], sums[k]});
    return table;
  }

  std::unordered_map<std::uint64_t, std::size_t> slot;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto k = cell_key(features.row(i), subset, table.levels);
    auto [it, inserted] = slot.try_emplace(k, table.cells.size());
    if (inserted) table.cells.push_back({k, 0, 0.0});
    auto &cell = table.cells[it->second];
    ++cell.count;
    cell.response_sum += response[i];
  }
  std::sort(table.cells.begin(), table.cells.end(),
            [](const PartitionCell &a, const PartitionCell &b) { return a.key < b.key; });
  return table;
}

inline PartitionTable build_partition(const DiscreteDataset &data,
                                      std::span<const std::size_t> subset) {
  return build_partition(data.features(), data.level_counts(), data.response(), subset);
}

/// I-score of a built partition. Cells are visited in key order, so the
/// floating-point result is reproducible.
inline IscoreValue iscore(const PartitionTable &table, const ResponseStats &stats) {
  IscoreValue v;
  v.n = stats.n;
  v.sigma2 = stats.sigma2;
  if (stats.sigma2 <= 0.0) return v;
  for (const auto &c : table.cells) {
    // n_j^2 (s_j/n_j - Ybar)^2 == (s_j - n_j Ybar)^2
    const double dev = c.response_sum - static_cast<double>(c.count) * stats.mean;
    v.raw += dev * dev;
  }
  v.standardized = v.raw / (static_cast<double>(stats.n) * stats.sigma2);
  return v;
}

inline IscoreValue iscore(const DiscreteDataset &data, std::span<const std::size_t> subset) {
  return iscore(build_partition(data, subset), ResponseStats(data.response()));
}

inline IscoreValue iscore(const Matrix<Level> &features,
                          std::span<const std::uint32_t> level_counts,
                          std::span<const double> response, std::span<const std::size_t> subset) {
  return iscore(build_partition(features, level_counts, response, subset),
                ResponseStats(response));
}

} // namespace icnn
