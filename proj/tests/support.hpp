#pragma once

// Small generators shared by the unit tests.

#include "icnn/icnn.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace icnn::testing {

inline DiscreteDataset random_discrete(Rng &rng, std::size_t n, std::size_t p,
                                       std::uint32_t max_levels = 2) {
  std::vector<std::uint32_t> levels(p);
  for (auto &l : levels) l = 1 + static_cast<std::uint32_t>(rng.below(max_levels));
  Matrix<Level> X(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) X(i, j) = static_cast<Level>(rng.below(levels[j]));
  std::vector<double> y(n);
  for (auto &v : y) v = rng.bernoulli_half() ? 1.0 : 0.0;
  return {std::move(X), std::move(y), std::move(levels)};
}

/// Fresh rows drawn with the same declared level counts as `like`.
inline DiscreteDataset random_like(Rng &rng, std::size_t n, const DiscreteDataset &like) {
  Matrix<Level> X(n, like.p());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < like.p(); ++j)
      X(i, j) = static_cast<Level>(rng.below(like.level_counts()[j]));
  std::vector<double> y(n);
  for (auto &v : y) v = rng.bernoulli_half() ? 1.0 : 0.0;
  return {std::move(X), std::move(y),
          std::vector<std::uint32_t>(like.level_counts().begin(), like.level_counts().end())};
}

inline std::vector<double> random_labels(Rng &rng, std::size_t n) {
  std::vector<double> y(n);
  for (auto &v : y) v = rng.bernoulli_half() ? 1.0 : 0.0;
  return y;
}

inline bool has_both(const std::vector<double> &y) {
  return std::count(y.begin(), y.end(), 1.0) > 0 && std::count(y.begin(), y.end(), 0.0) > 0;
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

} // namespace icnn::testing
