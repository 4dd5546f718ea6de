#pragma once

// Parity-mixture benchmark: features i.i.d. Bernoulli(1/2); per row one module
// is drawn from the mixing distribution and the response is the parity of that
// module's features.

#include "icnn/core.hpp"
#include "icnn/random.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace icnn {

struct ParityModule {
  std::vector<std::size_t> features; // 0-based
  double probability = 0.0;
};

struct ParityModelSpec {
  std::size_t p = 36;
  std::size_t n_train = 500;
  std::size_t n_test = 10000;
  std::vector<ParityModule> modules = {{{0, 1}, 0.5}, {{2, 3, 4}, 0.5}};
  std::uint64_t seed = 1;
};

inline void validate(const ParityModelSpec &s) {
  if (s.p == 0) throw ConfigError("feature count must be positive");
  if (s.modules.empty()) throw ConfigError("at least one parity module is required");
  double total = 0.0;
  for (const auto &m : s.modules) {
    if (m.features.empty()) throw ConfigError("parity module has no features");
    for (auto f : m.features)
      if (f >= s.p) throw ConfigError("module feature X" + std::to_string(f + 1) + " out of range");
    if (!(m.probability >= 0.0)) throw ConfigError("mixing probability must be non-negative");
    total += m.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixing probabilities must sum to 1");
}

namespace detail {
inline DiscreteDataset draw_parity(const ParityModelSpec &s, std::size_t n, Rng &rng) {
  Matrix<Level> X(n, s.p);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = X.row(i);
    for (auto &v : row) v = rng.bernoulli_half() ? 1 : 0;
    const double u = rng.uniform();
    std::size_t chosen = s.modules.size() - 1;
    double acc = 0.0;
    for (std::size_t m = 0; m < s.modules.size(); ++m) {
      acc += s.modules[m].probability;
      if (u < acc) {
        chosen = m;
        break;
      }
    }
    unsigned parity = 0;
    for (auto f : s.modules[chosen].features) parity ^= row[f];
    y[i] = parity;
  }
  return DiscreteDataset::binary(std::move(X), std::move(y));
}
} // namespace detail

struct SyntheticSplit {
  DiscreteDataset train;
  DiscreteDataset test;
};

/// Training rows are drawn first, then test rows, from one seeded stream.
inline SyntheticSplit generate(const ParityModelSpec &s) {
  validate(s);
  if (s.n_train == 0 || s.n_test == 0) throw ConfigError("row counts must be positive");
  Rng rng(s.seed);
  auto train = detail::draw_parity(s, s.n_train, rng);
  auto test = detail::draw_parity(s, s.n_test, rng);
  return {std::move(train), std::move(test)};
}

/// Probability that module `index`'s parity equals Y: the module is right
/// whenever it generated Y, and right half the time otherwise.
inline double theoretical_rate(const ParityModelSpec &s, std::size_t index) {
  validate(s);
  if (index >= s.modules.size()) throw ConfigError("no parity module " + std::to_string(index + 1));
  double rate = 0.0;
  for (std::size_t m = 0; m < s.modules.size(); ++m)
    rate += s.modules[m].probability * (m == index ? 1.0 : 0.5);
  return rate;
}

} // namespace icnn
