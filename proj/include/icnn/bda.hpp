#pragma once

// Backward Dropping Algorithm: greedy elimination that repeatedly removes the
// variable whose removal leaves the highest standardized I-score, keeping the
// best subset seen along the way.

#include "icnn/core.hpp"
#include "icnn/iscore.hpp"
#include "icnn/random.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace icnn {

struct BdaStep {
  std::optional<std::size_t> dropped; // empty for the initial subset
  std::vector<std::size_t> subset;
  double score = 0.0; // standardized I-score of `subset`
};

struct BdaTrace {
  std::vector<BdaStep> steps;
  std::vector<std::size_t> best_subset;
  double best_score = 0.0;
};

inline BdaTrace backward_drop(const Matrix<Level> &features,
                              std::span<const std::uint32_t> level_counts,
                              std::span<const double> response, const ResponseStats &stats,
                              std::span<const std::size_t> initial_subset) {
  auto score_of = [&](std::span<const std::size_t> s) {
    return iscore(build_partition(features, level_counts, response, s), stats).standardized;
  };

  std::vector<std::size_t> current(initial_subset.begin(), initial_subset.end());
  BdaTrace trace;
  trace.steps.push_back({std::nullopt, current, score_of(current)});

  std::vector<std::size_t> candidate;
  while (current.size() > 1) {
    std::optional<std::size_t> drop_pos;
    double drop_score = 0.0;
    for (std::size_t i = 0; i < current.size(); ++i) {
      candidate.clear();
      for (std::size_t j = 0; j < current.size(); ++j)
        if (j != i) candidate.push_back(current[j]);
      const double s = score_of(candidate);
      // Equal scores: drop the lowest feature index.
      if (!drop_pos || s > drop_score ||
          (s == drop_score && current[i] < current[*drop_pos])) {
        drop_pos = i;
        drop_score = s;
      }
    }
    const std::size_t dropped = current[*drop_pos];
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(*drop_pos));
    trace.steps.push_back({dropped, current, drop_score});
  }

  // Earliest step wins among equal scores.
  const BdaStep *best = &trace.steps.front();
  for (const auto &st : trace.steps)
    if (st.score > best->score) best = &st;
  trace.best_subset = best->subset;
  trace.best_score = best->score;
  return trace;
}

inline BdaTrace backward_drop(const DiscreteDataset &data,
                              std::span<const std::size_t> initial_subset) {
  detail::check_subset(initial_subset, data.p());
  return backward_drop(data.features(), data.level_counts(), data.response(),
                       ResponseStats(data.response()), initial_subset);
}

struct SubsetScore {
  std::vector<std::size_t> subset; // ascending feature indices
  double score = 0.0;
};

inline constexpr std::size_t kMaxExhaustiveSize = 12;

/// Scores all 2^k - 1 non-empty subsets. Ties resolve to the lexicographically
/// smallest ascending index list.
inline SubsetScore exhaustive_best_subset(const DiscreteDataset &data,
                                          std::span<const std::size_t> initial_subset) {
  detail::check_subset(initial_subset, data.p());
  if (initial_subset.size() > kMaxExhaustiveSize)
    throw DataError("exhaustive search limited to " + std::to_string(kMaxExhaustiveSize) +
                    " variables");
  std::vector<std::size_t> pool(initial_subset.begin(), initial_subset.end());
  std::sort(pool.begin(), pool.end());
  const ResponseStats stats(data.response());

  std::optional<SubsetScore> best;
  std::vector<std::size_t> s;
  for (std::uint32_t mask = 1; mask < (1u << pool.size()); ++mask) {
    s.clear();
    for (std::size_t b = 0; b < pool.size(); ++b)
      if (mask & (1u << b)) s.push_back(pool[b]);
    const double score = iscore(build_partition(data, s), stats).standardized;
    if (!best || score > best->score || (score == best->score && s < best->subset))
      best = SubsetScore{s, score};
  }
  return *best;
}

/// Seeded random-restart mode: B initial subsets of size k drawn uniformly
/// without replacement from all p variables, each reduced by backward_drop.
inline std::vector<BdaTrace> random_restart_bda(const DiscreteDataset &data, std::size_t k,
                                                std::size_t restarts, std::uint64_t seed) {
  if (k == 0 || k > data.p()) throw DataError("initial subset size must be in [1, p]");
  Rng rng(seed);
  const ResponseStats stats(data.response());
  std::vector<std::size_t> all(data.p());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;

  std::vector<BdaTrace> traces;
  traces.reserve(restarts);
  for (std::size_t b = 0; b < restarts; ++b) {
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(all.size() - i));
      std::swap(all[i], all[j]);
    }
    std::vector<std::size_t> initial(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(initial.begin(), initial.end());
    traces.push_back(backward_drop(data.features(), data.level_counts(), data.response(), stats,
                                   initial));
  }
  return traces;
}

/// Step / dropped variable / score table, 1-based variable names.
inline std::string format_trace(const BdaTrace &trace) {
  auto name_list = [](const std::vector<std::size_t> &s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ",";
      out += "X" + std::to_string(s[i] + 1);
    }
    return out + "}";
  };
  std::ostringstream os;
  os << "step,dropped,subset,iscore\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const auto &st = trace.steps[t];
    os << t << "," << (st.dropped ? "X" + std::to_string(*st.dropped + 1) : std::string("-"))
       << ",\"" << name_list(st.subset) << "\"," << st.score << "\n";
  }
  os << "best,,\"" << name_list(trace.best_subset) << "\"," << trace.best_score << "\n";
  return os.str();
}

} // namespace icnn
