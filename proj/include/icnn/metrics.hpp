#pragma once

// Sensitivity, specificity, ROC and AUC. An observation is classified
// positive when its score is strictly greater than the threshold.

#include "icnn/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace icnn {

struct RocPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points; // thresholds strictly decreasing
  double auc = 0.0;
};

namespace detail {
inline void check_scores(std::span<const double> y, std::span<const double> scores) {
  if (y.size() != scores.size()) throw MetricError("labels and scores differ in length");
  for (double v : y)
    if (v != 0.0 && v != 1.0) throw MetricError("labels must be 0 or 1");
  for (double s : scores)
    if (!std::isfinite(s)) throw MetricError("non-finite score");
}
} // namespace detail

inline double sensitivity(std::span<const double> y, std::span<const double> scores, double t) {
  detail::check_scores(y, scores);
  std::size_t pos = 0, tp = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1.0) continue;
    ++pos;
    if (scores[i] > t) ++tp;
  }
  if (pos == 0) throw MetricError("sensitivity undefined: no positive labels");
  return static_cast<double>(tp) / static_cast<double>(pos);
}

inline double specificity(std::span<const double> y, std::span<const double> scores, double t) {
  detail::check_scores(y, scores);
  std::size_t neg = 0, tn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) continue;
    ++neg;
    if (!(scores[i] > t)) ++tn;
  }
  if (neg == 0) throw MetricError("specificity undefined: no negative labels");
  return static_cast<double>(tn) / static_cast<double>(neg);
}

/// Exact step ROC. Thresholds are a sentinel above the maximum, every distinct
/// score in decreasing order, and a sentinel below the minimum; AUC is the
/// trapezoidal area in (1 - specificity, sensitivity) space.
inline RocCurve roc_curve(std::span<const double> y, std::span<const double> scores) {
  detail::check_scores(y, scores);
  std::size_t pos = 0;
  for (double v : y) pos += v == 1.0;
  const std::size_t neg = y.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("ROC needs both classes present");

  std::vector<std::size_t> order(y.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double hi = scores[order.front()];
  const double lo = scores[order.back()];
  const double P = static_cast<double>(pos), N = static_cast<double>(neg);

  RocCurve roc;
  roc.points.push_back({hi + std::max(1.0, std::abs(hi)), 0.0, 1.0});
  // Walking down the sorted scores: at threshold = v, everything strictly above
  // v is positive.
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double v = scores[order[i]];
    roc.points.push_back({v, tp / P, (N - fp) / N});
    while (i < order.size() && scores[order[i]] == v) {
      if (y[order[i]] == 1.0) ++tp;
      else ++fp;
      ++i;
    }
  }
  roc.points.push_back({lo - std::max(1.0, std::abs(lo)), 1.0, 0.0});

  double area = 0.0;
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    const auto &a = roc.points[k - 1];
    const auto &b = roc.points[k];
    const double dx = (1.0 - b.specificity) - (1.0 - a.specificity);
    area += dx * 0.5 * (a.sensitivity + b.sensitivity);
  }
  roc.auc = area;
  return roc;
}

inline double auc(std::span<const double> y, std::span<const double> scores) {
  return roc_curve(y, scores).auc;
}

inline std::string roc_to_csv(const RocCurve &roc) {
  std::ostringstream os;
  os.precision(17);
  os << "threshold,sensitivity,specificity\n";
  for (const auto &p : roc.points)
    os << p.threshold << "," << p.sensitivity << "," << p.specificity << "\n";
  return os.str();
}

} // namespace icnn
