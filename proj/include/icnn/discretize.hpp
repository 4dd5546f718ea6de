#pragma once

#include "icnn/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace icnn {

enum class DiscretizeMethod { GlobalThreshold, PerFeatureMedian, PerFeatureQuantile };

inline std::string to_string(DiscretizeMethod m) {
  switch (m) {
  case DiscretizeMethod::GlobalThreshold: return "threshold";
  case DiscretizeMethod::PerFeatureMedian: return "median";
  case DiscretizeMethod::PerFeatureQuantile: return "quantile";
  }
  return "?";
}

inline DiscretizeMethod parse_discretize_method(const std::string &s) {
  if (s == "threshold" || s == "global-threshold") return DiscretizeMethod::GlobalThreshold;
  if (s == "median" || s == "per-feature-median") return DiscretizeMethod::PerFeatureMedian;
  if (s == "quantile" || s == "per-feature-quantile") return DiscretizeMethod::PerFeatureQuantile;
  throw ConfigError("unknown discretizer method '" + s + "'");
}

struct DiscretizeParams {
  DiscretizeMethod method = DiscretizeMethod::PerFeatureMedian;
  double threshold = 0.5; // GlobalThreshold
  double quantile = 0.5;  // PerFeatureQuantile
};

/// Per-column binarization cutoffs; level = value > threshold.
struct Discretizer {
  DiscretizeParams params;
  std::vector<double> thresholds;

  std::size_t width() const noexcept { return thresholds.size(); }
};

namespace detail {
// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double sorted_quantile(const std::vector<double> &sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
} // namespace detail

inline Discretizer fit_discretizer(const Matrix<double> &features, const DiscretizeParams &params) {
  if (features.rows() == 0) throw DataError("cannot fit a discretizer on zero rows");
  if (params.method == DiscretizeMethod::PerFeatureQuantile &&
      !(params.quantile > 0.0 && params.quantile < 1.0))
    throw ConfigError("quantile must lie strictly inside (0, 1)");
  if (params.method == DiscretizeMethod::GlobalThreshold && !std::isfinite(params.threshold))
    throw ConfigError("threshold must be finite");

  Discretizer d{params, std::vector<double>(features.cols())};
  if (params.method == DiscretizeMethod::GlobalThreshold) {
    std::fill(d.thresholds.begin(), d.thresholds.end(), params.threshold);
    return d;
  }
  const double q = params.method == DiscretizeMethod::PerFeatureMedian ? 0.5 : params.quantile;
  std::vector<double> column(features.rows());
  for (std::size_t j = 0; j < features.cols(); ++j) {
    for (std::size_t i = 0; i < features.rows(); ++i) column[i] = features(i, j);
    std::sort(column.begin(), column.end());
    d.thresholds[j] = detail::sorted_quantile(column, q);
  }
  return d;
}

inline Discretizer fit_discretizer(const RealDataset &data, const DiscretizeParams &params) {
  return fit_discretizer(data.features(), params);
}

inline Matrix<Level> apply_discretizer(const Discretizer &d, const Matrix<double> &features) {
  if (features.cols() != d.width())
    throw DataError("discretizer fitted on " + std::to_string(d.width()) + " columns, got " +
                    std::to_string(features.cols()));
  Matrix<Level> out(features.rows(), features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < features.cols(); ++j)
      out(i, j) = features(i, j) > d.thresholds[j] ? 1 : 0;
  return out;
}

inline DiscreteDataset apply_discretizer(const Discretizer &d, const RealDataset &data) {
  auto response = std::vector<double>(data.response().begin(), data.response().end());
  return DiscreteDataset::binary(apply_discretizer(d, data.features()), std::move(response));
}

} // namespace icnn
