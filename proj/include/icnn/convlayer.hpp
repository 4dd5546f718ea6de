#pragma once

// Interaction-based convolutional layer. Each window position runs
// backward_drop over the window's pixels; the selected subset's partition
// defines the engineered feature X†, which maps an observation to the training
// response mean of the cell it falls into.

#include "icnn/bda.hpp"
#include "icnn/core.hpp"
#include "icnn/discretize.hpp"
#include "icnn/iscore.hpp"
#include "icnn/metrics.hpp"
#include "icnn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace icnn {

struct WindowFeature {
  std::size_t window_index = 0;     // 0-based raster position
  std::vector<std::size_t> window;  // pixel indices covered
  std::vector<std::size_t> selected;
  std::vector<std::uint32_t> levels; // level count per selected variable
  std::vector<std::pair<std::uint64_t, double>> cell_means; // sorted by key
  double fallback_mean = 0.0;
  double iscore = 0.0; // standardized, of `selected`
  double auc = std::numeric_limits<double>::quiet_NaN(); // in-sample, NaN if undefined

  /// X† value for one observation; unseen cells fall back to the training mean.
  double value(std::span<const Level> row) const {
    const auto key = cell_key(row, selected, levels);
    auto it = std::lower_bound(cell_means.begin(), cell_means.end(), key,
                               [](const auto &c, std::uint64_t k) { return c.first < k; });
    return it != cell_means.end() && it->first == key ? it->second : fallback_mean;
  }
};

struct FittedConvLayer {
  GridShape input_grid;
  WindowSpec spec;
  GridShape output_grid;
  std::vector<WindowFeature> features;
};

namespace detail {
inline void check_width(std::size_t p, const GridShape &grid) {
  if (p != grid.size())
    throw DataError("dataset has " + std::to_string(p) + " features but grid " +
                    std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " needs " +
                    std::to_string(grid.size()));
}
} // namespace detail

inline FittedConvLayer fit_layer(const DiscreteDataset &data, const GridShape &grid,
                                 const WindowSpec &spec, unsigned workers = 0) {
  detail::check_width(data.p(), grid);
  FittedConvLayer layer{grid, spec, output_grid(grid, spec), {}};
  auto windows = enumerate_windows(grid, spec);
  layer.features.resize(windows.size());

  const ResponseStats stats(data.response());
  const auto &X = data.features();
  const auto y = data.response();
  bool both_classes = false;
  for (double v : y) both_classes |= v != y.front();

  parallel_for(windows.size(), workers, [&](std::size_t b) {
    auto trace = backward_drop(X, data.level_counts(), y, stats, windows[b]);
    auto table = build_partition(X, data.level_counts(), y, trace.best_subset);

    WindowFeature f;
    f.window_index = b;
    f.window = std::move(windows[b]);
    f.selected = std::move(trace.best_subset);
    f.levels = table.levels;
    f.iscore = trace.best_score;
    f.fallback_mean = stats.mean;
    f.cell_means.reserve(table.cells.size());
    for (const auto &c : table.cells) f.cell_means.emplace_back(c.key, c.mean());

    if (both_classes) {
      std::vector<double> column(data.n());
      for (std::size_t i = 0; i < data.n(); ++i) column[i] = f.value(X.row(i));
      f.auc = auc(y, column);
    }
    layer.features[b] = std::move(f);
  });
  return layer;
}

inline Matrix<double> transform(const FittedConvLayer &layer, const Matrix<Level> &features,
                                 unsigned workers = 0) {
  detail::check_width(features.cols(), layer.input_grid);
  Matrix<double> out(features.rows(), layer.features.size());
  parallel_for(features.rows(), workers, [&](std::size_t i) {
    const auto row = features.row(i);
    auto dst = out.row(i);
    for (std::size_t b = 0; b < layer.features.size(); ++b) dst[b] = layer.features[b].value(row);
  });
  return out;
}

inline RealDataset transform(const FittedConvLayer &layer, const DiscreteDataset &data,
                             unsigned workers = 0) {
  return {transform(layer, data.features(), workers),
          std::vector<double>(data.response().begin(), data.response().end())};
}

/// The transformed row reshaped onto the layer's output grid.
inline Matrix<double> export_feature_map(const FittedConvLayer &layer, const DiscreteDataset &data,
                                         std::size_t row) {
  if (row >= data.n())
    throw DataError("row " + std::to_string(row + 1) + " out of range (n=" +
                    std::to_string(data.n()) + ")");
  detail::check_width(data.p(), layer.input_grid);
  Matrix<double> map(layer.output_grid.rows, layer.output_grid.cols);
  const auto r = data.features().row(row);
  for (std::size_t b = 0; b < layer.features.size(); ++b) map.data()[b] = layer.features[b].value(r);
  return map;
}

/// Stacked layers. Between consecutive layers the real-valued X† outputs are
/// re-binarized with a discretizer fitted on the training outputs.
struct LayerStack {
  std::vector<FittedConvLayer> layers;
  std::vector<Discretizer> between; // between[i] feeds layers[i + 1]

  GridShape input_grid() const { return layers.front().input_grid; }

  /// Output of every layer for the given observations.
  std::vector<Matrix<double>> transform_all(const Matrix<Level> &features,
                                            unsigned workers = 0) const {
    std::vector<Matrix<double>> outs;
    outs.reserve(layers.size());
    Matrix<Level> current = features;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      outs.push_back(transform(layers[i], current, workers));
      if (i + 1 < layers.size()) current = apply_discretizer(between[i], outs.back());
    }
    return outs;
  }
};

/// Output grids of the chain; throws GeometryError before any work is done.
inline std::vector<GridShape> validate_geometry_chain(const GridShape &grid,
                                                      std::span<const WindowSpec> specs) {
  if (specs.empty()) throw ConfigError("at least one layer spec is required");
  if (grid.rows == 0 || grid.cols == 0) throw GeometryError("grid must be non-empty");
  std::vector<GridShape> grids;
  GridShape g = grid;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      g = output_grid(g, specs[i]);
    } catch (const GeometryError &e) {
      throw GeometryError("layer " + std::to_string(i + 1) + ": " + e.what());
    }
    grids.push_back(g);
  }
  return grids;
}

inline LayerStack stack_layers(const DiscreteDataset &data, const GridShape &grid,
                               std::span<const WindowSpec> specs,
                               const DiscretizeParams &rediscretize = {}, unsigned workers = 0) {
  const auto grids = validate_geometry_chain(grid, specs);
  detail::check_width(data.p(), grid);

  LayerStack stack;
  DiscreteDataset current = data;
  GridShape g = grid;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    stack.layers.push_back(fit_layer(current, g, specs[i], workers));
    g = grids[i];
    if (i + 1 < specs.size()) {
      auto out = transform(stack.layers.back(), current.features(), workers);
      stack.between.push_back(fit_discretizer(out, rediscretize));
      current = DiscreteDataset::binary(apply_discretizer(stack.between.back(), out),
                                        std::vector<double>(data.response().begin(),
                                                            data.response().end()));
    }
  }
  return stack;
}

} // namespace icnn
