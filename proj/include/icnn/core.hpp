#pragma once

// Shared domain types: dense matrices, discrete/real datasets, image grids
// and the sliding-window geometry used by the interaction-based conv layers.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace icnn {

// Error taxonomy. The CLI maps these onto exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeometryError : ConfigError {
  using ConfigError::ConfigError;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MetricError : DataError {
  using DataError::DataError;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Row-major dense matrix.
template <typename T> class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("matrix data size does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T &operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T &operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<T> &data() const noexcept { return data_; }
  std::vector<T> &data() noexcept { return data_; }

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Level = std::uint8_t;

/// n observations of p discrete features plus a binary response.
class DiscreteDataset {
public:
  DiscreteDataset() = default;
  DiscreteDataset(Matrix<Level> features, std::vector<double> response,
                  std::vector<std::uint32_t> level_counts)
      : features_(std::move(features)), response_(std::move(response)),
        level_counts_(std::move(level_counts)) {
    validate();
  }
  /// All columns binary.
  static DiscreteDataset binary(Matrix<Level> features, std::vector<double> response) {
    std::vector<std::uint32_t> levels(features.cols(), 2u);
    return {std::move(features), std::move(response), std::move(levels)};
  }

  std::size_t n() const noexcept { return features_.rows(); }
  std::size_t p() const noexcept { return features_.cols(); }
  const Matrix<Level> &features() const noexcept { return features_; }
  std::span<const double> response() const noexcept { return response_; }
  std::span<const std::uint32_t> level_counts() const noexcept { return level_counts_; }

  /// Rows selected by index, in the given order.
  DiscreteDataset subset_rows(std::span<const std::size_t> rows) const {
    Matrix<Level> f(rows.size(), p());
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = features_.row(rows[i]);
      std::copy(src.begin(), src.end(), f.row(i).begin());
      y[i] = response_[rows[i]];
    }
    return {std::move(f), std::move(y), level_counts_};
  }

private:
  void validate() const {
    if (features_.rows() == 0 || features_.cols() == 0)
      throw DataError("dataset needs at least one row and one column");
    if (response_.size() != features_.rows())
      throw DataError("response length does not match row count");
    if (level_counts_.size() != features_.cols())
      throw DataError("level_counts length does not match column count");
    for (auto lc : level_counts_)
      if (lc == 0 || lc > 256) throw DataError("level count must be in [1, 256]");
    for (std::size_t i = 0; i < features_.rows(); ++i) {
      auto r = features_.row(i);
      for (std::size_t j = 0; j < r.size(); ++j)
        if (r[j] >= level_counts_[j])
          throw DataError("feature level out of range in column " + std::to_string(j + 1));
    }
    for (double y : response_)
      if (y != 0.0 && y != 1.0) throw DataError("response must contain only 0 and 1");
  }

  Matrix<Level> features_;
  std::vector<double> response_;
  std::vector<std::uint32_t> level_counts_;
};

/// n observations of p real features plus a binary response.
class RealDataset {
public:
  RealDataset() = default;
  RealDataset(Matrix<double> features, std::vector<double> response)
      : features_(std::move(features)), response_(std::move(response)) {
    if (response_.size() != features_.rows())
      throw DataError("response length does not match row count");
    for (double v : features_.data())
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    for (double y : response_)
      if (y != 0.0 && y != 1.0) throw DataError("response must contain only 0 and 1");
  }

  std::size_t n() const noexcept { return features_.rows(); }
  std::size_t p() const noexcept { return features_.cols(); }
  const Matrix<double> &features() const noexcept { return features_; }
  std::span<const double> response() const noexcept { return response_; }

private:
  Matrix<double> features_;
  std::vector<double> response_;
};

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const GridShape &, const GridShape &) = default;
};

/// Square w x w window moved with stride l, starting at 1-based pixel (p, p).
struct WindowSpec {
  std::size_t window = 2;
  std::size_t stride = 1;
  std::size_t start = 1;

  friend bool operator==(const WindowSpec &, const WindowSpec &) = default;
};

inline std::string to_string(const WindowSpec &s) {
  return "w=" + std::to_string(s.window) + " l=" + std::to_string(s.stride) +
         " p=" + std::to_string(s.start);
}

/// floor((s_in - p - w + 1) / l + 1) along one axis.
inline std::size_t output_dim(std::size_t s_in, const WindowSpec &spec) {
  if (spec.window == 0 || spec.stride == 0 || spec.start == 0)
    throw GeometryError("window, stride and start must be positive (" + to_string(spec) + ")");
  if (s_in < spec.start + spec.window - 1)
    throw GeometryError("window does not fit: input side " + std::to_string(s_in) + " with " +
                        to_string(spec));
  return (s_in - spec.start - spec.window + 1) / spec.stride + 1;
}

inline GridShape output_grid(const GridShape &in, const WindowSpec &spec) {
  return {output_dim(in.rows, spec), output_dim(in.cols, spec)};
}

/// Flat 0-based feature indices of every window, in raster order of the
/// window's top-left corner; indices inside a window are row-major.
inline std::vector<std::vector<std::size_t>> enumerate_windows(const GridShape &grid,
                                                               const WindowSpec &spec) {
  const GridShape out = output_grid(grid, spec);
  std::vector<std::vector<std::size_t>> windows;
  windows.reserve(out.size());
  for (std::size_t br = 0; br < out.rows; ++br) {
    for (std::size_t bc = 0; bc < out.cols; ++bc) {
      const std::size_t r0 = spec.start - 1 + br * spec.stride;
      const std::size_t c0 = spec.start - 1 + bc * spec.stride;
      std::vector<std::size_t> idx;
      idx.reserve(spec.window * spec.window);
      for (std::size_t i = 0; i < spec.window; ++i)
        for (std::size_t j = 0; j < spec.window; ++j)
          idx.push_back((r0 + i) * grid.cols + (c0 + j));
      windows.push_back(std::move(idx));
    }
  }
  return windows;
}

/// 1-based output-grid position (row, col) of 1-based window number b.
inline std::pair<std::size_t, std::size_t> window_position(std::size_t b, std::size_t out_cols) {
  return {(b - 1) / out_cols + 1, (b - 1) % out_cols + 1};
}

} // namespace icnn
