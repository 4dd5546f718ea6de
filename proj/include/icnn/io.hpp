#pragma once

// Image and dataset ingestion: PGM (P5/P2), CSV pixel matrices, dataset CSV
// (header X1..Xp,Y), manifests, plus train/test splitting and Gaussian-noise
// augmentation of image sets.

#include "icnn/core.hpp"
#include "icnn/random.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace icnn {

namespace fs = std::filesystem;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, const std::string &where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError(where + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s, const std::string &where) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError(where + ": cannot parse integer '" + std::string(s) + "'");
  return v;
}

inline std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path &path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

} // namespace detail

// ---------------------------------------------------------------------------
// PGM

/// Reads an 8-bit P5 or P2 image; intensities are scaled by 1/255.
inline Matrix<double> read_pgm(const fs::path &path) {
  const std::string bytes = detail::read_file(path);
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto next_token = [&]() -> std::string_view {
    skip_ws();
    const std::size_t s = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (s == pos) throw DataError(path.string() + ": truncated PGM header");
    return std::string_view(bytes).substr(s, pos - s);
  };
  const std::string where = path.string();
  const auto magic = next_token();
  if (magic != "P5" && magic != "P2") throw DataError(where + ": not a P5/P2 PGM file");
  const auto width = detail::parse_int(next_token(), where);
  const auto height = detail::parse_int(next_token(), where);
  const auto maxval = detail::parse_int(next_token(), where);
  if (width <= 0 || height <= 0) throw DataError(where + ": bad PGM dimensions");
  if (maxval <= 0 || maxval > 255) throw DataError(where + ": only 8-bit PGM is supported");

  Matrix<double> img(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
  auto &px = img.data();
  if (magic == "P5") {
    ++pos; // single whitespace after maxval
    if (bytes.size() < pos + px.size()) throw DataError(where + ": truncated PGM raster");
    for (std::size_t i = 0; i < px.size(); ++i)
      px[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  } else {
    for (auto &v : px) {
      const auto g = detail::parse_int(next_token(), where);
      if (g < 0 || g > maxval) throw DataError(where + ": pixel value out of range");
      v = static_cast<double>(g) / 255.0;
    }
  }
  return img;
}

/// Gray level of an intensity in [0, 1]: round(v * 255), halves rounded up.
inline unsigned char to_gray(double v) {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<unsigned char>(scaled);
}

inline void write_pgm(const fs::path &path, const Matrix<double> &img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) +
                    "\n255\n";
  for (double v : img.data()) out.push_back(static_cast<char>(to_gray(v)));
  detail::write_file(path, out);
}

/// Plain-text matrix, one row per line, comma separated.
inline std::string matrix_to_text(const Matrix<double> &m) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
    os << "\n";
  }
  return os.str();
}

/// CSV pixel matrix with values in [0, 255]; scaled by 1/255.
inline Matrix<double> read_csv_image(const fs::path &path) {
  const std::string text = detail::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (rows == 0) cols = cells.size();
    else if (cells.size() != cols)
      throw DataError(path.string() + ": ragged CSV image at line " + std::to_string(rows + 1));
    for (auto c : cells) {
      const double v = detail::parse_double(c, path.string());
      if (v < 0.0 || v > 255.0) throw DataError(path.string() + ": pixel outside [0, 255]");
      values.push_back(v / 255.0);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path.string() + ": empty CSV image");
  return {rows, cols, std::move(values)};
}

inline Matrix<double> read_image(const fs::path &path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv" || ext == ".txt") return read_csv_image(path);
  return read_pgm(path);
}

// ---------------------------------------------------------------------------
// Dataset CSV: header X1..Xp,Y

inline RealDataset read_dataset_csv(const fs::path &path) {
  const std::string text = detail::read_file(path);
  std::istringstream in(text);
  std::string line;
  const std::string where = path.string();
  if (!std::getline(in, line)) throw DataError(where + ": empty dataset file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "Y")
    throw DataError(where + ": header must be X1..Xp,Y");
  const std::size_t p = header.size() - 1;
  std::vector<double> feats, y;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != p + 1)
      throw DataError(where + ": line " + std::to_string(lineno) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(p + 1));
    for (std::size_t j = 0; j < p; ++j) feats.push_back(detail::parse_double(cells[j], where));
    y.push_back(detail::parse_double(cells[p], where));
  }
  if (y.empty()) throw DataError(where + ": dataset has no rows");
  const std::size_t n = y.size();
  return {Matrix<double>(n, p, std::move(feats)), std::move(y)};
}

/// Integer-valued dataset CSV; level counts are max(level)+1, at least 2.
inline DiscreteDataset read_discrete_dataset_csv(const fs::path &path) {
  const auto real = read_dataset_csv(path);
  Matrix<Level> X(real.n(), real.p());
  std::vector<std::uint32_t> levels(real.p(), 2u);
  for (std::size_t i = 0; i < real.n(); ++i)
    for (std::size_t j = 0; j < real.p(); ++j) {
      const double v = real.features()(i, j);
      if (v < 0.0 || v > 255.0 || v != std::floor(v))
        throw DataError(path.string() + ": feature values must be integers in [0, 255]");
      X(i, j) = static_cast<Level>(v);
      levels[j] = std::max<std::uint32_t>(levels[j], static_cast<std::uint32_t>(v) + 1);
    }
  return {std::move(X), std::vector<double>(real.response().begin(), real.response().end()),
          std::move(levels)};
}

inline std::string dataset_header(std::size_t p) {
  std::string h;
  for (std::size_t j = 0; j < p; ++j) h += "X" + std::to_string(j + 1) + ",";
  return h + "Y\n";
}

inline void write_dataset_csv(const fs::path &path, const DiscreteDataset &d) {
  std::string out = dataset_header(d.p());
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (auto v : d.features().row(i)) {
      out += std::to_string(static_cast<unsigned>(v));
      out += ',';
    }
    out += d.response()[i] == 1.0 ? "1\n" : "0\n";
  }
  detail::write_file(path, out);
}

inline void write_dataset_csv(const fs::path &path, const RealDataset &d) {
  std::ostringstream os;
  os.precision(17);
  os << dataset_header(d.p());
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (double v : d.features().row(i)) os << v << ",";
    os << (d.response()[i] == 1.0 ? 1 : 0) << "\n";
  }
  detail::write_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Image sets

struct LabeledImage {
  Matrix<double> pixels; // intensities in [0, 1]
  int label = 0;
  std::string source;
};

struct ImageSet {
  std::vector<LabeledImage> images;
  GridShape grid;

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count_if(
        images.begin(), images.end(), [&](const LabeledImage &im) { return im.label == label; }));
  }

  /// Pixels flattened row-major, one observation per image.
  RealDataset to_dataset() const {
    Matrix<double> X(images.size(), grid.size());
    std::vector<double> y(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto &px = images[i].pixels.data();
      std::copy(px.begin(), px.end(), X.row(i).begin());
      y[i] = images[i].label;
    }
    return {std::move(X), std::move(y)};
  }
};

struct ManifestEntry {
  std::string path;
  int label = 0;
};

/// CSV of path,label; an optional header line "path,label" is skipped.
inline std::vector<ManifestEntry> read_manifest(const fs::path &path) {
  const std::string text = detail::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<ManifestEntry> entries;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2)
      throw DataError(path.string() + ": line " + std::to_string(lineno) + " needs path,label");
    if (lineno == 1 && cells[0] == "path") continue;
    const auto label = detail::parse_int(cells[1], path.string());
    if (label != 0 && label != 1)
      throw DataError(path.string() + ": label " + std::string(cells[1]) + " outside {0,1}");
    entries.push_back({std::string(cells[0]), static_cast<int>(label)});
  }
  return entries;
}

inline void write_manifest(const fs::path &path, const std::vector<ManifestEntry> &entries) {
  std::string out = "path,label\n";
  for (const auto &e : entries) out += e.path + "," + std::to_string(e.label) + "\n";
  detail::write_file(path, out);
}

/// Paths in the manifest are resolved against `directory`. All images must
/// share one size; nothing is resampled.
inline ImageSet load_images(const fs::path &directory, const std::vector<ManifestEntry> &manifest) {
  if (manifest.empty()) throw DataError("manifest lists no images");
  ImageSet set;
  for (const auto &e : manifest) {
    const fs::path p = fs::path(e.path).is_absolute() ? fs::path(e.path) : directory / e.path;
    auto px = read_image(p);
    if (set.images.empty()) {
      set.grid = {px.rows(), px.cols()};
    } else if (px.rows() != set.grid.rows || px.cols() != set.grid.cols) {
      throw DataError("dimension mismatch: " + p.string() + " is " + std::to_string(px.rows()) +
                      "x" + std::to_string(px.cols()) + ", expected " +
                      std::to_string(set.grid.rows) + "x" + std::to_string(set.grid.cols));
    }
    set.images.push_back({std::move(px), e.label, e.path});
  }
  return set;
}

inline ImageSet load_images(const fs::path &manifest_path) {
  return load_images(manifest_path.parent_path(), read_manifest(manifest_path));
}

struct ImageSplit {
  ImageSet insample;
  ImageSet test;
};

/// Per class, test_per_class images drawn uniformly without replacement go to
/// the test set; the rest stay in-sample. Original order is kept within each.
inline ImageSplit split(const ImageSet &set, std::size_t test_per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<bool> to_test(set.images.size(), false);
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < set.images.size(); ++i)
      if (set.images[i].label == label) members.push_back(i);
    if (members.size() < test_per_class)
      throw DataError("class " + std::to_string(label) + " has " +
                      std::to_string(members.size()) + " images, fewer than test_per_class=" +
                      std::to_string(test_per_class));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t k = 0; k < test_per_class; ++k) to_test[members[k]] = true;
  }
  ImageSplit out{{{}, set.grid}, {{}, set.grid}};
  for (std::size_t i = 0; i < set.images.size(); ++i)
    (to_test[i] ? out.test : out.insample).images.push_back(set.images[i]);
  return out;
}

/// Upsamples each class to target_per_class: originals are kept and extra
/// copies are random originals plus i.i.d. N(0, noise_sd^2) pixel noise,
/// clamped to [0, 1].
inline ImageSet augment(const ImageSet &set, std::size_t target_per_class, double noise_sd,
                        std::uint64_t seed) {
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
    throw ConfigError("noise standard deviation must be finite and non-negative");
  Rng rng(seed);
  ImageSet out = set;
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < set.images.size(); ++i)
      if (set.images[i].label == label) members.push_back(i);
    if (members.empty()) throw DataError("class " + std::to_string(label) + " is empty");
    if (target_per_class < members.size())
      throw ConfigError("target " + std::to_string(target_per_class) + " below class " +
                        std::to_string(label) + " size " + std::to_string(members.size()));
    for (std::size_t k = members.size(); k < target_per_class; ++k) {
      const auto &src = set.images[members[rng.below(members.size())]];
      LabeledImage copy = src;
      copy.source = src.source + "#aug" + std::to_string(k - members.size() + 1);
      if (noise_sd > 0.0)
        for (auto &v : copy.pixels.data()) v = std::clamp(v + noise_sd * rng.normal(), 0.0, 1.0);
      out.images.push_back(std::move(copy));
    }
  }
  return out;
}

} // namespace icnn
