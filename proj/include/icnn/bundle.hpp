#pragma once

// Model bundle archive.
//
//   magic "ICNNBNDL" | u32 format version | u32 section count
//   per section: u32 name length | name | u64 payload length | u32 CRC-32 | payload
//
// All integers and float64 values are little-endian. The "manifest" section is
// UTF-8 key=value text; every other section is a binary payload.

#include "icnn/convlayer.hpp"
#include "icnn/discretize.hpp"
#include "icnn/io.hpp"
#include "icnn/nn.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <map>
#include <string>
#include <vector>

namespace icnn {

inline constexpr std::uint32_t kBundleFormatVersion = 1;
inline constexpr char kBundleMagic[8] = {'I', 'C', 'N', 'N', 'B', 'N', 'D', 'L'};

struct BundleError : DataError {
  using DataError::DataError;
};
struct BundleVersionError : BundleError {
  using BundleError::BundleError;
};
struct BundleIntegrityError : BundleError {
  using BundleError::BundleError;
};

struct ModelBundle {
  std::uint32_t format_version = kBundleFormatVersion;
  GridShape input_grid;
  Discretizer input_discretizer;
  DiscretizeParams between_params;
  LayerStack stack;
  bool concat_layers = false;
  MlpModel classifier;
  std::map<std::string, std::string> settings; // resolved configuration echo
};

namespace detail {

class ByteWriter {
public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }
  void f64s(std::span<const double> v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void sizes(std::span<const std::size_t> v) {
    u64(v.size());
    for (auto x : v) u64(x);
  }
  std::string take() { return std::move(buf_); }

private:
  std::string buf_;
};

class ByteReader {
public:
  ByteReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t count(std::size_t max_elem_bytes) {
    const auto n = u64();
    if (n > (data_.size() - pos_) / std::max<std::size_t>(1, max_elem_bytes))
      throw BundleError(context_ + ": element count exceeds payload");
    return static_cast<std::size_t>(n);
  }
  std::vector<double> f64s() {
    std::vector<double> v(count(8));
    for (auto &x : v) x = f64();
    return v;
  }
  std::vector<std::size_t> sizes() {
    std::vector<std::size_t> v(count(8));
    for (auto &x : v) x = static_cast<std::size_t>(u64());
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw BundleError(context_ + ": unexpected end of data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

inline std::uint32_t crc32_of(std::string_view s) {
  uLong c = crc32(0L, Z_NULL, 0);
  c = crc32(c, reinterpret_cast<const Bytef *>(s.data()), static_cast<uInt>(s.size()));
  return static_cast<std::uint32_t>(c);
}

inline std::string encode_discretizer(const Discretizer &d) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(d.params.method));
  w.f64(d.params.threshold);
  w.f64(d.params.quantile);
  w.f64s(d.thresholds);
  return w.take();
}

inline Discretizer decode_discretizer(ByteReader &r) {
  Discretizer d;
  const auto m = r.u32();
  if (m > 2) throw BundleError("unknown discretizer method code");
  d.params.method = static_cast<DiscretizeMethod>(m);
  d.params.threshold = r.f64();
  d.params.quantile = r.f64();
  d.thresholds = r.f64s();
  return d;
}

inline std::string encode_layer(const FittedConvLayer &l) {
  ByteWriter w;
  w.u64(l.input_grid.rows);
  w.u64(l.input_grid.cols);
  w.u64(l.spec.window);
  w.u64(l.spec.stride);
  w.u64(l.spec.start);
  w.u64(l.output_grid.rows);
  w.u64(l.output_grid.cols);
  w.u64(l.features.size());
  for (const auto &f : l.features) {
    w.u64(f.window_index);
    w.sizes(f.window);
    w.sizes(f.selected);
    w.u64(f.levels.size());
    for (auto lv : f.levels) w.u32(lv);
    w.u64(f.cell_means.size());
    for (const auto &[key, mean] : f.cell_means) {
      w.u64(key);
      w.f64(mean);
    }
    w.f64(f.fallback_mean);
    w.f64(f.iscore);
    w.f64(f.auc);
  }
  return w.take();
}

inline FittedConvLayer decode_layer(ByteReader &r) {
  FittedConvLayer l;
  l.input_grid.rows = r.u64();
  l.input_grid.cols = r.u64();
  l.spec.window = r.u64();
  l.spec.stride = r.u64();
  l.spec.start = r.u64();
  l.output_grid.rows = r.u64();
  l.output_grid.cols = r.u64();
  l.features.resize(r.count(8));
  for (auto &f : l.features) {
    f.window_index = r.u64();
    f.window = r.sizes();
    f.selected = r.sizes();
    f.levels.resize(r.count(4));
    for (auto &lv : f.levels) lv = r.u32();
    if (f.levels.size() != f.selected.size()) throw BundleError("layer: level/subset mismatch");
    f.cell_means.resize(r.count(16));
    for (auto &[key, mean] : f.cell_means) {
      key = r.u64();
      mean = r.f64();
    }
    f.fallback_mean = r.f64();
    f.iscore = r.f64();
    f.auc = r.f64();
  }
  return l;
}

inline std::string encode_matrices(const std::vector<Matrix<double>> &ms) {
  ByteWriter w;
  w.u64(ms.size());
  for (const auto &m : ms) {
    w.u64(m.rows());
    w.u64(m.cols());
    for (double v : m.data()) w.f64(v);
  }
  return w.take();
}

inline std::vector<Matrix<double>> decode_matrices(ByteReader &r) {
  std::vector<Matrix<double>> ms(r.count(16));
  for (auto &m : ms) {
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (cols != 0 && rows > UINT64_MAX / cols) throw BundleError("classifier: bad shape");
    std::vector<double> data(static_cast<std::size_t>(rows * cols));
    for (auto &v : data) v = r.f64();
    m = Matrix<double>(rows, cols, std::move(data));
  }
  return ms;
}

inline std::string encode_settings(const std::map<std::string, std::string> &kv) {
  std::string out;
  for (const auto &[k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline std::map<std::string, std::string> decode_settings(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw BundleError("manifest: malformed line");
    kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return kv;
}

inline std::size_t parse_size(const std::map<std::string, std::string> &kv, const std::string &key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw BundleError("manifest: missing key " + key);
  return static_cast<std::size_t>(parse_int(it->second, "manifest " + key));
}

} // namespace detail

/// Geometry chain: each layer's input grid equals the previous output grid,
/// and the classifier width matches the features fed to it.
inline void validate(const ModelBundle &b) {
  if (b.stack.layers.empty()) throw BundleError("bundle has no layers");
  if (b.stack.between.size() + 1 != b.stack.layers.size())
    throw BundleError("bundle has inconsistent inter-layer discretizers");
  if (b.input_discretizer.width() != b.input_grid.size())
    throw BundleError("input discretizer width does not match input grid");
  GridShape g = b.input_grid;
  std::size_t concat_width = 0;
  for (std::size_t i = 0; i < b.stack.layers.size(); ++i) {
    const auto &l = b.stack.layers[i];
    if (!(l.input_grid == g)) throw BundleError("layer " + std::to_string(i + 1) + " input grid mismatch");
    if (!(output_grid(l.input_grid, l.spec) == l.output_grid) ||
        l.features.size() != l.output_grid.size())
      throw BundleError("layer " + std::to_string(i + 1) + " output geometry mismatch");
    if (i + 1 < b.stack.layers.size() && b.stack.between[i].width() != l.output_grid.size())
      throw BundleError("inter-layer discretizer width mismatch");
    g = l.output_grid;
    concat_width += g.size();
  }
  const std::size_t width = b.concat_layers ? concat_width : g.size();
  if (b.classifier.arch.input_width != width)
    throw BundleError("classifier width does not match layer output");
  if (b.classifier.stored_weight_count() != param_count(b.classifier.arch))
    throw BundleError("classifier weight count does not match architecture");
}

inline std::string serialize_bundle(const ModelBundle &b) {
  validate(b);
  std::vector<std::pair<std::string, std::string>> sections;

  auto kv = b.settings;
  kv["format_version"] = std::to_string(b.format_version);
  kv["rng"] = kRngAlgorithm;
  kv["input_grid"] = std::to_string(b.input_grid.rows) + "x" + std::to_string(b.input_grid.cols);
  kv["layer_count"] = std::to_string(b.stack.layers.size());
  kv["concat_layers"] = b.concat_layers ? "true" : "false";
  kv["arch.input_width"] = std::to_string(b.classifier.arch.input_width);
  kv["arch.hidden"] = std::to_string(b.classifier.arch.hidden.value_or(0));
  kv["arch.output_units"] = std::to_string(b.classifier.arch.output_units);
  kv["between.method"] = to_string(b.between_params.method);
  sections.emplace_back("manifest", detail::encode_settings(kv));

  {
    detail::ByteWriter w;
    w.f64(b.classifier.hyper.learning_rate);
    w.f64(b.classifier.hyper.decay);
    w.u64(b.classifier.hyper.epochs);
    w.u64(b.classifier.hyper.batch_size);
    w.u64(b.classifier.hyper.seed);
    w.f64(b.between_params.threshold);
    w.f64(b.between_params.quantile);
    sections.emplace_back("hyper", w.take());
  }
  sections.emplace_back("discretizer", detail::encode_discretizer(b.input_discretizer));
  for (std::size_t i = 0; i < b.stack.layers.size(); ++i)
    sections.emplace_back("layer." + std::to_string(i), detail::encode_layer(b.stack.layers[i]));
  for (std::size_t i = 0; i < b.stack.between.size(); ++i)
    sections.emplace_back("between." + std::to_string(i),
                          detail::encode_discretizer(b.stack.between[i]));
  sections.emplace_back("classifier.weights", detail::encode_matrices(b.classifier.weights));
  sections.emplace_back("classifier.rms", detail::encode_matrices(b.classifier.rms));

  detail::ByteWriter w;
  w.bytes(std::string_view(kBundleMagic, 8));
  w.u32(b.format_version);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto &[name, payload] : sections) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u64(payload.size());
    w.u32(detail::crc32_of(payload));
    w.bytes(payload);
  }
  return w.take();
}

inline ModelBundle deserialize_bundle(std::string_view bytes) {
  detail::ByteReader r(bytes, "bundle");
  if (r.bytes(8) != std::string_view(kBundleMagic, 8)) throw BundleError("not a model bundle");
  ModelBundle b;
  b.format_version = r.u32();
  if (b.format_version != kBundleFormatVersion)
    throw BundleVersionError("bundle format version " + std::to_string(b.format_version) +
                             " is not supported (expected " +
                             std::to_string(kBundleFormatVersion) + ")");
  const auto nsections = r.u32();
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t s = 0; s < nsections; ++s) {
    const auto name = std::string(r.bytes(r.u32()));
    const auto len = r.u64();
    const auto crc = r.u32();
    const auto payload = r.bytes(static_cast<std::size_t>(len));
    if (detail::crc32_of(payload) != crc)
      throw BundleIntegrityError("checksum mismatch in section '" + name + "'");
    sections[name] = payload;
  }
  if (!r.done()) throw BundleIntegrityError("trailing bytes after last section");

  auto section = [&](const std::string &name) {
    auto it = sections.find(name);
    if (it == sections.end()) throw BundleError("missing section '" + name + "'");
    return detail::ByteReader(it->second, name);
  };

  const auto manifest_it = sections.find("manifest");
  if (manifest_it == sections.end()) throw BundleError("missing section 'manifest'");
  auto kv = detail::decode_settings(manifest_it->second);
  const auto layer_count = detail::parse_size(kv, "layer_count");
  b.concat_layers = kv["concat_layers"] == "true";
  b.classifier.arch.input_width = detail::parse_size(kv, "arch.input_width");
  if (const auto h = detail::parse_size(kv, "arch.hidden"); h != 0) b.classifier.arch.hidden = h;
  b.classifier.arch.output_units = detail::parse_size(kv, "arch.output_units");
  b.between_params.method = parse_discretize_method(kv["between.method"]);
  {
    const auto &g = kv["input_grid"];
    const auto x = g.find('x');
    if (x == std::string::npos) throw BundleError("manifest: bad input_grid");
    b.input_grid = {static_cast<std::size_t>(detail::parse_int(g.substr(0, x), "input_grid")),
                    static_cast<std::size_t>(detail::parse_int(g.substr(x + 1), "input_grid"))};
  }
  for (const char *k : {"format_version", "rng", "input_grid", "layer_count", "arch.input_width",
                        "arch.hidden", "arch.output_units", "between.method"})
    kv.erase(k);
  b.settings = std::move(kv);

  {
    auto hr = section("hyper");
    auto &h = b.classifier.hyper;
    h.learning_rate = hr.f64();
    h.decay = hr.f64();
    h.epochs = hr.u64();
    h.batch_size = hr.u64();
    h.seed = hr.u64();
    b.between_params.threshold = hr.f64();
    b.between_params.quantile = hr.f64();
  }
  {
    auto dr = section("discretizer");
    b.input_discretizer = detail::decode_discretizer(dr);
  }
  for (std::size_t i = 0; i < layer_count; ++i) {
    auto lr = section("layer." + std::to_string(i));
    b.stack.layers.push_back(detail::decode_layer(lr));
    if (!lr.done()) throw BundleError("layer section has trailing bytes");
    if (i + 1 < layer_count) {
      auto br = section("between." + std::to_string(i));
      b.stack.between.push_back(detail::decode_discretizer(br));
    }
  }
  {
    auto wr = section("classifier.weights");
    b.classifier.weights = detail::decode_matrices(wr);
    auto rr = section("classifier.rms");
    b.classifier.rms = detail::decode_matrices(rr);
  }
  validate(b);
  return b;
}

inline void save_bundle(const ModelBundle &b, const fs::path &path) {
  detail::write_file(path, serialize_bundle(b));
}

inline ModelBundle load_bundle(const fs::path &path) {
  return deserialize_bundle(detail::read_file(path));
}

} // namespace icnn
