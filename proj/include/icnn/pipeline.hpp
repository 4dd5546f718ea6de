#pragma once

// End-to-end pipeline: discretize -> stacked interaction-based conv layers ->
// bias-free classifier, configured by a flat key=value file.

#include "icnn/bundle.hpp"
#include "icnn/convlayer.hpp"
#include "icnn/discretize.hpp"
#include "icnn/nn.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace icnn {

struct PipelineConfig {
  DiscretizeParams discretizer{};
  DiscretizeParams between{};
  std::vector<WindowSpec> layers{{2, 1, 1}};
  bool concat_layers = false;
  std::optional<std::size_t> hidden;
  std::size_t output_units = 2;
  TrainParams train{};
  std::optional<GridShape> grid; // inferred as a square when absent
  std::size_t test_per_class = 0;
  std::size_t augment_target = 0; // 0 disables augmentation
  double noise_sd = 0.05;
  std::uint64_t seed = 1; // split / augmentation stream
  unsigned workers = 0;
};

namespace detail {

inline bool parse_bool(const std::string &v, const std::string &key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline double config_double(const std::string &v, const std::string &key) {
  try {
    return parse_double(v, key);
  } catch (const DataError &e) {
    throw ConfigError(e.what());
  }
}

inline std::size_t config_size(const std::string &v, const std::string &key) {
  long long x = 0;
  try {
    x = parse_int(v, key);
  } catch (const DataError &e) {
    throw ConfigError(e.what());
  }
  if (x < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(x);
}

inline GridShape parse_grid(const std::string &v) {
  const auto x = v.find('x');
  if (x == std::string::npos) throw ConfigError("grid: expected ROWSxCOLS, got '" + v + "'");
  return {config_size(v.substr(0, x), "grid"), config_size(v.substr(x + 1), "grid")};
}

// "w:l:p,w:l:p" (window:stride:start per layer)
inline std::vector<WindowSpec> parse_layers(const std::string &v) {
  std::vector<WindowSpec> specs;
  for (auto item : split_csv_line(v)) {
    std::vector<std::size_t> parts;
    std::size_t s = 0;
    while (true) {
      const auto c = item.find(':', s);
      parts.push_back(config_size(std::string(trim(item.substr(s, c - s))), "layers"));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (parts.size() != 3) throw ConfigError("layers: each entry must be window:stride:start");
    specs.push_back({parts[0], parts[1], parts[2]});
  }
  return specs;
}

inline std::string format_layers(const std::vector<WindowSpec> &specs) {
  std::string out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(specs[i].window) + ":" + std::to_string(specs[i].stride) + ":" +
           std::to_string(specs[i].start);
  }
  return out;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string with_commas(std::size_t v) {
  std::string digits = std::to_string(v), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

} // namespace detail

/// Applies one key=value setting. Unknown keys are errors.
inline void apply_setting(PipelineConfig &c, const std::string &key, const std::string &value) {
  using namespace detail;
  if (key == "discretizer") c.discretizer.method = parse_discretize_method(value);
  else if (key == "threshold") c.discretizer.threshold = config_double(value, key);
  else if (key == "quantile") c.discretizer.quantile = config_double(value, key);
  else if (key == "between_discretizer") c.between.method = parse_discretize_method(value);
  else if (key == "between_threshold") c.between.threshold = config_double(value, key);
  else if (key == "between_quantile") c.between.quantile = config_double(value, key);
  else if (key == "layers") c.layers = parse_layers(value);
  else if (key == "concat_layers") c.concat_layers = parse_bool(value, key);
  else if (key == "hidden") {
    const auto h = config_size(value, key);
    c.hidden = h == 0 ? std::nullopt : std::optional<std::size_t>(h);
  } else if (key == "output_units") c.output_units = config_size(value, key);
  else if (key == "learning_rate") c.train.learning_rate = config_double(value, key);
  else if (key == "decay") c.train.decay = config_double(value, key);
  else if (key == "epochs") c.train.epochs = config_size(value, key);
  else if (key == "batch_size") c.train.batch_size = config_size(value, key);
  else if (key == "train_seed") c.train.seed = config_size(value, key);
  else if (key == "grid") c.grid = value == "auto" ? std::nullopt : std::optional(parse_grid(value));
  else if (key == "test_per_class") c.test_per_class = config_size(value, key);
  else if (key == "augment_target") c.augment_target = config_size(value, key);
  else if (key == "noise_sd") c.noise_sd = config_double(value, key);
  else if (key == "seed") {
    c.seed = config_size(value, key);
    c.train.seed = c.seed;
  } else if (key == "workers") c.workers = static_cast<unsigned>(config_size(value, key));
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Lines of `key = value`; '#' starts a comment.
inline void apply_config_text(PipelineConfig &c, std::string_view text) {
  std::size_t start = 0, lineno = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    start = nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, std::string(detail::trim(line.substr(0, eq))),
                  std::string(detail::trim(line.substr(eq + 1))));
  }
}

/// Every setting with defaults expanded, in key order.
inline std::map<std::string, std::string> resolved_settings(const PipelineConfig &c) {
  using detail::format_double;
  std::map<std::string, std::string> kv;
  kv["discretizer"] = to_string(c.discretizer.method);
  kv["threshold"] = format_double(c.discretizer.threshold);
  kv["quantile"] = format_double(c.discretizer.quantile);
  kv["between_discretizer"] = to_string(c.between.method);
  kv["between_threshold"] = format_double(c.between.threshold);
  kv["between_quantile"] = format_double(c.between.quantile);
  kv["layers"] = detail::format_layers(c.layers);
  kv["concat_layers"] = c.concat_layers ? "true" : "false";
  kv["hidden"] = std::to_string(c.hidden.value_or(0));
  kv["output_units"] = std::to_string(c.output_units);
  kv["learning_rate"] = format_double(c.train.learning_rate);
  kv["decay"] = format_double(c.train.decay);
  kv["epochs"] = std::to_string(c.train.epochs);
  kv["batch_size"] = std::to_string(c.train.batch_size);
  kv["train_seed"] = std::to_string(c.train.seed);
  kv["grid"] = c.grid ? std::to_string(c.grid->rows) + "x" + std::to_string(c.grid->cols) : "auto";
  kv["test_per_class"] = std::to_string(c.test_per_class);
  kv["augment_target"] = std::to_string(c.augment_target);
  kv["noise_sd"] = format_double(c.noise_sd);
  kv["seed"] = std::to_string(c.seed);
  kv["workers"] = std::to_string(c.workers);
  return kv;
}

inline std::string settings_to_text(const std::map<std::string, std::string> &kv) {
  std::string out;
  for (const auto &[k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

/// Square grid for p features, or the configured one.
inline GridShape resolve_grid(const PipelineConfig &c, std::size_t p) {
  if (c.grid) {
    if (c.grid->size() != p)
      throw ConfigError("grid " + std::to_string(c.grid->rows) + "x" +
                        std::to_string(c.grid->cols) + " does not match " + std::to_string(p) +
                        " features");
    return *c.grid;
  }
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
  if (side * side != p)
    throw ConfigError(std::to_string(p) + " features are not a square grid; set grid = RxC");
  return {side, side};
}

/// Classifier architecture implied by the geometry; validates everything
/// before any fitting starts.
inline MlpArchitecture plan_architecture(const PipelineConfig &c, const GridShape &grid) {
  const auto grids = validate_geometry_chain(grid, c.layers);
  std::size_t width = 0;
  if (c.concat_layers)
    for (const auto &g : grids) width += g.size();
  else
    width = grids.back().size();
  MlpArchitecture arch{width, c.hidden, c.output_units};
  validate(arch);
  if (c.train.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.train.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(c.train.decay >= 0.0 && c.train.decay < 1.0)) throw ConfigError("decay must lie in [0, 1)");
  if (c.discretizer.method == DiscretizeMethod::PerFeatureQuantile &&
      !(c.discretizer.quantile > 0.0 && c.discretizer.quantile < 1.0))
    throw ConfigError("quantile must lie strictly inside (0, 1)");
  if (c.between.method == DiscretizeMethod::PerFeatureQuantile &&
      !(c.between.quantile > 0.0 && c.between.quantile < 1.0))
    throw ConfigError("between_quantile must lie strictly inside (0, 1)");
  return arch;
}

/// Classifier input: the last layer's X† features, or all layers concatenated.
inline Matrix<double> pipeline_features(const LayerStack &stack, bool concat,
                                        const Matrix<Level> &levels, unsigned workers = 0) {
  auto outs = stack.transform_all(levels, workers);
  if (!concat) return std::move(outs.back());
  std::size_t width = 0;
  for (const auto &o : outs) width += o.cols();
  Matrix<double> X(levels.rows(), width);
  for (std::size_t i = 0; i < levels.rows(); ++i) {
    auto dst = X.row(i).begin();
    for (const auto &o : outs) dst = std::copy(o.row(i).begin(), o.row(i).end(), dst);
  }
  return X;
}

inline Matrix<double> pipeline_features(const ModelBundle &b, const Matrix<double> &raw,
                                        unsigned workers = 0) {
  if (raw.cols() != b.input_grid.size())
    throw DataError("data has " + std::to_string(raw.cols()) + " features, model expects " +
                    std::to_string(b.input_grid.size()));
  return pipeline_features(b.stack, b.concat_layers, apply_discretizer(b.input_discretizer, raw),
                           workers);
}

inline std::vector<double> predict(const ModelBundle &b, const Matrix<double> &raw,
                                   unsigned workers = 0) {
  return predict(b.classifier, pipeline_features(b, raw, workers));
}

struct FitResult {
  ModelBundle bundle;
  std::vector<EpochLoss> history;
};

inline FitResult fit_pipeline(const RealDataset &train_data, const GridShape &grid,
                              const PipelineConfig &cfg, const RealDataset *validation = nullptr) {
  const auto arch = plan_architecture(cfg, grid);
  if (train_data.p() != grid.size()) throw DataError("training data width does not match grid");
  if (train_data.n() == 0) throw DataError("empty training set");

  FitResult out;
  auto &b = out.bundle;
  b.input_grid = grid;
  b.between_params = cfg.between;
  b.concat_layers = cfg.concat_layers;
  b.settings = resolved_settings(cfg);
  b.settings.erase("workers"); // never affects results
  b.input_discretizer = fit_discretizer(train_data, cfg.discretizer);
  const auto levels = apply_discretizer(b.input_discretizer, train_data);
  b.stack = stack_layers(levels, grid, cfg.layers, cfg.between, cfg.workers);

  RealDataset features{pipeline_features(b.stack, b.concat_layers, levels.features(), cfg.workers),
                       std::vector<double>(train_data.response().begin(),
                                           train_data.response().end())};
  std::optional<RealDataset> val_features;
  if (validation)
    val_features.emplace(pipeline_features(b, validation->features(), cfg.workers),
                         std::vector<double>(validation->response().begin(),
                                             validation->response().end()));
  auto trained = train(arch, features, cfg.train, val_features ? &*val_features : nullptr);
  b.classifier = std::move(trained.model);
  out.history = std::move(trained.history);
  return out;
}

/// Human-readable fit summary: layer geometry, one line per window feature
/// (module, selected variables, I-score, in-sample AUC), parameter count and
/// loss history.
inline std::string fit_report(const ModelBundle &b, const std::vector<EpochLoss> &history) {
  std::ostringstream os;
  os << "input " << b.input_grid.rows << "×" << b.input_grid.cols << " ("
     << b.input_grid.size() << " features)\n";
  for (std::size_t i = 0; i < b.stack.layers.size(); ++i) {
    const auto &l = b.stack.layers[i];
    os << "layer " << i + 1 << ": " << to_string(l.spec) << " input " << l.input_grid.rows << "×"
       << l.input_grid.cols << " output " << l.output_grid.rows << "×" << l.output_grid.cols
       << " (" << l.output_grid.size() << " features)\n";
  }
  os << "classifier: input " << b.classifier.arch.input_width << ", hidden "
     << (b.classifier.arch.hidden ? std::to_string(*b.classifier.arch.hidden) : "none")
     << ", output " << b.classifier.arch.output_units << "\n";
  os << detail::with_commas(param_count(b.classifier.arch)) << " parameters\n";
  for (std::size_t i = 0; i < b.stack.layers.size(); ++i) {
    os << "\n# layer " << i + 1 << " modules\nmodule,variables,iscore,auc\n";
    for (const auto &f : b.stack.layers[i].features) {
      os << "X" << f.window_index + 1 << ",\"";
      for (std::size_t k = 0; k < f.selected.size(); ++k)
        os << (k ? " " : "") << "X" << f.selected[k] + 1;
      os << "\"," << std::setprecision(6) << f.iscore << ",";
      if (std::isnan(f.auc)) os << "NA";
      else os << std::fixed << std::setprecision(4) << f.auc << std::defaultfloat;
      os << "\n";
    }
  }
  if (!history.empty()) os << "\n# losses\n" << history_to_csv(history);
  return os.str();
}

} // namespace icnn
