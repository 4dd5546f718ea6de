// icnn command-line driver.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.

#include "icnn/icnn.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace icnn;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides; // --set key=value
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out = ".";
};

void add_common(CLI::App *cmd, CommonFlags &f, bool with_config = true) {
  if (with_config) {
    cmd->add_option("--config", f.config_path, "key = value configuration file");
    cmd->add_option("--set", f.overrides, "override a configuration key (key=value)");
  }
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory");
}

PipelineConfig build_config(const CommonFlags &f) {
  PipelineConfig cfg;
  if (!f.config_path.empty()) {
    std::string text;
    try {
      text = detail::read_file(f.config_path);
    } catch (const DataError &e) {
      throw ConfigError(e.what());
    }
    apply_config_text(cfg, text);
  }
  for (const auto &kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) apply_setting(cfg, "seed", std::to_string(*f.seed));
  if (f.workers) cfg.workers = *f.workers;
  return cfg;
}

fs::path prepare_out(const std::string &out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void echo_config(const fs::path &dir, const std::map<std::string, std::string> &kv) {
  detail::write_file(dir / "config.resolved", settings_to_text(kv));
}

struct InputData {
  RealDataset data;
  GridShape grid;
  std::optional<ImageSet> held_out; // test split of an image manifest
};

// Dataset CSV or image manifest. For manifests, the configured split and
// augmentation are applied here; only in-sample images are augmented.
InputData load_input(const std::string &data_path, const std::string &manifest_path,
                     const PipelineConfig &cfg, bool apply_split) {
  if (data_path.empty() == manifest_path.empty())
    throw ConfigError("pass exactly one of --data or --manifest");
  if (!data_path.empty()) {
    auto d = read_dataset_csv(data_path);
    const auto grid = resolve_grid(cfg, d.p());
    return {std::move(d), grid, std::nullopt};
  }
  auto set = load_images(manifest_path);
  if (cfg.grid && !(*cfg.grid == set.grid))
    throw ConfigError("configured grid does not match the image size");
  std::optional<ImageSet> held_out;
  if (apply_split && cfg.test_per_class > 0) {
    auto parts = split(set, cfg.test_per_class, cfg.seed);
    set = std::move(parts.insample);
    held_out = std::move(parts.test);
  }
  if (apply_split && cfg.augment_target > 0)
    set = augment(set, cfg.augment_target, cfg.noise_sd, cfg.seed + 1);
  const auto grid = set.grid;
  return {set.to_dataset(), grid, std::move(held_out)};
}

std::vector<ParityModule> parse_modules(const std::string &text) {
  // "1,2:0.5;3,4,5:0.5" with 1-based feature indices
  std::vector<ParityModule> modules;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("module '" + item + "' needs :probability");
    ParityModule m;
    m.probability = detail::config_double(item.substr(colon + 1), "modules");
    for (auto f : detail::split_csv_line(item.substr(0, colon))) {
      const auto idx = detail::config_size(std::string(f), "modules");
      if (idx == 0) throw ConfigError("module feature indices are 1-based");
      m.features.push_back(idx - 1);
    }
    modules.push_back(std::move(m));
  }
  return modules;
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

int run(int argc, char **argv) {
  CLI::App app{"Interaction-based convolutional pipeline"};
  app.require_subcommand(1);

  // synth
  CommonFlags synth_flags;
  ParityModelSpec synth_spec;
  std::string modules_text;
  auto *synth = app.add_subcommand("synth", "generate the parity-mixture benchmark");
  add_common(synth, synth_flags, false);
  synth->add_option("--n-train", synth_spec.n_train, "training rows");
  synth->add_option("--n-test", synth_spec.n_test, "test rows");
  synth->add_option("--features", synth_spec.p, "feature count");
  synth->add_option("--modules", modules_text, "modules as 1,2:0.5;3,4,5:0.5 (1-based)");

  // fit
  CommonFlags fit_flags;
  std::string fit_data, fit_manifest, fit_validation;
  auto *fit = app.add_subcommand("fit", "fit discretizer, conv layers and classifier");
  add_common(fit, fit_flags);
  fit->add_option("--data", fit_data, "dataset CSV (X1..Xp,Y)");
  fit->add_option("--manifest", fit_manifest, "image manifest CSV (path,label)");
  fit->add_option("--validation", fit_validation, "validation dataset CSV for loss history");

  // commands operating on a bundle
  struct BundleCmd {
    CommonFlags flags;
    std::string bundle, data, manifest;
  };
  auto add_bundle_cmd = [&](const char *name, const char *help, BundleCmd &c, bool needs_data,
                            bool with_config = false) {
    auto *cmd = app.add_subcommand(name, help);
    add_common(cmd, c.flags, with_config);
    cmd->add_option("--bundle", c.bundle, "model bundle")->required();
    if (needs_data) {
      cmd->add_option("--data", c.data, "dataset CSV (X1..Xp,Y)");
      cmd->add_option("--manifest", c.manifest, "image manifest CSV (path,label)");
    }
    return cmd;
  };
  BundleCmd tr, trn, pred, ev, ex, rep;
  auto *transform_cmd = add_bundle_cmd("transform", "write X† features", tr, true);
  auto *train_cmd = add_bundle_cmd("train", "retrain the classifier of a bundle", trn, true, true);
  auto *predict_cmd = add_bundle_cmd("predict", "write predicted probabilities", pred, true);
  auto *eval_cmd = add_bundle_cmd("eval", "AUC, sensitivity/specificity and ROC", ev, true);
  auto *export_cmd = add_bundle_cmd("export-maps", "per-layer feature maps as PGM", ex, true);
  std::string export_rows = "1";
  bool export_text = false;
  export_cmd->add_option("--rows", export_rows, "1-based rows, comma separated");
  export_cmd->add_flag("--text", export_text, "also write plain-text matrices");
  auto *report_cmd = add_bundle_cmd("report", "summarize a bundle", rep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*synth) {
    if (synth_flags.seed) synth_spec.seed = *synth_flags.seed;
    if (!modules_text.empty()) synth_spec.modules = parse_modules(modules_text);
    validate(synth_spec);
    const auto rate = theoretical_rate(synth_spec, 0);
    const auto data = generate(synth_spec);
    const auto dir = prepare_out(synth_flags.out);
    write_dataset_csv(dir / "train.csv", data.train);
    write_dataset_csv(dir / "test.csv", data.test);

    std::map<std::string, std::string> kv;
    kv["features"] = std::to_string(synth_spec.p);
    kv["n_train"] = std::to_string(synth_spec.n_train);
    kv["n_test"] = std::to_string(synth_spec.n_test);
    kv["seed"] = std::to_string(synth_spec.seed);
    kv["rng"] = kRngAlgorithm;
    std::string mods;
    for (const auto &m : synth_spec.modules) {
      if (!mods.empty()) mods += ";";
      for (std::size_t k = 0; k < m.features.size(); ++k)
        mods += (k ? "," : "") + std::to_string(m.features[k] + 1);
      mods += ":" + detail::format_double(m.probability);
    }
    kv["modules"] = mods;
    echo_config(dir, kv);

    // Pipeline config matching the benchmark's binary features.
    PipelineConfig pc;
    pc.discretizer = {DiscretizeMethod::GlobalThreshold, 0.5, 0.5};
    pc.output_units = 1;
    pc.seed = synth_spec.seed;
    pc.train.seed = synth_spec.seed;
    auto pkv = resolved_settings(pc);
    pkv.erase("workers");
    detail::write_file(dir / "pipeline.cfg", settings_to_text(pkv));

    std::cout << "wrote " << data.train.n() << " training rows and " << data.test.n()
              << " test rows with " << synth_spec.p << " features to " << dir.string() << "\n";
    for (std::size_t m = 0; m < synth_spec.modules.size(); ++m)
      std::cout << "theoretical rate module " << m + 1 << " "
                << detail::format_double(theoretical_rate(synth_spec, m)) << "\n";
    std::cout << "theoretical rate " << detail::format_double(rate) << "\n";
    return 0;
  }

  if (*fit) {
    auto cfg = build_config(fit_flags);
    auto input = load_input(fit_data, fit_manifest, cfg, true);
    plan_architecture(cfg, input.grid); // validate before any output
    std::optional<RealDataset> validation;
    if (!fit_validation.empty()) validation = read_dataset_csv(fit_validation);
    if (validation && validation->p() != input.data.p())
      throw DataError("validation data width does not match training data");

    auto result = fit_pipeline(input.data, input.grid, cfg, validation ? &*validation : nullptr);
    const auto dir = prepare_out(fit_flags.out);
    auto kv = resolved_settings(cfg);
    echo_config(dir, kv);
    save_bundle(result.bundle, dir / "model.icnn");
    detail::write_file(dir / "losses.csv", history_to_csv(result.history));
    const auto report = fit_report(result.bundle, result.history);
    detail::write_file(dir / "fit_report.txt", report);
    if (input.held_out) {
      std::vector<ManifestEntry> entries;
      for (const auto &im : input.held_out->images) entries.push_back({im.source, im.label});
      const auto manifest_dir = fs::absolute(fs::path(fit_manifest)).parent_path();
      for (auto &e : entries)
        if (!fs::path(e.path).is_absolute()) e.path = (manifest_dir / e.path).string();
      write_manifest(dir / "test_manifest.csv", entries);
    }
    std::cout << report.substr(0, report.find("\n#")) << "\n";
    std::cout << "final train loss "
              << (result.history.empty() ? std::string("n/a")
                                         : detail::format_double(result.history.back().train_loss))
              << "\nbundle " << (dir / "model.icnn").string() << "\n";
    return 0;
  }

  // Everything below operates on an existing bundle.
  BundleCmd *bc = *transform_cmd ? &tr
                  : *train_cmd   ? &trn
                  : *predict_cmd ? &pred
                  : *eval_cmd    ? &ev
                  : *export_cmd  ? &ex
                                 : &rep;
  auto bundle = load_bundle(bc->bundle);
  const unsigned workers = bc->flags.workers.value_or(0);

  auto bundle_input = [&]() {
    if (bc->data.empty() == bc->manifest.empty())
      throw ConfigError("pass exactly one of --data or --manifest");
    if (!bc->data.empty()) {
      auto d = read_dataset_csv(bc->data);
      if (d.p() != bundle.input_grid.size())
        throw DataError("data has " + std::to_string(d.p()) + " features, model expects " +
                        std::to_string(bundle.input_grid.size()));
      return InputData{std::move(d), bundle.input_grid, std::nullopt};
    }
    auto set = load_images(bc->manifest);
    if (!(set.grid == bundle.input_grid))
      throw DataError("image size does not match the bundle input grid");
    const auto grid = set.grid;
    return InputData{set.to_dataset(), grid, std::nullopt};
  };

  if (*report_cmd) {
    const auto text = fit_report(bundle, {});
    std::cout << text;
    if (rep.flags.out != ".") {
      const auto dir = prepare_out(rep.flags.out);
      detail::write_file(dir / "report.txt", text);
      echo_config(dir, bundle.settings);
    }
    return 0;
  }

  if (*export_cmd) {
    std::vector<std::size_t> rows;
    for (auto r : detail::split_csv_line(export_rows)) {
      const auto v = detail::config_size(std::string(r), "rows");
      if (v == 0) throw ConfigError("rows are 1-based");
      rows.push_back(v - 1);
    }
    auto in = bundle_input();
    for (auto r : rows)
      if (r >= in.data.n())
        throw DataError("row " + std::to_string(r + 1) + " out of range (n=" +
                        std::to_string(in.data.n()) + ")");
    const auto dir = prepare_out(ex.flags.out);
    echo_config(dir, bundle.settings);
    const auto levels = apply_discretizer(bundle.input_discretizer, in.data.features());
    const auto outs = bundle.stack.transform_all(levels, workers);
    const auto probs = predict(bundle.classifier,
                               pipeline_features(bundle.stack, bundle.concat_layers, levels, workers));
    std::size_t written = 0;
    for (auto r : rows) {
      for (std::size_t l = 0; l < outs.size(); ++l) {
        const auto &g = bundle.stack.layers[l].output_grid;
        Matrix<double> map(g.rows, g.cols);
        const auto src = outs[l].row(r);
        std::copy(src.begin(), src.end(), map.data().begin());
        const std::string stem = "row" + std::to_string(r + 1) + "_layer" + std::to_string(l + 1) +
                                 "_p" + fmt(probs[r], 3);
        write_pgm(dir / (stem + ".pgm"), map);
        if (export_text) detail::write_file(dir / (stem + ".txt"), matrix_to_text(map));
        ++written;
      }
    }
    std::cout << "wrote " << written << " feature maps to " << dir.string() << "\n";
    return 0;
  }

  auto in = bundle_input();

  if (*transform_cmd) {
    const auto dir = prepare_out(tr.flags.out);
    echo_config(dir, bundle.settings);
    RealDataset feats{pipeline_features(bundle, in.data.features(), workers),
                      std::vector<double>(in.data.response().begin(), in.data.response().end())};
    write_dataset_csv(dir / "features.csv", feats);
    std::cout << "wrote " << feats.n() << " rows x " << feats.p() << " features\n";
    return 0;
  }

  if (*train_cmd) {
    // Start from the bundle's settings, then apply --config / --set / --seed.
    PipelineConfig cfg;
    for (const auto &[k, v] : bundle.settings) apply_setting(cfg, k, v);
    auto flag_cfg = build_config(trn.flags);
    if (!trn.flags.config_path.empty() || !trn.flags.overrides.empty() || trn.flags.seed)
      cfg.train = flag_cfg.train;
    MlpArchitecture arch = bundle.classifier.arch;
    RealDataset feats{pipeline_features(bundle, in.data.features(), workers),
                      std::vector<double>(in.data.response().begin(), in.data.response().end())};
    auto result = train(arch, feats, cfg.train);
    bundle.classifier = std::move(result.model);
    auto kv = resolved_settings(cfg);
    kv.erase("workers");
    bundle.settings = kv;
    const auto dir = prepare_out(trn.flags.out);
    echo_config(dir, kv);
    save_bundle(bundle, dir / "model.icnn");
    detail::write_file(dir / "losses.csv", history_to_csv(result.history));
    std::cout << "retrained classifier, final train loss "
              << detail::format_double(result.history.empty() ? 0.0
                                                              : result.history.back().train_loss)
              << "\n";
    return 0;
  }

  const auto probs = predict(bundle, in.data.features(), workers);

  if (*predict_cmd) {
    const auto dir = prepare_out(pred.flags.out);
    echo_config(dir, bundle.settings);
    std::ostringstream os;
    os.precision(17);
    os << "row,probability\n";
    for (std::size_t i = 0; i < probs.size(); ++i) os << i + 1 << "," << probs[i] << "\n";
    detail::write_file(dir / "predictions.csv", os.str());
    std::cout << "wrote " << probs.size() << " predictions\n";
    return 0;
  }

  // eval
  const auto y = in.data.response();
  const auto roc = roc_curve(y, probs); // throws MetricError on a single class
  const double sens = sensitivity(y, probs, 0.5);
  const double spec = specificity(y, probs, 0.5);
  const auto dir = prepare_out(ev.flags.out);
  echo_config(dir, bundle.settings);
  detail::write_file(dir / "roc.csv", roc_to_csv(roc));
  std::ostringstream os;
  os << "auc " << fmt(roc.auc, 6) << "\n"
     << "sensitivity@0.5 " << fmt(sens, 6) << "\n"
     << "specificity@0.5 " << fmt(spec, 6) << "\n"
     << "n " << y.size() << "\n";
  detail::write_file(dir / "metrics.txt", os.str());
  std::cout << os.str();
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError &e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
