#pragma once

// Bias-free feed-forward classifier over X† features: optional sigmoid hidden
// layer, then either one sigmoid unit or a two-unit softmax. Trained with
// mini-batch RMSprop on binary cross-entropy.

#include "icnn/core.hpp"
#include "icnn/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace icnn {

struct MlpArchitecture {
  std::size_t input_width = 0;
  std::optional<std::size_t> hidden; // units of the single hidden layer
  std::size_t output_units = 2;      // 1 = sigmoid, 2 = softmax

  friend bool operator==(const MlpArchitecture &, const MlpArchitecture &) = default;
};

inline void validate(const MlpArchitecture &a) {
  if (a.input_width == 0) throw ConfigError("classifier input width must be positive");
  if (a.hidden && *a.hidden == 0) throw ConfigError("hidden layer needs at least one unit");
  if (a.output_units != 1 && a.output_units != 2)
    throw ConfigError("output layer must have 1 or 2 units");
}

/// Fully connected, no bias terms.
inline std::size_t param_count(const MlpArchitecture &a) {
  if (a.hidden) return a.input_width * *a.hidden + *a.hidden * a.output_units;
  return a.input_width * a.output_units;
}

struct TrainParams {
  double learning_rate = 1e-3;
  double decay = 0.9;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

inline constexpr double kProbEpsilon = 1e-12;
inline constexpr double kRmsEpsilon = 1e-8;
inline constexpr double kInitRange = 0.05;

struct MlpModel {
  MlpArchitecture arch;
  std::vector<Matrix<double>> weights; // weights[l] is (units_out x units_in)
  std::vector<Matrix<double>> rms;     // RMSprop accumulator, same shapes
  TrainParams hyper;

  std::size_t stored_weight_count() const {
    std::size_t n = 0;
    for (const auto &w : weights) n += w.data().size();
    return n;
  }
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Two-unit softmax, returned as (p0, p1).
inline std::pair<double, double> softmax2(double z0, double z1) {
  return {sigmoid(z0 - z1), sigmoid(z1 - z0)};
}

/// Weights drawn uniform(-0.05, 0.05) in layer order, row-major.
inline MlpModel init_model(const MlpArchitecture &arch, const TrainParams &hyper) {
  validate(arch);
  MlpModel m{arch, {}, {}, hyper};
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  if (arch.hidden) {
    shapes.emplace_back(*arch.hidden, arch.input_width);
    shapes.emplace_back(arch.output_units, *arch.hidden);
  } else {
    shapes.emplace_back(arch.output_units, arch.input_width);
  }
  Rng rng(hyper.seed);
  for (auto [r, c] : shapes) {
    Matrix<double> w(r, c);
    for (auto &v : w.data()) v = rng.uniform(-kInitRange, kInitRange);
    m.weights.push_back(std::move(w));
    m.rms.emplace_back(r, c, 0.0);
  }
  return m;
}

namespace detail {

struct ForwardCache {
  std::vector<double> hidden; // activations, empty without hidden layer
  std::vector<double> logits;
  double prob = 0.0; // class-1 probability
};

inline void matvec(const Matrix<double> &w, std::span<const double> x, std::vector<double> &out) {
  out.assign(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto wr = w.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < wr.size(); ++c) s += wr[c] * x[c];
    out[r] = s;
  }
}

inline void forward_cached(const MlpModel &m, std::span<const double> x, ForwardCache &fc) {
  if (m.arch.hidden) {
    matvec(m.weights[0], x, fc.hidden);
    for (auto &h : fc.hidden) h = sigmoid(h);
    matvec(m.weights[1], fc.hidden, fc.logits);
  } else {
    fc.hidden.clear();
    matvec(m.weights[0], x, fc.logits);
  }
  fc.prob = m.arch.output_units == 1 ? sigmoid(fc.logits[0])
                                     : softmax2(fc.logits[0], fc.logits[1]).second;
}

inline void check_input(const MlpModel &m, std::span<const double> x) {
  if (x.size() != m.arch.input_width)
    throw DataError("classifier expects " + std::to_string(m.arch.input_width) +
                    " features, got " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("non-finite classifier input");
}

} // namespace detail

/// Predicted class-1 probability.
inline double forward(const MlpModel &m, std::span<const double> x) {
  detail::check_input(m, x);
  detail::ForwardCache fc;
  detail::forward_cached(m, x, fc);
  return fc.prob;
}

inline std::vector<double> predict(const MlpModel &m, const Matrix<double> &features) {
  std::vector<double> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) out[i] = forward(m, features.row(i));
  return out;
}

/// Mean binary cross-entropy with predictions clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw DataError("bce_loss: length mismatch");
  if (y.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(yhat[i], kProbEpsilon, 1.0 - kProbEpsilon);
    s += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return -s / static_cast<double>(y.size());
}

/// Mean loss and its gradient with respect to every weight over the given rows.
/// The gradient is the analytic derivative of the unclamped loss.
inline double loss_and_gradient(const MlpModel &m, const Matrix<double> &features,
                                std::span<const double> y, std::span<const std::size_t> rows,
                                std::vector<Matrix<double>> &grads) {
  grads.clear();
  for (const auto &w : m.weights) grads.emplace_back(w.rows(), w.cols(), 0.0);
  detail::ForwardCache fc;
  std::vector<double> delta_out(m.arch.output_units), delta_hidden;
  double loss = 0.0;

  for (std::size_t i : rows) {
    const auto x = features.row(i);
    detail::forward_cached(m, x, fc);
    const double p = std::clamp(fc.prob, kProbEpsilon, 1.0 - kProbEpsilon);
    loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);

    // dL/dlogits: sigmoid -> p - y ; softmax -> p_k - onehot_k
    if (m.arch.output_units == 1) {
      delta_out[0] = fc.prob - y[i];
    } else {
      const auto [p0, p1] = softmax2(fc.logits[0], fc.logits[1]);
      delta_out[0] = p0 - (1.0 - y[i]);
      delta_out[1] = p1 - y[i];
    }

    auto &g_out = grads.back();
    const std::span<const double> below =
        m.arch.hidden ? std::span<const double>(fc.hidden) : x;
    for (std::size_t k = 0; k < g_out.rows(); ++k) {
      auto gr = g_out.row(k);
      for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += delta_out[k] * below[c];
    }

    if (m.arch.hidden) {
      const auto &w_out = m.weights[1];
      delta_hidden.assign(fc.hidden.size(), 0.0);
      for (std::size_t h = 0; h < fc.hidden.size(); ++h) {
        double s = 0.0;
        for (std::size_t k = 0; k < w_out.rows(); ++k) s += w_out(k, h) * delta_out[k];
        delta_hidden[h] = s * fc.hidden[h] * (1.0 - fc.hidden[h]);
      }
      auto &g_in = grads[0];
      for (std::size_t h = 0; h < g_in.rows(); ++h) {
        auto gr = g_in.row(h);
        for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += delta_hidden[h] * x[c];
      }
    }
  }

  const double inv = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  for (auto &g : grads)
    for (auto &v : g.data()) v *= inv;
  return loss * inv;
}

/// v <- beta v + (1 - beta) g^2 ;  w <- w - eta g / (sqrt(v) + 1e-8)
inline void rmsprop_step(MlpModel &m, const std::vector<Matrix<double>> &grads) {
  if (grads.size() != m.weights.size()) throw DataError("gradient layer count mismatch");
  const double beta = m.hyper.decay;
  const double eta = m.hyper.learning_rate;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto &w = m.weights[l].data();
    auto &v = m.rms[l].data();
    const auto &g = grads[l].data();
    if (g.size() != w.size()) throw DataError("gradient shape mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) {
      v[i] = beta * v[i] + (1.0 - beta) * g[i] * g[i];
      w[i] -= eta * g[i] / (std::sqrt(v[i]) + kRmsEpsilon);
    }
  }
}

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLoss> history;
};

inline std::string history_to_csv(const std::vector<EpochLoss> &history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss\n";
  for (const auto &e : history) {
    os << e.epoch << "," << e.train_loss << ",";
    if (!std::isnan(e.val_loss)) os << e.val_loss;
    os << "\n";
  }
  return os.str();
}

namespace detail {
inline double dataset_loss(const MlpModel &m, const RealDataset &d) {
  return bce_loss(d.response(), predict(m, d.features()));
}
} // namespace detail

/// Mini-batch RMSprop. Deterministic given hyper.seed: initial weights come
/// from the seed itself, per-epoch shuffles from a stream derived from it.
inline TrainResult train(const MlpArchitecture &arch, const RealDataset &train_data,
                         const TrainParams &hyper, const RealDataset *validation = nullptr) {
  validate(arch);
  if (train_data.p() != arch.input_width)
    throw DataError("training data has " + std::to_string(train_data.p()) +
                    " features, architecture expects " + std::to_string(arch.input_width));
  if (hyper.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(hyper.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(hyper.decay >= 0.0 && hyper.decay < 1.0)) throw ConfigError("decay must lie in [0, 1)");

  TrainResult result{init_model(arch, hyper), {}};
  auto &m = result.model;
  Rng rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_data.n());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Matrix<double>> grads;

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < order.size(); b += hyper.batch_size) {
      const std::size_t e = std::min(order.size(), b + hyper.batch_size);
      const std::span<const std::size_t> batch(order.data() + b, e - b);
      const double loss = loss_and_gradient(m, train_data.features(), train_data.response(),
                                            batch, grads);
      if (!std::isfinite(loss))
        throw NumericError("loss became non-finite in epoch " + std::to_string(epoch) +
                           "; lower the learning rate (currently " +
                           std::to_string(hyper.learning_rate) + ")");
      rmsprop_step(m, grads);
    }
    EpochLoss el{epoch, detail::dataset_loss(m, train_data)};
    if (validation) el.val_loss = detail::dataset_loss(m, *validation);
    if (!std::isfinite(el.train_loss))
      throw NumericError("training loss is not finite after epoch " + std::to_string(epoch) +
                         "; lower the learning rate");
    result.history.push_back(el);
  }
  return result;
}

} // namespace icnn
