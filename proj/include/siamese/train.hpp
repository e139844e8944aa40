#pragma once

// Mini-batch SGD over balanced pair batches. One parameter set serves both
// branches of every pair; the batch gradient is the mean of the per-pair
// gradients, summed in batch order.
//
// Random stream: a single std::mt19937_64 seeded with cfg.seed first draws
// the initial parameters, then every pair batch in order.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "siamese/accuracy.hpp"
#include "siamese/dataset.hpp"
#include "siamese/errors.hpp"
#include "siamese/losses.hpp"
#include "siamese/net.hpp"
#include "siamese/pairing.hpp"
#include "siamese/text_io.hpp"

namespace siamese {

/// Hidden part of the extractor; the final dense layer of width embed_dim is
/// appended automatically.
struct HiddenLayer {
  LayerKind kind = LayerKind::dense;
  std::size_t width = 0;  // dense only

  friend bool operator==(const HiddenLayer&, const HiddenLayer&) = default;
};

struct TrainConfig {
  double lambda = 1.0;
  double margin = 1.0;
  double lr = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<HiddenLayer> layers;  // empty: a single dense layer input -> embed_dim
  std::size_t embed_dim = 16;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline std::vector<LayerSpec> build_layers(std::size_t input_dim, const TrainConfig& cfg) {
  std::vector<LayerSpec> out;
  std::size_t width = input_dim;
  for (const auto& h : cfg.layers) {
    if (h.kind == LayerKind::relu) {
      out.push_back(LayerSpec::relu(width));
    } else {
      out.push_back(LayerSpec::dense(width, h.width));
      width = h.width;
    }
  }
  out.push_back(LayerSpec::dense(width, cfg.embed_dim));
  validate_layers(out);
  return out;
}

/// `dense:32,relu` style list; `none` or empty means no hidden layers.
inline std::vector<HiddenLayer> parse_layers(std::string_view s) {
  std::vector<HiddenLayer> out;
  s = text::trim(s);
  if (s.empty() || s == "none") return out;
  for (auto item : text::split(s, ',')) {
    item = text::trim(item);
    if (item == "relu") {
      out.push_back({LayerKind::relu, 0});
      continue;
    }
    if (item.substr(0, 6) == "dense:") {
      const auto w = text::parse_int<std::size_t>(item.substr(6));
      if (w && *w > 0) {
        out.push_back({LayerKind::dense, *w});
        continue;
      }
    }
    throw ConfigError("bad layer entry '" + std::string(item) + "'");
  }
  return out;
}

inline std::string format_layers(const std::vector<HiddenLayer>& layers) {
  if (layers.empty()) return "none";
  std::string out;
  for (const auto& h : layers) {
    if (!out.empty()) out += ',';
    out += h.kind == LayerKind::relu ? std::string("relu") : "dense:" + std::to_string(h.width);
  }
  return out;
}

inline void validate_config(const TrainConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw ConfigError("lambda must be >= 0");
  if (!(cfg.margin > 0.0) || !std::isfinite(cfg.margin)) throw ConfigError("margin must be > 0");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be > 0");
  if (cfg.epochs == 0) throw ConfigError("epochs must be > 0");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (cfg.embed_dim == 0) throw ConfigError("embed_dim must be > 0");
}

/// Applies `key = value` overrides on top of `cfg`. Recognized keys: lambda,
/// margin, lr, epochs, batch_size, seed, layers, embed_dim.
inline void apply_config_values(TrainConfig& cfg, const text::KeyValues& kv) {
  auto real = [](const std::string& key, const std::string& v) {
    const auto d = text::parse_double(v);
    if (!d) throw ConfigError("value of '" + key + "' is not a number: " + v);
    return *d;
  };
  auto count = [](const std::string& key, const std::string& v) {
    const auto n = text::parse_int<std::uint64_t>(v);
    if (!n) throw ConfigError("value of '" + key + "' is not a non-negative integer: " + v);
    return *n;
  };
  for (const auto& [key, value] : kv) {
    if (key == "lambda") cfg.lambda = real(key, value);
    else if (key == "margin") cfg.margin = real(key, value);
    else if (key == "lr") cfg.lr = real(key, value);
    else if (key == "epochs") cfg.epochs = count(key, value);
    else if (key == "batch_size") cfg.batch_size = count(key, value);
    else if (key == "seed") cfg.seed = count(key, value);
    else if (key == "layers") cfg.layers = parse_layers(value);
    else if (key == "embed_dim") cfg.embed_dim = count(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

inline TrainConfig load_config(const std::string& path) {
  TrainConfig cfg;
  apply_config_values(cfg, text::parse_key_values(text::read_lines(path)));
  validate_config(cfg);
  return cfg;
}

inline std::string format_config(const TrainConfig& cfg) {
  std::string out;
  out += "lambda = " + text::format_double(cfg.lambda) + "\n";
  out += "margin = " + text::format_double(cfg.margin) + "\n";
  out += "lr = " + text::format_double(cfg.lr) + "\n";
  out += "epochs = " + std::to_string(cfg.epochs) + "\n";
  out += "batch_size = " + std::to_string(cfg.batch_size) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "layers = " + format_layers(cfg.layers) + "\n";
  out += "embed_dim = " + std::to_string(cfg.embed_dim) + "\n";
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double total = 0.0;        // mean pair objective
  double cls = 0.0;          // mean of I_i + I_j
  double contrastive = 0.0;  // mean V
  double accuracy = 0.0;     // on the training set after the epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

inline std::string log_to_csv(const TrainLog& log) {
  std::string out = "epoch,total,cls,contrastive,acc\n";
  for (const auto& r : log.epochs) {
    out += std::to_string(r.epoch) + "," + text::format_double(r.total) + "," +
           text::format_double(r.cls) + "," + text::format_double(r.contrastive) + "," +
           text::format_double(r.accuracy) + "\n";
  }
  return out;
}

/// p <- p - lr * g for every parameter tensor.
inline void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("learning rate must be >= 0");
  std::vector<const Tensor*> g;
  grads.for_each_tensor([&](const Tensor& t) { g.push_back(&t); });
  std::size_t i = 0;
  std::size_t count = 0;
  params.for_each_tensor([&](Tensor&) { ++count; });
  if (count != g.size()) throw DimensionError("gradient set does not match parameters");
  params.for_each_tensor([&](Tensor& t) {
    if (t.shape != g[i]->shape) {
      throw DimensionError("gradient shape " + shape_string(g[i]->shape) +
                           " does not match parameter shape " + shape_string(t.shape));
    }
    const auto& gd = g[i++]->data;
    for (std::size_t k = 0; k < t.size(); ++k) t.data[k] -= lr * gd[k];
  });
}

struct PairGradient {
  PairLossBreakdown loss;
  ModelParams grads;  // every parameter, both branches summed
};

/// Loss and full parameter gradient of the pair objective for inputs x_a, x_b.
inline PairGradient pair_gradient(const ModelParams& params, const Tensor& x_a,
                                  std::size_t c_a, const Tensor& x_b, std::size_t c_b,
                                  double lambda, Margin m) {
  const auto fa = forward_features(params, x_a);
  const auto fb = forward_features(params, x_b);
  const Tensor za = forward_logits(params, fa.features);
  const Tensor zb = forward_logits(params, fb.features);
  PairGradient out;
  out.loss = joint_loss(za, c_a, zb, c_b, fa.features, fb.features, lambda, m);
  const auto jg = joint_feature_grad(params.classifier_weights, za, c_a, zb, c_b,
                                     fa.features, fb.features, lambda, m);
  out.grads = backward(params, fa.trace, jg.d_fi);
  accumulate(out.grads, backward(params, fb.trace, jg.d_fj));
  out.grads.classifier_weights = jg.d_classifier_weights;
  out.grads.classifier_bias = jg.d_classifier_bias;
  return out;
}

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

inline std::size_t steps_per_epoch(std::size_t n_samples, std::size_t batch_size) {
  const std::size_t per_step = 2 * batch_size;
  return std::max<std::size_t>(1, (n_samples + per_step - 1) / per_step);
}

/// Trains on an already-normalized dataset. Throws DivergedError when a loss
/// or activation becomes non-finite.
inline TrainResult train(const LabeledDataset& ds, const TrainConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be >= 0");
  check_lambda(cfg.lambda);
  if (cfg.epochs == 0 || cfg.batch_size == 0) throw ConfigError("epochs and batch_size must be > 0");
  validate_dataset(ds);
  const Margin margin(cfg.margin);
  const PairSampler sampler(ds);

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  auto& params = result.params;
  params = init_params(build_layers(ds.feature_size(), cfg), ds.n_classes, rng);

  const std::size_t steps = steps_per_epoch(ds.size(), cfg.batch_size);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t s = 0; s < steps; ++s, ++step) {
      const PairBatch batch = sampler.sample(cfg.batch_size, rng);
      ModelParams acc = zeros_like(params);
      try {
        for (const auto& pair : batch.pairs) {
          const auto& a = ds.samples[pair.a];
          const auto& b = ds.samples[pair.b];
          const auto pg = pair_gradient(params, a.features, a.label, b.features, b.label,
                                        cfg.lambda, margin);
          if (!std::isfinite(pg.loss.total)) {
            throw DivergedError("non-finite loss at step " + std::to_string(step), step);
          }
          rec.total += pg.loss.total;
          rec.cls += pg.loss.loss_i + pg.loss.loss_j;
          rec.contrastive += pg.loss.contrastive;
          accumulate(acc, pg.grads);
        }
      } catch (const DomainError& e) {
        throw DivergedError("training diverged at step " + std::to_string(step) + ": " +
                            e.what(), step);
      }
      acc.for_each_tensor([inv_batch](Tensor& t) {
        for (double& v : t.data) v *= inv_batch;
      });
      sgd_step(params, acc, cfg.lr);
    }
    const double n_pairs = static_cast<double>(steps * cfg.batch_size);
    rec.total /= n_pairs;
    rec.cls /= n_pairs;
    rec.contrastive /= n_pairs;
    try {
      rec.accuracy = accuracy(params, ds);
    } catch (const DomainError& e) {
      throw DivergedError("training diverged after epoch " + std::to_string(epoch) + ": " +
                          e.what(), step);
    }
    result.log.epochs.push_back(rec);
  }
  return result;
}

}  // namespace siamese
