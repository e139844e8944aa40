#pragma once

// Dense feed-forward feature extractor f = C(x) and the linear classifier head
// z = W^T f + b, with exact backward passes.
//
// Dense weights are stored (in_dim x out_dim) row-major so that
// y[k] = b[k] + sum_d W[d,k] x[d]. The classifier uses the same layout with
// shape (embed_dim x n_classes).

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "siamese/errors.hpp"
#include "siamese/tensor.hpp"

namespace siamese {

enum class LayerKind { dense, relu };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;  // equals in_dim for relu

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, in, out};
  }
  static LayerSpec relu(std::size_t dim) { return {LayerKind::relu, dim, dim}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline std::string layer_name(const LayerSpec& spec, std::size_t index) {
  return std::string(spec.kind == LayerKind::dense ? "dense" : "relu") +
         " layer " + std::to_string(index);
}

/// Throws SpecError unless the stack is non-empty, chained, and ends in dense.
inline void validate_layers(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw SpecError("layer list is empty");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    if (spec.in_dim == 0 || spec.out_dim == 0) {
      throw SpecError(layer_name(spec, l) + " has a zero dimension");
    }
    if (spec.kind == LayerKind::relu && spec.in_dim != spec.out_dim) {
      throw SpecError(layer_name(spec, l) + " changes dimension");
    }
    if (l > 0 && layers[l - 1].out_dim != spec.in_dim) {
      throw SpecError(layer_name(spec, l) + " expects " +
                      std::to_string(spec.in_dim) + " inputs but previous layer emits " +
                      std::to_string(layers[l - 1].out_dim));
    }
  }
  if (layers.back().kind != LayerKind::dense) {
    throw SpecError("the final extractor layer must be dense");
  }
}

struct DenseParams {
  Tensor weights;  // (in_dim x out_dim)
  Tensor bias;     // (out_dim)

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

/// The single parameter set shared by both siamese branches. Also used as
/// the container for gradients.
struct ModelParams {
  std::vector<LayerSpec> layers;
  std::vector<DenseParams> dense;  // one entry per dense layer, in order
  Tensor classifier_weights;       // (embed_dim x n_classes)
  Tensor classifier_bias;          // (n_classes)

  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t embed_dim() const { return layers.back().out_dim; }
  std::size_t n_classes() const { return classifier_bias.size(); }

  /// Visits every parameter tensor in a fixed order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& d : dense) {
      fn(d.weights);
      fn(d.bias);
    }
    fn(classifier_weights);
    fn(classifier_bias);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& d : dense) {
      fn(d.weights);
      fn(d.bias);
    }
    fn(classifier_weights);
    fn(classifier_bias);
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Throws ConsistencyError if the tensors do not match the layer list.
inline void validate_params(const ModelParams& params) {
  validate_layers(params.layers);
  std::size_t d = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& spec = params.layers[l];
    if (spec.kind != LayerKind::dense) continue;
    if (d >= params.dense.size()) {
      throw ConsistencyError("missing parameters for " + layer_name(spec, l));
    }
    const auto& p = params.dense[d++];
    if (p.weights.shape != Shape{spec.in_dim, spec.out_dim} ||
        p.bias.shape != Shape{spec.out_dim}) {
      throw ConsistencyError("parameter shapes of " + layer_name(spec, l) +
                             " do not match its spec");
    }
  }
  if (d != params.dense.size()) {
    throw ConsistencyError("more dense parameter blocks than dense layers");
  }
  const auto& w = params.classifier_weights;
  if (w.rank() != 2 || w.rows() != params.embed_dim() ||
      params.classifier_bias.shape != Shape{w.cols()}) {
    throw ConsistencyError("classifier shapes inconsistent with embedding dimension");
  }
}

/// Zero-valued parameter set with the same architecture.
inline ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  out.for_each_tensor([](Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
  return out;
}

/// Uniform fan-scaled initialization in [-s, s], s = sqrt(6 / (in + out));
/// biases start at zero.
template <typename Rng>
ModelParams init_params(const std::vector<LayerSpec>& layers, std::size_t n_classes,
                        Rng& rng) {
  validate_layers(layers);
  if (n_classes == 0) throw SpecError("n_classes must be positive");
  auto uniform = [&rng](std::size_t in, std::size_t out) {
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    Tensor w({in, out});
    for (double& v : w.data) v = dist(rng);
    return w;
  };
  ModelParams params;
  params.layers = layers;
  for (const auto& spec : layers) {
    if (spec.kind != LayerKind::dense) continue;
    params.dense.push_back({uniform(spec.in_dim, spec.out_dim), Tensor({spec.out_dim})});
  }
  const std::size_t embed = layers.back().out_dim;
  params.classifier_weights = uniform(embed, n_classes);
  params.classifier_bias = Tensor({n_classes});
  return params;
}

/// Inputs and outputs of every layer from one forward pass.
struct ForwardTrace {
  std::vector<Tensor> inputs;   // pre-activation side of each layer
  std::vector<Tensor> outputs;  // post-activation side of each layer

  std::size_t size() const noexcept { return outputs.size(); }
};

struct FeatureForward {
  Tensor features;
  ForwardTrace trace;
};

namespace detail {

inline Tensor affine(const Tensor& weights, const Tensor& bias,
                     std::span<const double> x) {
  const std::size_t in = weights.rows();
  const std::size_t out = weights.cols();
  Tensor y = bias;
  for (std::size_t d = 0; d < in; ++d) {
    const double xd = x[d];
    const double* row = &weights.data[d * out];
    for (std::size_t k = 0; k < out; ++k) y.data[k] += xd * row[k];
  }
  return y;
}

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

inline void check_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw DomainError("non-finite value produced by " + where);
}

}  // namespace detail

/// Runs the extractor on a flattened input and records the trace.
inline FeatureForward forward_features(const ModelParams& params, const Tensor& x) {
  const auto& layers = params.layers;
  if (layers.empty()) throw ConsistencyError("model has no layers");
  FeatureForward result;
  result.trace.inputs.reserve(layers.size());
  result.trace.outputs.reserve(layers.size());
  Tensor current = x;
  std::size_t d = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    if (current.size() != spec.in_dim) {
      throw DimensionError(layer_name(spec, l) + " expects " +
                           std::to_string(spec.in_dim) + " inputs, got " +
                           std::to_string(current.size()));
    }
    Tensor next;
    if (spec.kind == LayerKind::dense) {
      const auto& p = params.dense.at(d++);
      next = detail::affine(p.weights, p.bias, current.values());
    } else {
      next = detail::relu(current);
    }
    detail::check_finite(next, layer_name(spec, l));
    result.trace.inputs.push_back(std::move(current));
    result.trace.outputs.push_back(next);
    current = std::move(next);
  }
  result.features = std::move(current);
  return result;
}

/// z_k = sum_d W[d,k] f[d] + b[k].
inline Tensor forward_logits(const ModelParams& params, const Tensor& f) {
  const auto& w = params.classifier_weights;
  if (w.rank() != 2 || f.size() != w.rows()) {
    throw DimensionError("classifier expects a feature vector of length " +
                         std::to_string(w.rank() == 2 ? w.rows() : 0) + ", got " +
                         std::to_string(f.size()));
  }
  Tensor z = detail::affine(w, params.classifier_bias, f.values());
  detail::check_finite(z, "classifier");
  return z;
}

/// Back-propagates dL/df through the extractor. Classifier entries of the
/// returned gradient set are zero; the loss gradient supplies those.
inline ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                            const Tensor& dL_df) {
  const auto& layers = params.layers;
  if (trace.outputs.size() != layers.size() || trace.inputs.size() != layers.size()) {
    throw ConsistencyError("trace has " + std::to_string(trace.size()) +
                           " layers, model has " + std::to_string(layers.size()));
  }
  if (dL_df.size() != params.embed_dim()) {
    throw DimensionError("upstream gradient has length " + std::to_string(dL_df.size()) +
                         ", embedding dimension is " + std::to_string(params.embed_dim()));
  }
  ModelParams grads = zeros_like(params);
  Tensor upstream = dL_df;
  std::size_t d = params.dense.size();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& spec = layers[l];
    const Tensor& in = trace.inputs[l];
    if (in.size() != spec.in_dim || trace.outputs[l].size() != spec.out_dim) {
      throw ConsistencyError("trace shapes of " + layer_name(spec, l) +
                             " do not match the model");
    }
    if (spec.kind == LayerKind::relu) {
      for (std::size_t k = 0; k < upstream.size(); ++k) {
        if (!(in.data[k] > 0.0)) upstream.data[k] = 0.0;
      }
      continue;
    }
    const auto& p = params.dense[--d];
    auto& g = grads.dense[d];
    const std::size_t n_in = spec.in_dim;
    const std::size_t n_out = spec.out_dim;
    g.bias.data = upstream.data;
    Tensor downstream({n_in});
    for (std::size_t i = 0; i < n_in; ++i) {
      const double xi = in.data[i];
      const double* w_row = &p.weights.data[i * n_out];
      double* g_row = &g.weights.data[i * n_out];
      double acc = 0.0;
      for (std::size_t k = 0; k < n_out; ++k) {
        g_row[k] = xi * upstream.data[k];
        acc += w_row[k] * upstream.data[k];
      }
      downstream.data[i] = acc;
    }
    upstream = std::move(downstream);
  }
  return grads;
}

/// acc += g, tensor by tensor. Both sets must share one architecture.
inline void accumulate(ModelParams& acc, const ModelParams& g) {
  std::vector<Tensor*> dst;
  acc.for_each_tensor([&](Tensor& t) { dst.push_back(&t); });
  std::size_t i = 0;
  g.for_each_tensor([&](const Tensor& t) {
    if (i >= dst.size() || dst[i]->shape != t.shape) {
      throw DimensionError("gradient set does not match accumulator shape");
    }
    auto& out = dst[i++]->data;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += t.data[k];
  });
  if (i != dst.size()) throw DimensionError("gradient set does not match accumulator shape");
}

}  // namespace siamese
