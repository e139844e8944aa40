#pragma once

// Central finite-difference verification of every analytic gradient of the
// pair objective on a small random configuration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "siamese/losses.hpp"
#include "siamese/net.hpp"
#include "siamese/train.hpp"

namespace siamese {

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true value
/// is near zero from turning finite-difference noise into large ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

inline double central_difference(const std::function<double()>& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double plus = f();
  x = saved - eps;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * eps);
}

/// One random pair problem: a small relu network, two inputs, labels, lambda
/// and margin.
struct GradcheckCase {
  ModelParams params;
  Tensor x_a;
  Tensor x_b;
  std::size_t c_a = 0;
  std::size_t c_b = 0;
  double lambda = 1.0;
  double margin = 1.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // name of the entry with the largest error
};

/// Smallest |pre-activation| over relu inputs of both branches, used to keep
/// the finite differences away from relu kinks.
inline double min_relu_input(const ModelParams& params, const Tensor& x) {
  const auto fw = forward_features(params, x);
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (params.layers[l].kind != LayerKind::relu) continue;
    for (double v : fw.trace.inputs[l].data) out = std::min(out, std::abs(v));
  }
  return out;
}

/// Seeds cycle through the loss branches: even seeds give a same-class
/// pair; odd seeds a different-class pair with the hinge active, except
/// seed % 4 == 3 where the margin is already satisfied. Draws are repeated
/// until no relu input lies within 1e-3 of zero and the pair distance is
/// at least 1e-3.
inline GradcheckCase make_gradcheck_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  const std::vector<LayerSpec> layers = {LayerSpec::dense(6, 8), LayerSpec::relu(8),
                                         LayerSpec::dense(8, 4)};
  const std::size_t n_classes = 3;
  const bool same = seed % 2 == 0;

  GradcheckCase gc;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    gc.params = init_params(layers, n_classes, rng);
    for (auto& d : gc.params.dense) {
      for (double& v : d.bias.data) v = unit(rng);
    }
    for (double& v : gc.params.classifier_bias.data) v = unit(rng);
    std::vector<double> xa(6);
    std::vector<double> xb(6);
    for (double& v : xa) v = normal(rng);
    for (double& v : xb) v = normal(rng);
    gc.x_a = Tensor::vector(xa);
    gc.x_b = Tensor::vector(xb);
    gc.c_a = std::uniform_int_distribution<std::size_t>(0, n_classes - 1)(rng);
    gc.c_b = same ? gc.c_a
                  : (gc.c_a + 1 + std::uniform_int_distribution<std::size_t>(0, n_classes - 2)(rng)) %
                        n_classes;
    gc.lambda = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const double d = l2_distance(forward_features(gc.params, gc.x_a).features.values(),
                                 forward_features(gc.params, gc.x_b).features.values());
    gc.margin = seed % 4 == 3 ? 0.5 * d : 1.5 * d;
    if (d >= 1e-3 && min_relu_input(gc.params, gc.x_a) > 1e-3 &&
        min_relu_input(gc.params, gc.x_b) > 1e-3) {
      return gc;
    }
  }
  throw DomainError("could not draw a gradient-check configuration away from kinks");
}

/// Compares every analytic gradient (logits, embeddings, loss pieces and all
/// network parameters) against central differences with step eps.
inline GradcheckReport run_gradcheck(const GradcheckCase& gc, double eps = 1e-5) {
  GradcheckReport report;
  auto record = [&report](double analytic, double numeric, const std::string& name) {
    const double err = relative_error(analytic, numeric);
    ++report.checked;
    if (err > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = err;
      report.worst = name;
    }
  };
  const Margin m(gc.margin);
  const bool same = gc.c_a == gc.c_b;

  ModelParams params = gc.params;
  const auto fa = forward_features(params, gc.x_a).features;
  const auto fb = forward_features(params, gc.x_b).features;
  const auto za = forward_logits(params, fa);
  const auto zb = forward_logits(params, fb);

  // Softmax cross-entropy with respect to the logits.
  {
    Tensor z = za;
    const auto g = cross_entropy_logit_grad(z, gc.c_a);
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double num = central_difference([&] { return cross_entropy(z, gc.c_a); },
                                            z.data[k], eps);
      record(g.data[k], num, "dI/dz[" + std::to_string(k) + "]");
    }
  }
  // Contrastive loss with respect to both embeddings.
  {
    Tensor a = fa;
    Tensor b = fb;
    const auto g = contrastive_grad(a, b, same, m);
    for (std::size_t k = 0; k < a.size(); ++k) {
      record(g.d_fi.data[k],
             central_difference([&] { return contrastive(a, b, same, m); }, a.data[k], eps),
             "dV/dfi[" + std::to_string(k) + "]");
      record(g.d_fj.data[k],
             central_difference([&] { return contrastive(a, b, same, m); }, b.data[k], eps),
             "dV/dfj[" + std::to_string(k) + "]");
    }
  }
  // Joint objective with respect to embeddings (logits recomputed from f).
  {
    Tensor a = fa;
    Tensor b = fb;
    const auto jg = joint_feature_grad(params.classifier_weights, za, gc.c_a, zb, gc.c_b, fa,
                                       fb, gc.lambda, m);
    auto loss = [&] {
      return joint_loss(forward_logits(params, a), gc.c_a, forward_logits(params, b), gc.c_b,
                        a, b, gc.lambda, m)
          .total;
    };
    for (std::size_t k = 0; k < a.size(); ++k) {
      record(jg.d_fi.data[k], central_difference(loss, a.data[k], eps),
             "dL/dfi[" + std::to_string(k) + "]");
      record(jg.d_fj.data[k], central_difference(loss, b.data[k], eps),
             "dL/dfj[" + std::to_string(k) + "]");
    }
  }
  // Every network parameter through the full forward pass.
  {
    const auto analytic = pair_gradient(params, gc.x_a, gc.c_a, gc.x_b, gc.c_b, gc.lambda, m);
    auto loss = [&] {
      const auto ea = forward_features(params, gc.x_a).features;
      const auto eb = forward_features(params, gc.x_b).features;
      return joint_loss(forward_logits(params, ea), gc.c_a, forward_logits(params, eb),
                        gc.c_b, ea, eb, gc.lambda, m)
          .total;
    };
    std::vector<Tensor*> p;
    params.for_each_tensor([&](Tensor& t) { p.push_back(&t); });
    std::vector<const Tensor*> g;
    analytic.grads.for_each_tensor([&](const Tensor& t) { g.push_back(&t); });
    for (std::size_t t = 0; t < p.size(); ++t) {
      for (std::size_t k = 0; k < p[t]->size(); ++k) {
        record(g[t]->data[k], central_difference(loss, p[t]->data[k], eps),
               "param[" + std::to_string(t) + "][" + std::to_string(k) + "]");
      }
    }
  }
  return report;
}

}  // namespace siamese
