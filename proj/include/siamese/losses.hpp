#pragma once

// Joint siamese objective for one pair of samples:
//
//   L = I(z_i, c_i) + I(z_j, c_j) + lambda * V(f_i, f_j)
//
// where I is softmax cross-entropy over the logits and V is the margin
// contrastive loss on the embeddings:
//
//   V = 1/2 d^2                  same class
//   V = 1/2 max(m - d, 0)^2      different class,     d = ||f_i - f_j||_2

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "siamese/errors.hpp"
#include "siamese/tensor.hpp"

namespace siamese {

/// Contrastive margin; always strictly positive.
class Margin {
 public:
  explicit Margin(double m = 1.0) : m_(m) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw DomainError("margin must be a positive finite number, got " + std::to_string(m));
    }
  }
  double value() const noexcept { return m_; }

 private:
  double m_;
};

/// Below this distance the different-class gradient direction is undefined
/// and the gradient is taken as zero.
inline constexpr double kMinPairDistance = 1e-12;

namespace detail {

inline void check_logits(const Tensor& z) {
  if (z.size() == 0) throw DomainError("logit vector is empty");
  if (!z.all_finite()) throw DomainError("logit vector has non-finite entries");
}

inline void check_class(const Tensor& z, std::size_t c) {
  if (c >= z.size()) {
    throw IndexError("class index " + std::to_string(c) + " out of range for " +
                     std::to_string(z.size()) + " logits");
  }
}

inline void check_pair(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("pair embeddings have lengths " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
}

inline double squared_distance(const Tensor& a, const Tensor& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a.data[k] - b.data[k];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace detail

/// Softmax with max subtraction.
inline Tensor softmax_probs(const Tensor& z) {
  detail::check_logits(z);
  const double zmax = *std::max_element(z.data.begin(), z.data.end());
  Tensor p = z;
  double sum = 0.0;
  for (double& v : p.data) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : p.data) v /= sum;
  return p;
}

/// -log softmax(z)[c], evaluated as logsumexp(z) - z[c].
inline double cross_entropy(const Tensor& z, std::size_t c) {
  detail::check_logits(z);
  detail::check_class(z, c);
  const double zmax = *std::max_element(z.data.begin(), z.data.end());
  double sum = 0.0;
  for (double v : z.data) sum += std::exp(v - zmax);
  return std::max(0.0, std::log(sum) - (z.data[c] - zmax));
}

/// dI/dz: p - onehot(c).
inline Tensor cross_entropy_logit_grad(const Tensor& z, std::size_t c) {
  detail::check_class(z, c);
  Tensor g = softmax_probs(z);
  g.data[c] -= 1.0;
  return g;
}

inline double contrastive(const Tensor& f_i, const Tensor& f_j, bool same, Margin m) {
  detail::check_pair(f_i, f_j);
  const double d2 = detail::squared_distance(f_i, f_j);
  if (same) return 0.5 * d2;
  const double gap = std::max(m.value() - std::sqrt(d2), 0.0);
  return 0.5 * gap * gap;
}

struct PairGrad {
  Tensor d_fi;
  Tensor d_fj;
};

/// Gradient of the contrastive loss; d_fj is always -d_fi. Zero at the
/// hinge boundary d >= m and for d below kMinPairDistance.
inline PairGrad contrastive_grad(const Tensor& f_i, const Tensor& f_j, bool same,
                                 Margin m) {
  detail::check_pair(f_i, f_j);
  PairGrad g{Tensor::zeros_like(f_i), Tensor::zeros_like(f_j)};
  if (same) {
    for (std::size_t k = 0; k < f_i.size(); ++k) g.d_fi.data[k] = f_i.data[k] - f_j.data[k];
  } else {
    const double d = std::sqrt(detail::squared_distance(f_i, f_j));
    if (d >= kMinPairDistance && d < m.value()) {
      const double scale = -(m.value() - d) / d;
      for (std::size_t k = 0; k < f_i.size(); ++k) {
        g.d_fi.data[k] = scale * (f_i.data[k] - f_j.data[k]);
      }
    }
  }
  for (std::size_t k = 0; k < f_i.size(); ++k) g.d_fj.data[k] = -g.d_fi.data[k];
  return g;
}

struct PairLossBreakdown {
  double loss_i = 0.0;
  double loss_j = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
  bool same_class = false;

  friend bool operator==(const PairLossBreakdown&, const PairLossBreakdown&) = default;
};

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("lambda must be a non-negative finite number");
  }
}

/// One pair's objective; same_class is c_i == c_j.
inline PairLossBreakdown joint_loss(const Tensor& z_i, std::size_t c_i, const Tensor& z_j,
                                    std::size_t c_j, const Tensor& f_i, const Tensor& f_j,
                                    double lambda, Margin m) {
  check_lambda(lambda);
  PairLossBreakdown out;
  out.same_class = c_i == c_j;
  out.loss_i = cross_entropy(z_i, c_i);
  out.loss_j = cross_entropy(z_j, c_j);
  out.contrastive = contrastive(f_i, f_j, out.same_class, m);
  out.total = out.loss_i + out.loss_j + lambda * out.contrastive;
  return out;
}

struct JointGrad {
  Tensor d_fi;
  Tensor d_fj;
  Tensor d_zi;
  Tensor d_zj;
  Tensor d_classifier_weights;  // (embed_dim x n_classes), both branches summed
  Tensor d_classifier_bias;
};

/// Gradients of the pair objective with respect to both embeddings, both
/// logit vectors and the classifier head (z = W^T f + b).
inline JointGrad joint_feature_grad(const Tensor& classifier_weights, const Tensor& z_i,
                                    std::size_t c_i, const Tensor& z_j, std::size_t c_j,
                                    const Tensor& f_i, const Tensor& f_j, double lambda,
                                    Margin m) {
  check_lambda(lambda);
  const auto& w = classifier_weights;
  if (w.rank() != 2 || w.rows() != f_i.size() || w.cols() != z_i.size() ||
      z_i.size() != z_j.size()) {
    throw DimensionError("classifier weights " + shape_string(w.shape) +
                         " inconsistent with embedding and logit lengths");
  }
  detail::check_pair(f_i, f_j);
  JointGrad g;
  g.d_zi = cross_entropy_logit_grad(z_i, c_i);
  g.d_zj = cross_entropy_logit_grad(z_j, c_j);
  const PairGrad v = contrastive_grad(f_i, f_j, c_i == c_j, m);

  const std::size_t embed = w.rows();
  const std::size_t classes = w.cols();
  g.d_fi = Tensor({embed});
  g.d_fj = Tensor({embed});
  g.d_classifier_weights = Tensor({embed, classes});
  g.d_classifier_bias = Tensor({classes});
  for (std::size_t d = 0; d < embed; ++d) {
    double acc_i = 0.0;
    double acc_j = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      acc_i += w.at(d, k) * g.d_zi.data[k];
      acc_j += w.at(d, k) * g.d_zj.data[k];
      g.d_classifier_weights.at(d, k) =
          f_i.data[d] * g.d_zi.data[k] + f_j.data[d] * g.d_zj.data[k];
    }
    g.d_fi.data[d] = acc_i + lambda * v.d_fi.data[d];
    g.d_fj.data[d] = acc_j + lambda * v.d_fj.data[d];
  }
  for (std::size_t k = 0; k < classes; ++k) {
    g.d_classifier_bias.data[k] = g.d_zi.data[k] + g.d_zj.data[k];
  }
  return g;
}

}  // namespace siamese
