#pragma once

#include <cstddef>

#include "siamese/dataset.hpp"
#include "siamese/errors.hpp"
#include "siamese/net.hpp"

namespace siamese {

/// Index of the largest logit; ties go to the lowest index.
inline std::size_t argmax(const Tensor& z) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < z.size(); ++k) {
    if (z.data[k] > z.data[best]) best = k;
  }
  return best;
}

inline std::size_t predict_class(const ModelParams& params, const Tensor& x) {
  return argmax(forward_logits(params, forward_features(params, x).features));
}

/// Fraction of samples whose predicted class equals the label.
inline double accuracy(const ModelParams& params, const LabeledDataset& ds) {
  if (ds.empty()) throw DomainError("accuracy of an empty dataset is undefined");
  std::size_t correct = 0;
  for (const auto& s : ds.samples) {
    if (predict_class(params, s.features) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace siamese
