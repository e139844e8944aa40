#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "siamese/errors.hpp"
#include "siamese/tensor.hpp"

namespace siamese {

struct Sample {
  Tensor features;
  std::size_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Labeled samples plus the normalization mean that was subtracted from them
/// (empty until normalize_mean runs).
struct LabeledDataset {
  std::vector<Sample> samples;
  std::size_t n_classes = 0;
  Tensor mean;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t feature_size() const { return samples.empty() ? 0 : samples.front().features.size(); }

  /// Sample indices grouped by label, one list per class.
  std::vector<std::vector<std::size_t>> indices_by_class() const {
    std::vector<std::vector<std::size_t>> out(n_classes);
    for (std::size_t i = 0; i < samples.size(); ++i) out.at(samples[i].label).push_back(i);
    return out;
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Throws DatasetError if a label is out of range or feature shapes differ.
inline void validate_dataset(const LabeledDataset& ds) {
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.label >= ds.n_classes) {
      throw DatasetError("sample " + std::to_string(i) + " has label " +
                         std::to_string(s.label) + " outside [0, " +
                         std::to_string(ds.n_classes) + ")");
    }
    if (s.features.shape != ds.samples.front().features.shape) {
      throw DatasetError("sample " + std::to_string(i) + " has feature shape " +
                         shape_string(s.features.shape) + ", expected " +
                         shape_string(ds.samples.front().features.shape));
    }
  }
}

}  // namespace siamese
