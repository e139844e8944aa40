#pragma once

// Balanced same-class / different-class pair sampling. Even batch positions
// hold same-class pairs, odd positions different-class pairs, so a batch of
// size B has ceil(B/2) same and floor(B/2) different pairs.
//
// Same-class pair: uniform class, then two distinct uniform members.
// Different-class pair: two distinct uniform classes, one uniform member each.

#include <random>
#include <string>
#include <vector>

#include "siamese/dataset.hpp"
#include "siamese/errors.hpp"

namespace siamese {

struct IndexPair {
  std::size_t a = 0;
  std::size_t b = 0;
  bool same = false;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

struct PairBatch {
  std::vector<IndexPair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  friend bool operator==(const PairBatch&, const PairBatch&) = default;
};

class PairSampler {
 public:
  explicit PairSampler(const LabeledDataset& ds) : by_class_(ds.indices_by_class()) {
    if (ds.n_classes < 2) {
      throw DatasetError("pair sampling needs at least 2 classes, dataset has " +
                         std::to_string(ds.n_classes));
    }
    for (std::size_t k = 0; k < by_class_.size(); ++k) {
      if (by_class_[k].size() < 2) {
        throw DatasetError("class " + std::to_string(k) + " has " +
                           std::to_string(by_class_[k].size()) +
                           " samples; pair sampling needs at least 2");
      }
    }
  }

  std::size_t n_classes() const noexcept { return by_class_.size(); }

  template <typename Rng>
  IndexPair same_pair(Rng& rng) const {
    const auto& members = by_class_[uniform(by_class_.size(), rng)];
    const auto [a, b] = distinct(members.size(), rng);
    return {members[a], members[b], true};
  }

  template <typename Rng>
  IndexPair different_pair(Rng& rng) const {
    const auto [ka, kb] = distinct(by_class_.size(), rng);
    const auto& ma = by_class_[ka];
    const auto& mb = by_class_[kb];
    const std::size_t a = ma[uniform(ma.size(), rng)];
    const std::size_t b = mb[uniform(mb.size(), rng)];
    return {a, b, false};
  }

  template <typename Rng>
  PairBatch sample(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0) throw DomainError("batch size must be positive");
    PairBatch batch;
    batch.pairs.reserve(batch_size);
    for (std::size_t p = 0; p < batch_size; ++p) {
      batch.pairs.push_back(p % 2 == 0 ? same_pair(rng) : different_pair(rng));
    }
    return batch;
  }

 private:
  template <typename Rng>
  static std::size_t uniform(std::size_t n, Rng& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  // Two distinct indices in [0, n), uniform over ordered pairs.
  template <typename Rng>
  static std::pair<std::size_t, std::size_t> distinct(std::size_t n, Rng& rng) {
    const std::size_t a = uniform(n, rng);
    std::size_t b = uniform(n - 1, rng);
    if (b >= a) ++b;
    return {a, b};
  }

  std::vector<std::vector<std::size_t>> by_class_;
};

template <typename Rng>
PairBatch sample_pairs(const LabeledDataset& ds, std::size_t batch_size, Rng& rng) {
  return PairSampler(ds).sample(batch_size, rng);
}

}  // namespace siamese
