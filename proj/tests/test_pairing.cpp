#include <gtest/gtest.h>

#include <random>

#include "siamese/data.hpp"
#include "siamese/pairing.hpp"

using namespace siamese;

namespace {

LabeledDataset small_dataset(std::size_t classes, std::size_t per_class) {
  LabeledDataset ds;
  ds.n_classes = classes;
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      ds.samples.push_back({Tensor::vector({static_cast<double>(k), static_cast<double>(i)}), k});
    }
  }
  return ds;
}

}  // namespace

TEST(SamplePairs, BalancedBatch) {
  const auto ds = small_dataset(3, 4);
  std::mt19937_64 rng(1);
  const auto batch = sample_pairs(ds, 4, rng);
  ASSERT_EQ(batch.size(), 4u);
  std::size_t same = 0;
  for (const auto& p : batch.pairs) {
    EXPECT_NE(p.a, p.b);
    same += p.same;
  }
  EXPECT_EQ(same, 2u);
}

TEST(SamplePairs, BalanceAndLabelConsistencyProperty) {
  const auto ds = gen_synthetic({SyntheticMode::blobs, 7, 5, 3, 16, 0.1, 1.0, 9});
  std::mt19937_64 rng(2);
  const PairSampler sampler(ds);
  for (std::size_t b = 1; b <= 41; ++b) {
    const auto batch = sampler.sample(b, rng);
    ASSERT_EQ(batch.size(), b);
    std::size_t same = 0;
    for (const auto& p : batch.pairs) {
      EXPECT_NE(p.a, p.b);
      EXPECT_EQ(p.same, ds.samples[p.a].label == ds.samples[p.b].label);
      same += p.same;
    }
    EXPECT_EQ(same, (b + 1) / 2);
    EXPECT_EQ(b - same, b / 2);
  }
}

TEST(SamplePairs, ClassUniformSameClassSelection) {
  const auto ds = small_dataset(2, 2);
  const PairSampler sampler(ds);
  std::mt19937_64 rng(3);
  const int draws = 100000;
  int class0 = 0;
  for (int i = 0; i < draws; ++i) {
    const auto p = sampler.same_pair(rng);
    if (ds.samples[p.a].label == 0) ++class0;
  }
  EXPECT_NEAR(static_cast<double>(class0) / draws, 0.5, 0.01);
}

TEST(SamplePairs, ClassUniformNotSampleUniform) {
  // Class 0 has 10 members, class 1 and 2 have 2 each.
  LabeledDataset ds;
  ds.n_classes = 3;
  for (int i = 0; i < 10; ++i) ds.samples.push_back({Tensor::vector({0.0}), 0});
  for (std::size_t k = 1; k < 3; ++k) {
    for (int i = 0; i < 2; ++i) ds.samples.push_back({Tensor::vector({1.0}), k});
  }
  const PairSampler sampler(ds);
  std::mt19937_64 rng(4);
  std::array<int, 3> hits{};
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) {
    const auto p = sampler.different_pair(rng);
    ++hits[ds.samples[p.a].label];
    ++hits[ds.samples[p.b].label];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / (2.0 * draws), 1.0 / 3.0, 0.01);
}

TEST(SamplePairs, Deterministic) {
  const auto ds = small_dataset(4, 3);
  std::mt19937_64 a(77);
  std::mt19937_64 b(77);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_pairs(ds, 9, a), sample_pairs(ds, 9, b));
}

TEST(SamplePairs, DatasetErrors) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(sample_pairs(small_dataset(1, 10), 4, rng), DatasetError);
  auto ds = small_dataset(3, 2);
  ds.samples.pop_back();
  EXPECT_THROW(sample_pairs(ds, 4, rng), DatasetError);
  const auto one_class = gen_synthetic({SyntheticMode::blobs, 1, 5, 3, 16, 0.1, 1.0, 9});
  EXPECT_EQ(one_class.size(), 5u);
  EXPECT_THROW(sample_pairs(one_class, 2, rng), DatasetError);
}
