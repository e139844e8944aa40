#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "siamese/data.hpp"
#include "siamese/text_io.hpp"

using namespace siamese;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("siamese_test_" + name)).string();
}

SyntheticSpec blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                    double separation, std::uint64_t seed) {
  SyntheticSpec s;
  s.mode = SyntheticMode::blobs;
  s.n_classes = classes;
  s.per_class = per_class;
  s.dim = dim;
  s.spread = spread;
  s.separation = separation;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(GenSynthetic, CountsAndDeterminism) {
  const auto spec = blobs(5, 7, 3, 0.5, 2.0, 11);
  const auto a = gen_synthetic(spec);
  EXPECT_EQ(a.size(), 35u);
  EXPECT_EQ(a.n_classes, 5u);
  EXPECT_EQ(a, gen_synthetic(spec));
  auto other = spec;
  other.seed = 12;
  EXPECT_NE(a, gen_synthetic(other));
}

TEST(GenSynthetic, ZeroSpreadCollapsesClasses) {
  const auto ds = gen_synthetic(blobs(3, 4, 5, 0.0, 2.0, 1));
  for (const auto& s : ds.samples) {
    const auto& first = ds.samples[s.label * 4].features;
    EXPECT_EQ(s.features, first);
    EXPECT_NEAR(l2_distance(first.values(), Tensor::zeros_like(first).values()), 2.0, 1e-12);
  }
}

TEST(GenSynthetic, InvalidSpecs) {
  EXPECT_THROW(gen_synthetic(blobs(3, 1, 5, 0.5, 2.0, 1)), SpecError);
  EXPECT_THROW(gen_synthetic(blobs(3, 4, 1, 0.5, 2.0, 1)), SpecError);
  EXPECT_THROW(gen_synthetic(blobs(0, 4, 5, 0.5, 2.0, 1)), SpecError);
  EXPECT_THROW(gen_synthetic(blobs(3, 4, 5, -0.1, 2.0, 1)), SpecError);
  SyntheticSpec tex;
  tex.mode = SyntheticMode::textures;
  tex.side = 7;
  EXPECT_THROW(gen_synthetic(tex), SpecError);
}

TEST(GenSynthetic, TexturesAreSquareImages) {
  SyntheticSpec tex;
  tex.mode = SyntheticMode::textures;
  tex.n_classes = 3;
  tex.per_class = 4;
  tex.side = 10;
  tex.spread = 0.1;
  tex.separation = 1.0;
  const auto ds = gen_synthetic(tex);
  ASSERT_EQ(ds.size(), 12u);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.features.size(), 100u);
    EXPECT_EQ(as_image(s.features).shape, (Shape{10, 10}));
  }
}

// Brute-force 1-NN on raw features: the acceptance dataset is learnable.
TEST(GenSynthetic, AcceptanceBlobsAreNearestNeighbourSeparable) {
  const auto ds = gen_synthetic(blobs(8, 100, 16, 0.5, 4.0, 42));
  const auto split = split_dataset(ds, 0.2, 42);
  ASSERT_EQ(split.test.size(), 160u);
  std::size_t correct = 0;
  for (const auto& q : split.test.samples) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t label = 0;
    for (const auto& r : split.train.samples) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < 16; ++k) {
        const double diff = q.features[k] - r.features[k];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        label = r.label;
      }
    }
    correct += label == q.label;
  }
  EXPECT_GT(static_cast<double>(correct) / 160.0, 0.95);
}

TEST(SplitDataset, StratifiedAndDisjoint) {
  const auto ds = gen_synthetic(blobs(4, 10, 3, 0.5, 2.0, 3));
  const auto split = split_dataset(ds, 0.2, 9);
  EXPECT_EQ(split.train.size(), 32u);
  EXPECT_EQ(split.test.size(), 8u);
  for (const auto& members : split.test.indices_by_class()) EXPECT_EQ(members.size(), 2u);
  for (const auto& t : split.test.samples) {
    EXPECT_EQ(std::count(split.train.samples.begin(), split.train.samples.end(), t), 0);
  }
}

TEST(Csv, FormatDefinition) {
  LabeledDataset ds;
  ds.n_classes = 4;
  ds.samples.push_back({Tensor::vector({0.5, -1}), 3});
  EXPECT_EQ(to_csv(ds), "label,x0,x1\n3,0.5,-1\n");
}

TEST(Csv, EmptyDatasetIsHeaderOnly) {
  const auto path = temp_path("empty.csv");
  save_csv(LabeledDataset{}, path);
  EXPECT_EQ(text::read_lines(path), std::vector<std::string>{"label"});
  const auto back = load_csv(path);
  EXPECT_TRUE(back.empty());
  std::remove(path.c_str());
}

TEST(Csv, RoundTripIsExact) {
  const auto ds = gen_synthetic(blobs(3, 9, 6, 1.3, 2.5, 5));
  const auto path = temp_path("roundtrip.csv");
  save_csv(ds, path);
  EXPECT_EQ(load_csv(path), ds);
  std::remove(path.c_str());
}

TEST(Csv, ParseErrorsCarryLineNumbers) {
  auto expect_line = [](std::vector<std::string> lines, std::size_t line) {
    try {
      parse_csv(lines);
      FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line);
    }
  };
  expect_line({"label,x0", "1,2", "1,abc"}, 3);
  expect_line({"label,x0,x1", "1,2,3", "1,2"}, 3);
  expect_line({"label,x0", "-1,2"}, 2);
  expect_line({"lbl,x0"}, 1);
  expect_line({"label,x0", "1,nan"}, 2);
}

TEST(NormalizeMean, Arithmetic) {
  LabeledDataset train;
  train.n_classes = 1;
  train.samples = {{Tensor::vector({1, 1}), 0}, {Tensor::vector({3, 3}), 0}};
  const auto mean = normalize_mean(train);
  EXPECT_EQ(mean, Tensor::vector({2, 2}));
  EXPECT_EQ(train.samples[0].features, Tensor::vector({-1, -1}));
  EXPECT_EQ(train.samples[1].features, Tensor::vector({1, 1}));
  EXPECT_EQ(train.mean, mean);
}

TEST(NormalizeMean, CenteredDataUnchanged) {
  LabeledDataset train;
  train.n_classes = 1;
  train.samples = {{Tensor::vector({-0.5, 2}), 0}, {Tensor::vector({0.5, -2}), 0}};
  const auto before = train.samples;
  normalize_mean(train);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t d = 0; d < 2; ++d) {
      EXPECT_NEAR(train.samples[i].features[d], before[i].features[d], 1e-12);
    }
  }
}

TEST(NormalizeMean, TestSetUsesTrainingMean) {
  auto train = gen_synthetic(blobs(3, 10, 4, 0.5, 2.0, 1));
  auto test = gen_synthetic(blobs(3, 10, 4, 0.5, 2.0, 1));
  for (auto& s : test.samples) {
    for (double& v : s.features.data) v += 10.0;
  }
  const auto original_test = test;
  const auto mean = normalize_mean(train, {&test});
  const auto train_mean_after = feature_mean(train);
  for (double v : train_mean_after.data) EXPECT_NEAR(v, 0.0, 1e-10);
  EXPECT_EQ(test.mean, mean);
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t d = 0; d < 4; ++d) {
      EXPECT_EQ(test.samples[i].features[d], original_test.samples[i].features[d] - mean[d]);
    }
  }
  // The test set keeps its +10 offset: it was not centered on its own mean.
  for (double v : feature_mean(test).data) EXPECT_NEAR(v, 10.0, 1.0);
}

TEST(NormalizeMean, InvertibleAndShapeChecked) {
  const auto original = gen_synthetic(blobs(3, 10, 4, 0.5, 2.0, 8));
  auto ds = original;
  normalize_mean(ds);
  restore_mean(ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t d = 0; d < 4; ++d) {
      EXPECT_NEAR(ds.samples[i].features[d], original.samples[i].features[d], 1e-12);
    }
  }
  auto other = gen_synthetic(blobs(3, 10, 5, 0.5, 2.0, 8));
  EXPECT_THROW(normalize_mean(ds, {&other}), DimensionError);
  LabeledDataset empty;
  EXPECT_THROW(normalize_mean(empty), DomainError);
}

TEST(Augment, FullCropOnlyMirrors) {
  const Tensor img({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor mirrored({3, 3}, {3, 2, 1, 6, 5, 4, 9, 8, 7});
  std::mt19937_64 rng(1);
  int mirrors = 0;
  for (int i = 0; i < 200; ++i) {
    const auto out = augment(img, 3, rng);
    if (out == mirrored) {
      ++mirrors;
    } else {
      EXPECT_EQ(out, img);
    }
  }
  EXPECT_GT(mirrors, 60);
  EXPECT_LT(mirrors, 140);
}

TEST(Augment, MirrorDefinition) {
  const Tensor img({2, 2}, {1, 2, 3, 4});
  std::mt19937_64 rng(0);
  bool saw_mirror = false;
  for (int i = 0; i < 50 && !saw_mirror; ++i) {
    const auto out = augment(img, 2, rng);
    if (out != img) {
      EXPECT_EQ(out, Tensor({2, 2}, {2, 1, 4, 3}));
      saw_mirror = true;
    }
  }
  EXPECT_TRUE(saw_mirror);
}

TEST(Augment, MirrorPreservesValueMultiset) {
  std::mt19937_64 rng(4);
  std::vector<double> values(25);
  for (std::size_t i = 0; i < 25; ++i) values[i] = static_cast<double>(i * i % 7);
  const Tensor img({5, 5}, values);
  auto sorted = values;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) {
    auto out = augment(img, 5, rng).data;
    std::sort(out.begin(), out.end());
    EXPECT_EQ(out, sorted);
  }
}

// Each pixel value encodes its position, so the crop origin is the value of
// the output's top-left corner (or top-right when mirrored).
TEST(Augment, CropOffsetsUniform) {
  const std::size_t side = 8;
  const std::size_t crop = 5;
  std::vector<double> values(side * side);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i);
  const Tensor img({side, side}, values);
  std::mt19937_64 rng(10);
  const int draws = 10000;
  const std::size_t range = side - crop + 1;
  std::vector<int> row_hits(range, 0);
  std::vector<int> col_hits(range, 0);
  for (int i = 0; i < draws; ++i) {
    const auto out = augment(img, crop, rng);
    const auto left = static_cast<std::size_t>(std::min(out.at(0, 0), out.at(0, crop - 1)));
    ++row_hits[left / side];
    ++col_hits[left % side];
  }
  for (std::size_t o = 0; o < range; ++o) {
    EXPECT_NEAR(static_cast<double>(row_hits[o]) / draws, 1.0 / range, 0.02);
    EXPECT_NEAR(static_cast<double>(col_hits[o]) / draws, 1.0 / range, 0.02);
  }
}

TEST(Augment, Errors) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(augment(Tensor({3, 3}), 4, rng), DimensionError);
  EXPECT_THROW(augment(Tensor({3, 2}), 2, rng), DimensionError);
}

TEST(Augment, Deterministic) {
  const auto img = as_image(gen_synthetic({SyntheticMode::textures, 1, 2, 0, 12, 0.3, 1.0, 5})
                                .samples[0]
                                .features);
  std::mt19937_64 a(3);
  std::mt19937_64 b(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(augment(img, 9, a), augment(img, 9, b));
}
