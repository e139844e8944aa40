#pragma once

// Synthetic datasets, the CSV dataset format, mean normalization and the
// crop/mirror image augmentation.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "siamese/dataset.hpp"
#include "siamese/errors.hpp"
#include "siamese/tensor.hpp"
#include "siamese/text_io.hpp"

namespace siamese {

enum class SyntheticMode { blobs, textures };

struct SyntheticSpec {
  SyntheticMode mode = SyntheticMode::blobs;
  std::size_t n_classes = 8;
  std::size_t per_class = 100;
  std::size_t dim = 16;   // blobs
  std::size_t side = 16;  // textures
  double spread = 0.5;
  double separation = 4.0;
  std::uint64_t seed = 42;
};

inline void validate_spec(const SyntheticSpec& spec) {
  if (spec.n_classes == 0) throw SpecError("n_classes must be positive");
  if (spec.per_class < 2) throw SpecError("per_class must be at least 2");
  if (spec.mode == SyntheticMode::blobs && spec.dim < 2) {
    throw SpecError("blobs need dim >= 2");
  }
  if (spec.mode == SyntheticMode::textures && spec.side < 8) {
    throw SpecError("textures need side >= 8");
  }
  if (!(spec.spread >= 0.0) || !std::isfinite(spec.spread)) {
    throw SpecError("spread must be a non-negative finite number");
  }
  if (!(spec.separation > 0.0) || !std::isfinite(spec.separation)) {
    throw SpecError("separation must be a positive finite number");
  }
}

namespace detail {

inline LabeledDataset gen_blobs(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> centers(spec.n_classes, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : c) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (double& v : c) v *= spec.separation / norm;
  }
  LabeledDataset ds;
  ds.n_classes = spec.n_classes;
  ds.samples.reserve(spec.n_classes * spec.per_class);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      std::vector<double> x(spec.dim);
      for (std::size_t d = 0; d < spec.dim; ++d) {
        x[d] = centers[k][d] + spec.spread * normal(rng);
      }
      ds.samples.push_back({Tensor::vector(std::move(x)), k});
    }
  }
  return ds;
}

// Class k is a plane wave with orientation pi*k/n_classes and 2 + (k mod 3)
// cycles across the image, at amplitude `separation` and a random phase per
// sample, plus pixel noise of std `spread`. Images are stored flattened.
inline LabeledDataset gen_textures(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  const std::size_t side = spec.side;
  LabeledDataset ds;
  ds.n_classes = spec.n_classes;
  ds.samples.reserve(spec.n_classes * spec.per_class);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    const double theta = std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(spec.n_classes);
    const double cycles = 2.0 + static_cast<double>(k % 3);
    const double omega = 2.0 * std::numbers::pi * cycles / static_cast<double>(side);
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      const double phase = phase_dist(rng);
      std::vector<double> img(side * side);
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
          const double u = static_cast<double>(c) * std::cos(theta) +
                           static_cast<double>(r) * std::sin(theta);
          img[r * side + c] = spec.separation * std::sin(omega * u + phase) +
                              spec.spread * normal(rng);
        }
      }
      ds.samples.push_back({Tensor::vector(std::move(img)), k});
    }
  }
  return ds;
}

}  // namespace detail

/// Deterministic in spec.seed. Samples are ordered class by class.
inline LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  return spec.mode == SyntheticMode::blobs ? detail::gen_blobs(spec)
                                           : detail::gen_textures(spec);
}

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Per-class seeded split: round(n_k * test_fraction) samples of each class
/// go to the test set. Both halves keep the original sample order.
inline DatasetSplit split_dataset(const LabeledDataset& ds, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw DomainError("test fraction must lie in [0, 1)");
  }
  validate_dataset(ds);
  std::mt19937_64 rng(seed);
  std::vector<bool> to_test(ds.size(), false);
  for (auto members : ds.indices_by_class()) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(members.size()) * test_fraction));
    for (std::size_t i = 0; i < n_test; ++i) to_test[members[i]] = true;
  }
  DatasetSplit out;
  out.train.n_classes = out.test.n_classes = ds.n_classes;
  out.train.mean = out.test.mean = ds.mean;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (to_test[i] ? out.test : out.train).samples.push_back(ds.samples[i]);
  }
  return out;
}

// CSV layout: header `label,x0,...,x{D-1}` then one row per sample. Numbers
// use the shortest representation that round-trips exactly. Features load
// back as flat vectors; n_classes on load is max(label) + 1.

inline std::string to_csv(const LabeledDataset& ds) {
  validate_dataset(ds);
  std::string out = "label";
  for (std::size_t d = 0; d < ds.feature_size(); ++d) out += ",x" + std::to_string(d);
  out += '\n';
  for (const auto& s : ds.samples) {
    out += std::to_string(s.label);
    for (double v : s.features.data) {
      out += ',';
      out += text::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline void save_csv(const LabeledDataset& ds, const std::string& path) {
  text::write_file(path, to_csv(ds));
}

inline LabeledDataset parse_csv(const std::vector<std::string>& lines) {
  if (lines.empty()) throw ParseError("missing header", 1);
  const auto header = text::split(lines[0], ',');
  if (header.front() != "label") throw ParseError("header must start with 'label'", 1);
  const std::size_t width = header.size();
  for (std::size_t d = 1; d < width; ++d) {
    if (header[d] != "x" + std::to_string(d - 1)) {
      throw ParseError("unexpected column name '" + std::string(header[d]) + "'", 1);
    }
  }
  LabeledDataset ds;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      throw ParseError("empty row", i + 1);
    }
    const auto cells = text::split(lines[i], ',');
    if (cells.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " cells, found " +
                       std::to_string(cells.size()), i + 1);
    }
    if (width < 2) throw ParseError("rows need at least one feature column", i + 1);
    const auto label = text::parse_int<std::size_t>(cells[0]);
    if (!label) throw ParseError("label '" + std::string(cells[0]) + "' is not a class index", i + 1);
    std::vector<double> x(width - 1);
    for (std::size_t d = 1; d < width; ++d) {
      const auto v = text::parse_double(cells[d]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("cell '" + std::string(cells[d]) + "' is not a finite number", i + 1);
      }
      x[d - 1] = *v;
    }
    ds.n_classes = std::max(ds.n_classes, *label + 1);
    ds.samples.push_back({Tensor::vector(std::move(x)), *label});
  }
  return ds;
}

inline LabeledDataset load_csv(const std::string& path) {
  return parse_csv(text::read_lines(path));
}

/// Subtracts `mean` from every sample and records it in ds.mean.
inline void apply_mean(LabeledDataset& ds, const Tensor& mean) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& x = ds.samples[i].features.data;
    if (x.size() != mean.size()) {
      throw DimensionError("sample " + std::to_string(i) + " has " +
                           std::to_string(x.size()) + " features, mean has " +
                           std::to_string(mean.size()));
    }
    for (std::size_t d = 0; d < x.size(); ++d) x[d] -= mean.data[d];
  }
  ds.mean = mean;
}

/// Adds the stored mean back, undoing apply_mean.
inline void restore_mean(LabeledDataset& ds) {
  if (ds.mean.size() == 0) return;
  for (auto& s : ds.samples) {
    for (std::size_t d = 0; d < s.features.size(); ++d) s.features.data[d] += ds.mean.data[d];
  }
  ds.mean = Tensor();
}

inline Tensor feature_mean(const LabeledDataset& ds) {
  if (ds.empty()) throw DomainError("cannot take the mean of an empty dataset");
  validate_dataset(ds);
  Tensor mean = Tensor::zeros_like(ds.samples.front().features);
  for (const auto& s : ds.samples) {
    for (std::size_t d = 0; d < mean.size(); ++d) mean.data[d] += s.features.data[d];
  }
  const auto n = static_cast<double>(ds.size());
  for (double& v : mean.data) v /= n;
  return mean;
}

/// Centers `train` on its own per-feature mean and applies that same mean to
/// every dataset in `others`. Returns the mean.
inline Tensor normalize_mean(LabeledDataset& train, std::vector<LabeledDataset*> others = {}) {
  const Tensor mean = feature_mean(train);
  for (const auto* ds : others) {
    if (!ds->empty() && ds->samples.front().features.shape != mean.shape) {
      throw DimensionError("dataset feature shape " +
                           shape_string(ds->samples.front().features.shape) +
                           " differs from training shape " + shape_string(mean.shape));
    }
  }
  apply_mean(train, mean);
  for (auto* ds : others) apply_mean(*ds, mean);
  return mean;
}

/// Views a flat square-length vector as a (side x side) image.
inline Tensor as_image(const Tensor& flat) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
  if (side * side != flat.size()) {
    throw DimensionError("length " + std::to_string(flat.size()) + " is not a square");
  }
  return Tensor({side, side}, flat.data);
}

/// Random (crop_side x crop_side) window at a uniform offset, mirrored
/// left-right with probability 1/2. Draws row offset, column offset, then
/// the mirror coin.
template <typename Rng>
Tensor augment(const Tensor& image, std::size_t crop_side, Rng& rng) {
  if (image.rank() != 2 || image.rows() != image.cols()) {
    throw DimensionError("augment expects a square image, got " + shape_string(image.shape));
  }
  const std::size_t side = image.rows();
  if (crop_side == 0 || crop_side > side) {
    throw DimensionError("crop side " + std::to_string(crop_side) +
                         " does not fit image side " + std::to_string(side));
  }
  std::uniform_int_distribution<std::size_t> offset(0, side - crop_side);
  const std::size_t r0 = offset(rng);
  const std::size_t c0 = offset(rng);
  const bool mirror = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  Tensor out({crop_side, crop_side});
  for (std::size_t r = 0; r < crop_side; ++r) {
    for (std::size_t c = 0; c < crop_side; ++c) {
      const std::size_t src_c = mirror ? c0 + crop_side - 1 - c : c0 + c;
      out.at(r, c) = image.at(r0 + r, src_c);
    }
  }
  return out;
}

}  // namespace siamese
