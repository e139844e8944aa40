#pragma once

// Accuracy, exhaustive embedding distance statistics, a PCA projection to
// 2-D for plotting, lambda sweeps and embedding export.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "siamese/accuracy.hpp"
#include "siamese/data.hpp"
#include "siamese/dataset.hpp"
#include "siamese/errors.hpp"
#include "siamese/losses.hpp"
#include "siamese/net.hpp"
#include "siamese/text_io.hpp"
#include "siamese/train.hpp"

namespace siamese {

struct DistanceStats {
  double mean_intra = 0.0;
  double mean_inter = 0.0;
  // mean_inter / mean_intra; +infinity when mean_intra is 0.
  double separability = 0.0;
  double margin_violation_rate = 0.0;  // different-class pairs with d < m
};

struct Metrics {
  double accuracy = 0.0;
  DistanceStats distances;
};

inline std::vector<Tensor> embed_all(const ModelParams& params, const LabeledDataset& ds) {
  std::vector<Tensor> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(forward_features(params, s.features).features);
  return out;
}

/// Statistics over all unordered pairs of the given embeddings.
inline DistanceStats distance_stats(const std::vector<Tensor>& embeddings,
                                    const std::vector<std::size_t>& labels, Margin m) {
  if (embeddings.size() != labels.size()) {
    throw DimensionError("embedding and label counts differ");
  }
  double intra = 0.0;
  double inter = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  std::size_t violations = 0;
  for (std::size_t a = 0; a < embeddings.size(); ++a) {
    for (std::size_t b = a + 1; b < embeddings.size(); ++b) {
      const double d = l2_distance(embeddings[a].values(), embeddings[b].values());
      if (labels[a] == labels[b]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
        if (d < m.value()) ++violations;
      }
    }
  }
  if (n_intra == 0 || n_inter == 0) {
    throw DomainError("distance statistics need at least 2 classes and a class with 2 samples");
  }
  DistanceStats out;
  out.mean_intra = intra / static_cast<double>(n_intra);
  out.mean_inter = inter / static_cast<double>(n_inter);
  out.separability = out.mean_intra == 0.0 ? std::numeric_limits<double>::infinity()
                                           : out.mean_inter / out.mean_intra;
  out.margin_violation_rate = static_cast<double>(violations) / static_cast<double>(n_inter);
  return out;
}

/// Embeds every sample and computes the exhaustive pair statistics.
inline DistanceStats distance_stats(const ModelParams& params, const LabeledDataset& ds,
                                    Margin m) {
  for (const auto& members : ds.indices_by_class()) {
    if (members.size() == 1) {
      throw DomainError("distance statistics need every present class to have 2 samples");
    }
  }
  std::vector<std::size_t> labels;
  labels.reserve(ds.size());
  for (const auto& s : ds.samples) labels.push_back(s.label);
  return distance_stats(embed_all(params, ds), labels, m);
}

inline Metrics evaluate(const ModelParams& params, const LabeledDataset& ds, Margin m) {
  return {accuracy(params, ds), distance_stats(params, ds, m)};
}

/// `key=value` lines: accuracy, mean_intra, mean_inter, separability,
/// margin_violation_rate. An infinite separability prints as `inf`.
inline std::string metrics_to_text(const Metrics& m) {
  std::string out;
  out += "accuracy=" + text::format_double(m.accuracy) + "\n";
  out += "mean_intra=" + text::format_double(m.distances.mean_intra) + "\n";
  out += "mean_inter=" + text::format_double(m.distances.mean_inter) + "\n";
  out += "separability=" + text::format_double(m.distances.separability) + "\n";
  out += "margin_violation_rate=" + text::format_double(m.distances.margin_violation_rate) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// PCA

struct Projection2d {
  std::vector<std::pair<double, double>> points;
  Tensor components;  // (2 x dim), rows are unit principal directions
  double variance[2] = {0.0, 0.0};  // population variance along each component
};

struct PcaOptions {
  double tolerance = 1e-9;
  int max_iterations = 1000;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return n;
}

inline void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& u : basis) {
    const double c = dot(v, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
  }
}

inline void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

}  // namespace detail

/// Projects onto the top two principal components of the centered data,
/// found by power iteration with deflation.
inline Projection2d pca2d(const std::vector<Tensor>& embeddings, PcaOptions opt = {}) {
  const std::size_t n = embeddings.size();
  if (n < 3) throw DomainError("pca2d needs at least 3 points");
  const std::size_t dim = embeddings.front().size();
  if (dim < 2) throw DomainError("pca2d needs dimension >= 2");
  for (const auto& e : embeddings) {
    if (e.size() != dim) throw DimensionError("embeddings have different lengths");
  }

  std::vector<double> mean(dim, 0.0);
  for (const auto& e : embeddings) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += e.data[i];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  std::vector<std::vector<double>> centered(n, std::vector<double>(dim));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < dim; ++i) centered[p][i] = embeddings[p].data[i] - mean[i];
  }

  // Population covariance, (dim x dim).
  std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
  for (const auto& x : centered) {
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) cov[i][j] += x[i] * x[j];
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) cov[i][j] /= static_cast<double>(n);
    trace += cov[i][i];
  }
  if (trace <= 0.0) throw DegenerateInputError("all points are identical");

  auto multiply = [&](const std::vector<double>& v) {
    std::vector<double> out(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) out[i] = detail::dot(cov[i], v);
    return out;
  };

  std::vector<std::vector<double>> basis;
  Projection2d result;
  result.components = Tensor({2, dim});
  for (int k = 0; k < 2; ++k) {
    // Start from the covariance column with the largest residual norm.
    std::vector<double> v;
    double best = -1.0;
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> col(dim);
      for (std::size_t i = 0; i < dim; ++i) col[i] = cov[i][j];
      detail::orthogonalize(col, basis);
      const double norm = detail::dot(col, col);
      if (norm > best) {
        best = norm;
        v = std::move(col);
      }
    }
    if (detail::normalize(v) <= 1e-14 * trace) {
      // No variance left: any unit direction orthogonal to the basis will do.
      for (std::size_t j = 0; j < dim; ++j) {
        v.assign(dim, 0.0);
        v[j] = 1.0;
        detail::orthogonalize(v, basis);
        if (detail::normalize(v) > 0.5) break;
      }
    } else {
      for (int it = 0; it < opt.max_iterations; ++it) {
        auto w = multiply(v);
        detail::orthogonalize(w, basis);
        if (detail::normalize(w) == 0.0) break;
        double delta = 0.0;
        for (std::size_t i = 0; i < dim; ++i) delta += (w[i] - v[i]) * (w[i] - v[i]);
        v = std::move(w);
        if (std::sqrt(delta) < opt.tolerance) break;
      }
    }
    detail::fix_sign(v);
    for (std::size_t i = 0; i < dim; ++i) result.components.at(k, i) = v[i];
    basis.push_back(std::move(v));
  }

  result.points.reserve(n);
  for (const auto& x : centered) {
    result.points.emplace_back(detail::dot(x, basis[0]), detail::dot(x, basis[1]));
  }
  for (const auto& [px, py] : result.points) {
    result.variance[0] += px * px;
    result.variance[1] += py * py;
  }
  result.variance[0] /= static_cast<double>(n);
  result.variance[1] /= static_cast<double>(n);
  return result;
}

// ---------------------------------------------------------------------------
// Embedding export

/// CSV `id,label,e0,...,e{E-1}` plus `px,py` when with_pca is set.
inline std::string embeddings_to_csv(const ModelParams& params, const LabeledDataset& ds,
                                     bool with_pca) {
  const auto emb = embed_all(params, ds);
  const std::size_t dim = params.embed_dim();
  std::string out = "id,label";
  for (std::size_t d = 0; d < dim; ++d) out += ",e" + std::to_string(d);
  if (with_pca) out += ",px,py";
  out += '\n';
  Projection2d proj;
  if (with_pca && !emb.empty()) proj = pca2d(emb);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(ds.samples[i].label);
    for (double v : emb[i].data) out += "," + text::format_double(v);
    if (with_pca) {
      out += "," + text::format_double(proj.points[i].first) + "," +
             text::format_double(proj.points[i].second);
    }
    out += '\n';
  }
  return out;
}

inline void export_embeddings(const ModelParams& params, const LabeledDataset& ds,
                              const std::string& path, bool with_pca = false) {
  text::write_file(path, embeddings_to_csv(params, ds, with_pca));
}

// ---------------------------------------------------------------------------
// Lambda sweep

struct SweepRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double separability = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty when the run succeeded

  bool ok() const noexcept { return error.empty(); }
};

/// Trains one model per (lambda, seed) on `train`, evaluates on `test`.
/// Both sets are centered on the training mean first. Lambda 0 is prepended
/// when absent. Rows come out lambda-major in input order. Cells run on up
/// to `threads` workers (0 = hardware concurrency) and are independent.
inline std::vector<SweepRow> lambda_sweep(LabeledDataset train_set, LabeledDataset test_set,
                                          const TrainConfig& cfg, std::vector<double> lambdas,
                                          const std::vector<std::uint64_t>& seeds,
                                          unsigned threads = 0) {
  if (lambdas.empty()) throw DomainError("lambda list is empty");
  if (seeds.empty()) throw DomainError("seed list is empty");
  for (double l : lambdas) check_lambda(l);
  if (std::find(lambdas.begin(), lambdas.end(), 0.0) == lambdas.end()) {
    lambdas.insert(lambdas.begin(), 0.0);
  }
  normalize_mean(train_set, {&test_set});
  const Margin margin(cfg.margin);

  std::vector<SweepRow> rows;
  for (double l : lambdas) {
    for (auto s : seeds) {
      SweepRow row;
      row.lambda = l;
      row.seed = s;
      rows.push_back(row);
    }
  }
  auto run_cell = [&](SweepRow& row) {
    try {
      TrainConfig c = cfg;
      c.lambda = row.lambda;
      c.seed = row.seed;
      const auto trained = train(train_set, c);
      row.accuracy = accuracy(trained.params, test_set);
      row.separability = distance_stats(trained.params, test_set, margin).separability;
    } catch (const Error& e) {
      row.error = e.what();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
  if (threads <= 1) {
    for (auto& row : rows) run_cell(row);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) run_cell(rows[i]);
    });
  }
  workers.clear();
  return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "lambda,seed,accuracy,separability\n";
  for (const auto& r : rows) {
    out += text::format_double(r.lambda) + "," + std::to_string(r.seed) + "," +
           text::format_double(r.accuracy) + "," + text::format_double(r.separability) + "\n";
  }
  return out;
}

}  // namespace siamese
