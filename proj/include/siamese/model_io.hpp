#pragma once

// Model checkpoint file. Line-oriented text, every number in shortest
// round-trip decimal form:
//
//   siamese-model 1
//   n_classes <K>
//   layers <L>
//   dense <in> <out>          (one line per layer; relu lines are `relu <dim>`)
//   input_mean <D>            (or `input_mean 0` when the model has no mean)
//   <D values>
//   dense<i>.weights <in> <out>
//   <in*out values, row-major>
//   dense<i>.bias <out>
//   <out values>
//   classifier.weights <E> <K>
//   <E*K values>
//   classifier.bias <K>
//   <K values>
//
// Values on a line are separated by single spaces.

#include <sstream>
#include <string>
#include <vector>

#include "siamese/errors.hpp"
#include "siamese/net.hpp"
#include "siamese/text_io.hpp"

namespace siamese {

inline constexpr int kCheckpointVersion = 1;

/// Parameters plus the input mean subtracted before the first layer.
struct Checkpoint {
  ModelParams params;
  Tensor input_mean;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

inline void append_values(std::string& out, const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ' ';
    out += text::format_double(t.data[i]);
  }
  out += '\n';
}

inline void append_tensor(std::string& out, const std::string& name, const Tensor& t) {
  out += name;
  for (std::size_t d : t.shape) out += ' ' + std::to_string(d);
  out += '\n';
  append_values(out, t);
}

class CheckpointReader {
 public:
  explicit CheckpointReader(std::vector<std::string> lines) : lines_(std::move(lines)) {}

  std::vector<std::string_view> next_fields() {
    if (pos_ >= lines_.size()) throw ParseError("unexpected end of file", pos_ + 1);
    ++pos_;
    auto fields = text::split(lines_[pos_ - 1], ' ');
    return fields;
  }

  std::size_t expect_count(std::string_view field) {
    const auto v = text::parse_int<std::size_t>(field);
    if (!v) throw ParseError("expected a count, found '" + std::string(field) + "'", pos_);
    return *v;
  }

  void expect_word(std::string_view got, std::string_view want) {
    if (got != want) {
      throw ParseError("expected '" + std::string(want) + "', found '" + std::string(got) + "'",
                       pos_);
    }
  }

  Tensor read_tensor(const std::string& name, const Shape& shape) {
    auto header = next_fields();
    expect_word(header.front(), name);
    if (header.size() != shape.size() + 1) throw ParseError("bad shape for " + name, pos_);
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (expect_count(header[d + 1]) != shape[d]) {
        throw ParseError("shape of " + name + " disagrees with the layer list", pos_);
      }
    }
    return Tensor(shape, read_values(shape_size(shape)));
  }

  std::vector<double> read_values(std::size_t n) {
    auto fields = next_fields();
    if (fields.size() != n) {
      throw ParseError("expected " + std::to_string(n) + " values, found " +
                       std::to_string(fields.size()), pos_);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = text::parse_double(fields[i]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("value '" + std::string(fields[i]) + "' is not a finite number", pos_);
      }
      out[i] = *v;
    }
    return out;
  }

  bool at_end() const {
    for (std::size_t i = pos_; i < lines_.size(); ++i) {
      if (!text::trim(lines_[i]).empty()) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  validate_params(p);
  std::string out = "siamese-model " + std::to_string(kCheckpointVersion) + "\n";
  out += "n_classes " + std::to_string(p.n_classes()) + "\n";
  out += "layers " + std::to_string(p.layers.size()) + "\n";
  for (const auto& l : p.layers) {
    if (l.kind == LayerKind::dense) {
      out += "dense " + std::to_string(l.in_dim) + " " + std::to_string(l.out_dim) + "\n";
    } else {
      out += "relu " + std::to_string(l.in_dim) + "\n";
    }
  }
  out += "input_mean " + std::to_string(ckpt.input_mean.size()) + "\n";
  if (ckpt.input_mean.size() > 0) detail::append_values(out, ckpt.input_mean);
  for (std::size_t i = 0; i < p.dense.size(); ++i) {
    detail::append_tensor(out, "dense" + std::to_string(i) + ".weights", p.dense[i].weights);
    detail::append_tensor(out, "dense" + std::to_string(i) + ".bias", p.dense[i].bias);
  }
  detail::append_tensor(out, "classifier.weights", p.classifier_weights);
  detail::append_tensor(out, "classifier.bias", p.classifier_bias);
  return out;
}

inline Checkpoint parse_checkpoint(std::vector<std::string> lines) {
  detail::CheckpointReader in(std::move(lines));
  auto f = in.next_fields();
  in.expect_word(f.front(), "siamese-model");
  if (f.size() != 2 || in.expect_count(f[1]) != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version", 1);
  }
  f = in.next_fields();
  in.expect_word(f.front(), "n_classes");
  const std::size_t n_classes = in.expect_count(f.at(1));
  f = in.next_fields();
  in.expect_word(f.front(), "layers");
  const std::size_t n_layers = in.expect_count(f.at(1));

  Checkpoint ckpt;
  auto& p = ckpt.params;
  for (std::size_t l = 0; l < n_layers; ++l) {
    f = in.next_fields();
    if (f.front() == "dense" && f.size() == 3) {
      p.layers.push_back(LayerSpec::dense(in.expect_count(f[1]), in.expect_count(f[2])));
    } else if (f.front() == "relu" && f.size() == 2) {
      p.layers.push_back(LayerSpec::relu(in.expect_count(f[1])));
    } else {
      throw ParseError("unknown layer line", 4 + l);
    }
  }
  try {
    validate_layers(p.layers);
  } catch (const SpecError& e) {
    throw ParseError(e.what(), 3);
  }
  if (n_classes == 0) throw ParseError("n_classes must be positive", 2);

  f = in.next_fields();
  in.expect_word(f.front(), "input_mean");
  const std::size_t mean_len = in.expect_count(f.at(1));
  if (mean_len > 0) ckpt.input_mean = Tensor::vector(in.read_values(mean_len));

  std::size_t d = 0;
  for (const auto& l : p.layers) {
    if (l.kind != LayerKind::dense) continue;
    const auto prefix = "dense" + std::to_string(d++);
    DenseParams dp;
    dp.weights = in.read_tensor(prefix + ".weights", {l.in_dim, l.out_dim});
    dp.bias = in.read_tensor(prefix + ".bias", {l.out_dim});
    p.dense.push_back(std::move(dp));
  }
  p.classifier_weights = in.read_tensor("classifier.weights", {p.embed_dim(), n_classes});
  p.classifier_bias = in.read_tensor("classifier.bias", {n_classes});
  if (!in.at_end()) throw ParseError("trailing content after classifier.bias", 0);
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  text::write_file(path, serialize_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(text::read_lines(path));
}

}  // namespace siamese
