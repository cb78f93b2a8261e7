/* Copyright 2026 The IDA Lab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "ida/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ida/util.hpp"

namespace ida::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "unknown";
}

namespace {

ad::Tensor activate(const ad::Tensor& x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return ad::relu(x);
    case Activation::sigmoid: return ad::sigmoid(x);
    case Activation::softmax: return ad::softmax(x);
  }
  throw std::invalid_argument("unknown activation");
}

}  // namespace

Mlp::Mlp(MlpSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  if (spec_.layer_sizes.size() < 2) {
    throw std::invalid_argument("mlp: need at least two layer sizes");
  }
  for (std::size_t s : spec_.layer_sizes) {
    if (s == 0) throw std::invalid_argument("mlp: layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < spec_.layer_sizes.size(); ++l) {
    const std::size_t fan_in = spec_.layer_sizes[l];
    const std::size_t fan_out = spec_.layer_sizes[l + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = dist(rng);
    layers_.push_back({ad::Tensor({fan_in, fan_out}, std::move(w)),
                       ad::Tensor::zeros({1, fan_out})});
  }
}

Mlp Mlp::bind(ad::Tape& tape) const {
  Mlp out;
  out.spec_ = spec_;
  out.layers_.reserve(layers_.size());
  for (const Linear& l : layers_) {
    out.layers_.push_back({tape.leaf(l.weight), tape.leaf(l.bias)});
  }
  return out;
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
  return forward_range(x, 0, layers_.size());
}

ad::Tensor Mlp::forward_range(const ad::Tensor& x, std::size_t begin,
                              std::size_t end) const {
  if (begin > end || end > layers_.size()) {
    throw std::out_of_range("mlp: bad layer range");
  }
  if (begin < end && x.cols() != spec_.layer_sizes[begin]) {
    throw ad::ShapeError("mlp: input width " + std::to_string(x.cols()) +
                         " does not match layer width " +
                         std::to_string(spec_.layer_sizes[begin]));
  }
  ad::Tensor h = x;
  for (std::size_t l = begin; l < end; ++l) {
    const Linear& layer = layers_[l];
    h = ad::add(ad::matmul(h, layer.weight),
                ad::broadcast_rows(layer.bias, h.rows()));
    const bool last = l + 1 == layers_.size();
    h = activate(h, last ? spec_.output_activation : spec_.hidden_activation);
  }
  return h;
}

MlpSpec attention_mlp_spec(const AttentionSpec& spec) {
  return MlpSpec{{2 * spec.input_dim, spec.hidden_dim, spec.input_dim},
                 Activation::relu,
                 Activation::sigmoid};
}

ad::Tensor attention_forward(const ad::Tensor& x_a, const ad::Tensor& x_b,
                             const Mlp& attention) {
  if (x_a.shape() != x_b.shape()) {
    throw ad::ShapeError("attention_forward: parent shapes differ " +
                         x_a.shape().str() + " vs " + x_b.shape().str());
  }
  if (2 * x_a.cols() != attention.input_dim() ||
      attention.output_dim() != x_a.cols()) {
    throw ad::ShapeError("attention_forward: feature width " +
                         std::to_string(x_a.cols()) +
                         " does not fit attention module " +
                         std::to_string(attention.input_dim()) + "->" +
                         std::to_string(attention.output_dim()));
  }
  return attention.forward(ad::concat_cols(x_a, x_b));
}

// ---- ModelBundle ------------------------------------------------------------

ModelBundle ModelBundle::bind(ad::Tape& tape) const {
  ModelBundle out = *this;
  out.extractor = extractor.bind(tape);
  out.mapping = mapping.bind(tape);
  out.classifier = classifier.bind(tape);
  out.discriminator = discriminator.bind(tape);
  out.attention = attention.bind(tape);
  return out;
}

namespace {

template <typename Bundle, typename Fn>
void visit(Bundle& b, Fn&& fn) {
  auto each = [&](const char* prefix, auto& mlp) {
    for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
      auto& layer = mlp.layers()[l];
      const std::string base = std::string(prefix) + "." + std::to_string(l);
      fn(base + ".weight", layer.weight);
      fn(base + ".bias", layer.bias);
    }
  };
  each("extractor", b.extractor);
  each("mapping", b.mapping);
  each("classifier", b.classifier);
  each("discriminator", b.discriminator);
  each("attention", b.attention);
}

}  // namespace

void ModelBundle::for_each_parameter(
    const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  visit(*this, fn);
}

void ModelBundle::for_each_parameter(
    const std::function<void(const std::string&, const ad::Tensor&)>& fn)
    const {
  visit(*this, fn);
}

std::size_t ModelBundle::num_parameters() const {
  std::size_t n = 0;
  for_each_parameter(
      [&](const std::string&, const ad::Tensor& t) { n += t.size(); });
  return n;
}

std::uint64_t ModelBundle::parameter_hash() const {
  std::uint64_t h = fnv1a("");
  for_each_parameter([&](const std::string& name, const ad::Tensor& t) {
    h = fnv1a(name, h);
    auto v = t.values();
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()),
                               v.size() * sizeof(double)),
              h);
  });
  return h;
}

ad::Tensor ModelBundle::features(const ad::Tensor& x) const {
  return extractor.forward_range(x, 0, intervention_layer);
}

ad::Tensor ModelBundle::represent(const ad::Tensor& h) const {
  return mapping.forward(
      extractor.forward_range(h, intervention_layer, extractor.num_layers()));
}

ad::Tensor ModelBundle::logits(const ad::Tensor& x) const {
  return classifier.forward(represent(features(x)));
}

ModelBundle init_model(const ArchitectureConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0 || config.num_classes < 2 ||
      config.adaptation_dim == 0 || config.extractor_hidden.empty()) {
    throw std::invalid_argument(
        "init_model: input_dim, adaptation_dim and extractor layers must be "
        "positive and num_classes >= 2");
  }
  const std::size_t e_layers = config.extractor_hidden.size();
  if (config.intervention_layer > e_layers) {
    throw std::invalid_argument(
        "init_model: intervention_layer " +
        std::to_string(config.intervention_layer) +
        " exceeds extractor depth " + std::to_string(e_layers));
  }

  auto rng = make_rng(seed, 0x6d6f64656cull);
  ModelBundle m;

  MlpSpec e{{config.input_dim}, Activation::relu, Activation::relu};
  for (std::size_t h : config.extractor_hidden) e.layer_sizes.push_back(h);
  m.extractor = Mlp(e, rng);

  m.mapping = Mlp({{e.layer_sizes.back(), config.adaptation_dim},
                   Activation::relu,
                   Activation::identity},
                  rng);
  m.classifier = Mlp({{config.adaptation_dim, config.num_classes},
                      Activation::relu,
                      Activation::identity},
                     rng);

  // Emits logits; D = sigmoid(logit).
  MlpSpec d{{config.adaptation_dim}, Activation::relu, Activation::identity};
  for (std::size_t h : config.discriminator_hidden) d.layer_sizes.push_back(h);
  d.layer_sizes.push_back(1);
  m.discriminator = Mlp(d, rng);

  m.intervention_layer =
      config.intervention_layer == 0 ? e_layers : config.intervention_layer;
  const std::size_t n = m.extractor.width(m.intervention_layer);
  m.attention =
      Mlp(attention_mlp_spec({n, config.attention_hidden}), rng);

  // Invariants tying the pieces together.
  if (m.mapping.output_dim() != m.classifier.input_dim()) {
    throw std::invalid_argument("init_model: M output " +
                                std::to_string(m.mapping.output_dim()) +
                                " != C input " +
                                std::to_string(m.classifier.input_dim()));
  }
  if (m.mapping.output_dim() != m.discriminator.input_dim()) {
    throw std::invalid_argument("init_model: M output " +
                                std::to_string(m.mapping.output_dim()) +
                                " != D input " +
                                std::to_string(m.discriminator.input_dim()));
  }
  return m;
}

// ---- persistence ------------------------------------------------------------

namespace {
constexpr const char* kParamHeader = "ida-parameters v1";
}

void save_parameters(const ModelBundle& model,
                     const std::filesystem::path& path) {
  std::ostringstream os;
  os << kParamHeader << "\n";
  model.for_each_parameter([&](const std::string& name, const ad::Tensor& t) {
    os << name << " " << t.rows() << " " << t.cols() << "\n";
    bool first = true;
    for (double v : t.values()) {
      if (!first) os << " ";
      os << format_double(v);
      first = false;
    }
    os << "\n";
  });
  write_file_atomic(path, os.str());
}

void load_parameters(ModelBundle& model, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parameters: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kParamHeader) {
    throw std::runtime_error(path.string() + ": missing '" + kParamHeader +
                             "' header");
  }
  std::size_t line_no = 1;
  model.for_each_parameter([&](const std::string& name, ad::Tensor& t) {
    std::string got;
    std::size_t rows = 0, cols = 0;
    ++line_no;
    if (!std::getline(in, line)) {
      throw std::runtime_error(path.string() + ": missing tensor " + name);
    }
    std::istringstream hs(line);
    if (!(hs >> got >> rows >> cols) || got != name ||
        rows != t.rows() || cols != t.cols()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected '" + name + " " +
                               std::to_string(t.rows()) + " " +
                               std::to_string(t.cols()) + "', got '" + line +
                               "'");
    }
    ++line_no;
    if (!std::getline(in, line)) {
      throw std::runtime_error(path.string() + ": missing values for " + name);
    }
    std::vector<double> values;
    values.reserve(rows * cols);
    std::istringstream vs(line);
    std::string tok;
    while (vs >> tok) {
      try {
        values.push_back(parse_double(tok));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": " + e.what());
      }
    }
    if (values.size() != rows * cols) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(rows * cols) +
                               " values for " + name);
    }
    t = ad::Tensor({rows, cols}, std::move(values));
  });
}

}  // namespace ida::nn
