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

// Multilayer perceptrons for the extractor E, invariant mapping M,
// classifier C, domain discriminator D, and the intervention attention W.

#ifndef IDA_NN_HPP_
#define IDA_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ida/autodiff.hpp"

namespace ida::nn {

enum class Activation { identity, relu, sigmoid, softmax };

std::string to_string(Activation a);

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::identity;
};

struct Linear {
  ad::Tensor weight;  // fan_in x fan_out
  ad::Tensor bias;    // 1 x fan_out
};

class Mlp {
 public:
  Mlp() = default;
  // Glorot-uniform weights, zero biases.
  Mlp(MlpSpec spec, std::mt19937_64& rng);

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return spec_.layer_sizes.front(); }
  std::size_t output_dim() const { return spec_.layer_sizes.back(); }
  // Width after `layer` linear layers (0 is the input width).
  std::size_t width(std::size_t layer) const { return spec_.layer_sizes.at(layer); }

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

  // Copy whose parameters are leaves on `tape`.
  Mlp bind(ad::Tape& tape) const;

  ad::Tensor forward(const ad::Tensor& x) const;
  // Applies linear layers [begin, end) with their activations. The last
  // layer of the network gets the output activation, the rest the hidden one.
  ad::Tensor forward_range(const ad::Tensor& x, std::size_t begin,
                           std::size_t end) const;

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

// Attention producing the intervention switch a in (0,1)^n from two parent
// features: sigmoid(MLP(concat(x_a, x_b))).
struct AttentionSpec {
  std::size_t input_dim = 64;  // n, the feature width at the intervention site
  std::size_t hidden_dim = 32;
};

MlpSpec attention_mlp_spec(const AttentionSpec& spec);

ad::Tensor attention_forward(const ad::Tensor& x_a, const ad::Tensor& x_b,
                             const Mlp& attention);

struct ArchitectureConfig {
  std::size_t input_dim = 16;
  std::size_t num_classes = 2;
  std::vector<std::size_t> extractor_hidden = {64, 64};
  std::size_t adaptation_dim = 16;
  std::vector<std::size_t> discriminator_hidden = {32};
  std::size_t attention_hidden = 32;
  // Number of E layers applied before the intervention; 0 means all of them.
  std::size_t intervention_layer = 0;

  bool operator==(const ArchitectureConfig&) const = default;
};

struct ModelBundle {
  Mlp extractor;       // E
  Mlp mapping;         // M
  Mlp classifier;      // C
  Mlp discriminator;   // D as one logit; sigmoid gives P(source)
  Mlp attention;       // W
  std::size_t intervention_layer = 0;  // resolved, in [1, E layers]
  double grl_lambda_domain = 0.0;
  double grl_lambda_attention = 0.0;

  // Copy with every parameter registered as a leaf on `tape`.
  ModelBundle bind(ad::Tape& tape) const;

  // Visits (name, tensor) in a fixed order.
  void for_each_parameter(
      const std::function<void(const std::string&, ad::Tensor&)>& fn);
  void for_each_parameter(
      const std::function<void(const std::string&, const ad::Tensor&)>& fn)
      const;

  std::size_t num_parameters() const;
  // FNV-1a over the raw parameter bytes.
  std::uint64_t parameter_hash() const;

  // E up to the intervention site.
  ad::Tensor features(const ad::Tensor& x) const;
  // Rest of E, then M: intervention-site features to representation F.
  ad::Tensor represent(const ad::Tensor& h) const;
  ad::Tensor logits(const ad::Tensor& x) const;
};

ModelBundle init_model(const ArchitectureConfig& config, std::uint64_t seed);

// Text format: a header line, then per tensor "name rows cols" followed by one
// line of values printed with 17 significant digits.
void save_parameters(const ModelBundle& model, const std::filesystem::path& path);
// Loads into a model built from the same architecture; names and shapes must
// match exactly.
void load_parameters(ModelBundle& model, const std::filesystem::path& path);

}  // namespace ida::nn

#endif  // IDA_NN_HPP_
