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

// Counterfactual feature generation: x~ = a * x_a + (1 - a) * x_b with the
// switch a produced by the attention module, restricted to parents that share
// a class (true label on the source side, pseudo-label on the target side).

#ifndef IDA_INTERVENTION_HPP_
#define IDA_INTERVENTION_HPP_

#include <array>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ida/autodiff.hpp"
#include "ida/nn.hpp"

namespace ida::intervention {

enum class Domain { source, target };

// Anchor domain first: (S,S), (S,T), (T,S), (T,T).
enum class Combination { ss = 0, st = 1, ts = 2, tt = 3 };
inline constexpr std::array<Combination, 4> kCombinations = {
    Combination::ss, Combination::st, Combination::ts, Combination::tt};

Domain anchor_domain(Combination c);
Domain partner_domain(Combination c);
std::string to_string(Combination c);

struct FeaturePair {
  std::size_t anchor = 0;   // row in the anchor's batch
  std::size_t partner = 0;  // row in the partner's batch
  Domain anchor_domain = Domain::source;
  Domain partner_domain = Domain::source;
  int shared_class = 0;
};

struct PairGroup {
  Combination combination = Combination::ss;
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> partners;
  std::vector<int> classes;
  std::size_t skipped = 0;  // anchors with no eligible partner

  bool empty() const { return anchors.empty(); }
};

struct PairPlan {
  std::array<PairGroup, 4> groups;

  const PairGroup& group(Combination c) const {
    return groups[static_cast<std::size_t>(c)];
  }
  std::vector<FeaturePair> pairs() const;
  std::size_t total_skipped() const;
};

// For every anchor of both batches and every combination, draws one partner
// of the same class uniformly from the eligible rows. Within a domain the
// anchor itself is excluded unless it is the only member of its class, in
// which case the self-pair is used. Cross-domain anchors without a same-class
// partner are skipped and counted.
PairPlan sample_pairs(std::span<const int> source_labels,
                      std::span<const int> target_pseudo_labels,
                      std::mt19937_64& rng);

// x~ = a * x_a + (1 - a) * x_b for an explicit switch.
ad::Tensor fi_with_switch(const ad::Tensor& x_a, const ad::Tensor& x_b,
                          const ad::Tensor& a);

// Feature intervention with a = attention_forward(x_a, x_b, attention).
// Differentiable in x_a, x_b and the attention parameters.
ad::Tensor fi(const ad::Tensor& x_a, const ad::Tensor& x_b,
              const nn::Mlp& attention);

struct CounterfactualGroup {
  Combination combination = Combination::ss;
  std::vector<std::size_t> anchors;
  std::vector<int> classes;
  ad::Tensor parent_a;  // anchor features
  ad::Tensor parent_b;  // partner features
  ad::Tensor switch_values;
  ad::Tensor outputs;
  bool empty = true;
};

struct CounterfactualBatch {
  std::array<CounterfactualGroup, 4> groups;

  const CounterfactualGroup& group(Combination c) const {
    return groups[static_cast<std::size_t>(c)];
  }
};

struct GenerateOptions {
  // Attention sees constant copies of the parents, so the switch only
  // depends on W.
  bool detach_attention_inputs = true;
  // Applied to the switch before mixing (e.g. a gradient reversal).
  std::function<ad::Tensor(const ad::Tensor&)> switch_transform;
};

// Builds the four groups of counterfactuals from intervention-site features
// of the source and target batch.
CounterfactualBatch generate_counterfactuals(
    const ad::Tensor& source_features, const ad::Tensor& target_features,
    const PairPlan& plan, const nn::Mlp& attention,
    const GenerateOptions& options = {},
    std::span<const Combination> only = kCombinations);

// Cross-entropy of head(fi(x_a, x_b, W)) against the parents' shared label.
// `head` maps intervention-site features to logits.
ad::Tensor source_counterfactual_supervision(
    const ad::Tensor& x_a, const ad::Tensor& x_b,
    std::span<const int> labels_a, std::span<const int> labels_b,
    const nn::Mlp& attention,
    const std::function<ad::Tensor(const ad::Tensor&)>& head);

}  // namespace ida::intervention

#endif  // IDA_INTERVENTION_HPP_
