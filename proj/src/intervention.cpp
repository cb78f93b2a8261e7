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

#include "ida/intervention.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "ida/losses.hpp"

namespace ida::intervention {

Domain anchor_domain(Combination c) {
  return c == Combination::ss || c == Combination::st ? Domain::source
                                                      : Domain::target;
}

Domain partner_domain(Combination c) {
  return c == Combination::ss || c == Combination::ts ? Domain::source
                                                      : Domain::target;
}

std::string to_string(Combination c) {
  switch (c) {
    case Combination::ss: return "SS";
    case Combination::st: return "ST";
    case Combination::ts: return "TS";
    case Combination::tt: return "TT";
  }
  return "?";
}

std::vector<FeaturePair> PairPlan::pairs() const {
  std::vector<FeaturePair> out;
  for (const PairGroup& g : groups) {
    for (std::size_t i = 0; i < g.anchors.size(); ++i) {
      out.push_back({g.anchors[i], g.partners[i], anchor_domain(g.combination),
                     partner_domain(g.combination), g.classes[i]});
    }
  }
  return out;
}

std::size_t PairPlan::total_skipped() const {
  std::size_t n = 0;
  for (const PairGroup& g : groups) n += g.skipped;
  return n;
}

PairPlan sample_pairs(std::span<const int> source_labels,
                      std::span<const int> target_pseudo_labels,
                      std::mt19937_64& rng) {
  if (source_labels.empty() || target_pseudo_labels.empty()) {
    throw std::invalid_argument("sample_pairs: batches must be nonempty");
  }
  std::map<int, std::vector<std::size_t>> by_class[2];
  for (std::size_t i = 0; i < source_labels.size(); ++i) {
    by_class[0][source_labels[i]].push_back(i);
  }
  for (std::size_t i = 0; i < target_pseudo_labels.size(); ++i) {
    by_class[1][target_pseudo_labels[i]].push_back(i);
  }
  const std::span<const int> labels[2] = {source_labels, target_pseudo_labels};

  PairPlan plan;
  for (Combination c : kCombinations) {
    PairGroup& g = plan.groups[static_cast<std::size_t>(c)];
    g.combination = c;
    const int a_dom = anchor_domain(c) == Domain::source ? 0 : 1;
    const int p_dom = partner_domain(c) == Domain::source ? 0 : 1;
    const bool within = a_dom == p_dom;
    for (std::size_t i = 0; i < labels[a_dom].size(); ++i) {
      const int cls = labels[a_dom][i];
      auto it = by_class[p_dom].find(cls);
      std::size_t partner = i;
      if (it == by_class[p_dom].end()) {
        ++g.skipped;
        continue;
      }
      const auto& pool = it->second;
      if (within) {
        // Exclude the anchor itself; fall back to the self-pair.
        if (pool.size() > 1) {
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 2);
          std::size_t k = pick(rng);
          const auto self = static_cast<std::size_t>(
              std::lower_bound(pool.begin(), pool.end(), i) - pool.begin());
          if (k >= self) ++k;
          partner = pool[k];
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        partner = pool[pick(rng)];
      }
      g.anchors.push_back(i);
      g.partners.push_back(partner);
      g.classes.push_back(cls);
    }
  }
  return plan;
}

ad::Tensor fi_with_switch(const ad::Tensor& x_a, const ad::Tensor& x_b,
                          const ad::Tensor& a) {
  if (x_a.shape() != x_b.shape() || a.shape() != x_a.shape()) {
    throw ad::ShapeError("fi: shape mismatch x_a " + x_a.shape().str() +
                         ", x_b " + x_b.shape().str() + ", a " +
                         a.shape().str());
  }
  // x_b + a * (x_a - x_b)
  return ad::add(x_b, ad::mul(a, ad::sub(x_a, x_b)));
}

ad::Tensor fi(const ad::Tensor& x_a, const ad::Tensor& x_b,
              const nn::Mlp& attention) {
  return fi_with_switch(x_a, x_b, nn::attention_forward(x_a, x_b, attention));
}

CounterfactualBatch generate_counterfactuals(
    const ad::Tensor& source_features, const ad::Tensor& target_features,
    const PairPlan& plan, const nn::Mlp& attention,
    const GenerateOptions& options, std::span<const Combination> only) {
  if (source_features.cols() != target_features.cols()) {
    throw ad::ShapeError("generate_counterfactuals: feature widths differ " +
                         source_features.shape().str() + " vs " +
                         target_features.shape().str());
  }
  CounterfactualBatch batch;
  for (Combination c : only) {
    const PairGroup& pg = plan.group(c);
    CounterfactualGroup& g = batch.groups[static_cast<std::size_t>(c)];
    g.combination = c;
    if (pg.empty()) continue;
    const ad::Tensor& a_src =
        anchor_domain(c) == Domain::source ? source_features : target_features;
    const ad::Tensor& p_src =
        partner_domain(c) == Domain::source ? source_features : target_features;
    g.anchors = pg.anchors;
    g.classes = pg.classes;
    g.parent_a = ad::gather_rows(a_src, pg.anchors);
    g.parent_b = ad::gather_rows(p_src, pg.partners);
    if (options.detach_attention_inputs) {
      g.switch_values = nn::attention_forward(g.parent_a.detach(),
                                              g.parent_b.detach(), attention);
    } else {
      g.switch_values = nn::attention_forward(g.parent_a, g.parent_b, attention);
    }
    const ad::Tensor a = options.switch_transform
                             ? options.switch_transform(g.switch_values)
                             : g.switch_values;
    g.outputs = fi_with_switch(g.parent_a, g.parent_b, a);
    g.empty = false;
  }
  return batch;
}

ad::Tensor source_counterfactual_supervision(
    const ad::Tensor& x_a, const ad::Tensor& x_b,
    std::span<const int> labels_a, std::span<const int> labels_b,
    const nn::Mlp& attention,
    const std::function<ad::Tensor(const ad::Tensor&)>& head) {
  if (labels_a.size() != labels_b.size() || labels_a.size() != x_a.rows()) {
    throw ad::ShapeError("source_counterfactual_supervision: " +
                         std::to_string(labels_a.size()) + "/" +
                         std::to_string(labels_b.size()) +
                         " labels for " + std::to_string(x_a.rows()) + " rows");
  }
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] != labels_b[i]) {
      throw std::invalid_argument(
          "source_counterfactual_supervision: parents of row " +
          std::to_string(i) + " have labels " + std::to_string(labels_a[i]) +
          " and " + std::to_string(labels_b[i]));
    }
  }
  return losses::cross_entropy(head(fi(x_a, x_b, attention)), labels_a);
}

}  // namespace ida::intervention
