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


#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ida/intervention.hpp"

namespace ida::intervention {
namespace {

ad::Tensor random_tensor(ad::Shape s, std::mt19937_64& rng, double lo = -3.0,
                         double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(s.size());
  for (double& x : v) x = u(rng);
  return ad::Tensor(s, std::move(v));
}

nn::Mlp zero_attention(std::size_t n) {
  std::mt19937_64 rng(0);
  nn::Mlp w(nn::attention_mlp_spec({n, 4}), rng);
  for (auto& l : w.layers()) l.weight = ad::Tensor::zeros(l.weight.shape());
  return w;
}

TEST(Fi, SameParentIsIdentity) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const nn::Mlp w(nn::attention_mlp_spec({6, 8}), rng);
    const ad::Tensor x = random_tensor({3, 6}, rng);
    const ad::Tensor out = fi(x, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_NEAR(out.values()[i], x.values()[i], 1e-12);
    }
  }
}

TEST(Fi, HalfSwitchGivesMidpoint) {
  const ad::Tensor out = fi_with_switch(ad::Tensor::row({2.0, 0.0}),
                                        ad::Tensor::row({0.0, 2.0}),
                                        ad::Tensor::row({0.5, 0.5}));
  EXPECT_EQ(out.at(0, 0), 1.0);
  EXPECT_EQ(out.at(0, 1), 1.0);
}

TEST(Fi, ExtremeSwitchPicksParent) {
  const ad::Tensor xa = ad::Tensor::row({1.0, 2.0});
  const ad::Tensor xb = ad::Tensor::row({-4.0, 8.0});
  const ad::Tensor out = fi_with_switch(xa, xb, ad::Tensor::row({1.0, 0.0}));
  EXPECT_EQ(out.at(0, 0), 1.0);
  EXPECT_EQ(out.at(0, 1), 8.0);
}

TEST(Fi, InsideConvexEnvelope) {
  std::mt19937_64 rng(2);
  const nn::Mlp w(nn::attention_mlp_spec({5, 8}), rng);
  const ad::Tensor xa = random_tensor({1000, 5}, rng);
  const ad::Tensor xb = random_tensor({1000, 5}, rng);
  const ad::Tensor out = fi(xa, xb, w);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = std::min(xa.values()[i], xb.values()[i]);
    const double hi = std::max(xa.values()[i], xb.values()[i]);
    ASSERT_GE(out.values()[i], lo - 1e-12);
    ASSERT_LE(out.values()[i], hi + 1e-12);
  }
}

TEST(Fi, ShapeMismatch) {
  EXPECT_THROW(fi_with_switch(ad::Tensor::zeros({2, 3}), ad::Tensor::zeros({2, 3}),
                              ad::Tensor::zeros({2, 2})),
               ad::ShapeError);
}

TEST(Fi, GradCheckThroughSwitchAndParents) {
  std::mt19937_64 rng(3);
  const nn::Mlp w(nn::attention_mlp_spec({4, 6}), rng);
  std::vector<ad::Tensor> params = {random_tensor({3, 4}, rng),
                                    random_tensor({3, 4}, rng)};
  for (const auto& l : w.layers()) {
    params.push_back(l.weight);
    params.push_back(random_tensor(l.bias.shape(), rng, -0.5, 0.5));
  }
  const ad::Tensor mix = random_tensor({3, 4}, rng);
  auto f = [&](ad::Tape&, std::span<const ad::Tensor> p) {
    nn::Mlp bound = w;
    for (std::size_t l = 0; l < bound.layers().size(); ++l) {
      bound.layers()[l].weight = p[2 + 2 * l];
      bound.layers()[l].bias = p[3 + 2 * l];
    }
    return ad::sum(ad::mul(fi(p[0], p[1], bound), mix));
  };
  const auto r = ad::grad_check(f, params);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.message;
}

TEST(SamplePairs, PartnersShareTheClass) {
  std::mt19937_64 rng(4);
  const std::vector<int> s = {0, 1, 0, 1, 1, 0};
  const std::vector<int> t = {1, 1, 0, 0};
  const PairPlan plan = sample_pairs(s, t, rng);
  for (const FeaturePair& p : plan.pairs()) {
    const auto& a = p.anchor_domain == Domain::source ? s : t;
    const auto& b = p.partner_domain == Domain::source ? s : t;
    EXPECT_EQ(a[p.anchor], p.shared_class);
    EXPECT_EQ(b[p.partner], p.shared_class);
    if (p.anchor_domain == p.partner_domain) EXPECT_NE(p.anchor, p.partner);
  }
  EXPECT_EQ(plan.total_skipped(), 0u);
  EXPECT_EQ(plan.group(Combination::st).anchors.size(), s.size());
  EXPECT_EQ(plan.group(Combination::tt).anchors.size(), t.size());
}

TEST(SamplePairs, LoneClassMemberPairsWithItself) {
  std::mt19937_64 rng(5);
  const std::vector<int> s = {0, 1, 1};
  const std::vector<int> t = {0, 1};
  const PairPlan plan = sample_pairs(s, t, rng);
  const PairGroup& ss = plan.group(Combination::ss);
  ASSERT_EQ(ss.anchors[0], 0u);
  EXPECT_EQ(ss.partners[0], 0u);
}

TEST(SamplePairs, MissingClassIsSkippedAndCounted) {
  std::mt19937_64 rng(6);
  const std::vector<int> s = {0, 0, 1};
  const std::vector<int> t = {0, 0, 0, 0};
  const PairPlan plan = sample_pairs(s, t, rng);
  EXPECT_EQ(plan.group(Combination::st).skipped, 1u);
  EXPECT_EQ(plan.group(Combination::st).anchors.size(), 2u);
  EXPECT_EQ(plan.group(Combination::ts).skipped, 0u);
  EXPECT_EQ(plan.total_skipped(), 1u);
}

TEST(SamplePairs, UniformOverEligiblePartners) {
  std::mt19937_64 rng(7);
  const std::vector<int> s = {0, 0, 0, 0, 0, 0, 1};
  const std::vector<int> t = {0};
  const int draws = 6000;
  std::map<std::size_t, int> counts;
  for (int i = 0; i < draws; ++i) {
    const PairPlan plan = sample_pairs(s, t, rng);
    ++counts[plan.group(Combination::ss).partners[0]];
  }
  ASSERT_EQ(counts.size(), 5u);
  EXPECT_EQ(counts.count(0), 0u);
  const double p = 0.2;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (const auto& [row, n] : counts) {
    EXPECT_NEAR(n, draws * p, 5 * sd) << "row " << row;
  }
}

TEST(SamplePairs, EmptyBatchRejected) {
  std::mt19937_64 rng(0);
  const std::vector<int> none;
  const std::vector<int> one = {0};
  EXPECT_THROW(sample_pairs(none, one, rng), std::invalid_argument);
}

TEST(Generate, GroupsFollowThePlan) {
  std::mt19937_64 rng(8);
  const std::vector<int> s = {0, 1, 0, 1};
  const std::vector<int> t = {1, 0, 1};
  const PairPlan plan = sample_pairs(s, t, rng);
  const ad::Tensor fs = random_tensor({4, 3}, rng);
  const ad::Tensor ft = random_tensor({3, 3}, rng);
  const CounterfactualBatch cb =
      generate_counterfactuals(fs, ft, plan, zero_attention(3));
  for (Combination c : kCombinations) {
    const CounterfactualGroup& g = cb.group(c);
    const PairGroup& pg = plan.group(c);
    ASSERT_FALSE(g.empty);
    const ad::Tensor& a_src = anchor_domain(c) == Domain::source ? fs : ft;
    const ad::Tensor& b_src = partner_domain(c) == Domain::source ? fs : ft;
    for (std::size_t i = 0; i < pg.anchors.size(); ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double mid = 0.5 * a_src.at(pg.anchors[i], k) +
                           0.5 * b_src.at(pg.partners[i], k);
        EXPECT_NEAR(g.outputs.at(i, k), mid, 1e-12);
      }
    }
  }
}

TEST(Generate, OnlySelectedCombinations) {
  std::mt19937_64 rng(9);
  const std::vector<int> s = {0, 1};
  const std::vector<int> t = {0, 1};
  const PairPlan plan = sample_pairs(s, t, rng);
  const std::vector<Combination> only = {Combination::ss, Combination::tt};
  const CounterfactualBatch cb =
      generate_counterfactuals(random_tensor({2, 3}, rng),
                               random_tensor({2, 3}, rng), plan,
                               zero_attention(3), {}, only);
  EXPECT_FALSE(cb.group(Combination::ss).empty);
  EXPECT_TRUE(cb.group(Combination::st).empty);
  EXPECT_TRUE(cb.group(Combination::ts).empty);
  EXPECT_FALSE(cb.group(Combination::tt).empty);
}

TEST(Generate, DetachedAttentionInputs) {
  std::mt19937_64 rng(10);
  const std::vector<int> s = {0, 0};
  const std::vector<int> t = {0, 0};
  const PairPlan plan = sample_pairs(s, t, rng);
  nn::Mlp w0(nn::attention_mlp_spec({3, 4}), rng);
  for (bool detach : {true, false}) {
    ad::Tape tape;
    const ad::Tensor fs = tape.leaf(random_tensor({2, 3}, rng));
    const ad::Tensor ft = tape.leaf(random_tensor({2, 3}, rng));
    GenerateOptions opt;
    opt.detach_attention_inputs = detach;
    const CounterfactualBatch cb =
        generate_counterfactuals(fs, ft, plan, w0.bind(tape), opt);
    // only the switch path feeds the loss
    tape.backward(ad::sum(cb.group(Combination::ss).switch_values));
    double g = 0.0;
    const ad::Tensor grad = tape.grad(fs);
    for (double v : grad.values()) g += std::abs(v);
    if (detach) {
      EXPECT_EQ(g, 0.0);
    } else {
      EXPECT_GT(g, 0.0);
    }
  }
}

TEST(Supervision, HandComputedCrossEntropy) {
  const ad::Tensor xa = ad::Tensor::row({2.0, 0.0});
  const ad::Tensor xb = ad::Tensor::row({0.0, 0.0});
  const std::vector<int> y = {0};
  const ad::Tensor ce = source_counterfactual_supervision(
      xa, xb, y, y, zero_attention(2), [](const ad::Tensor& h) { return h; });
  // midpoint [1, 0]: -log(e / (e + 1))
  EXPECT_NEAR(ce.item(), std::log1p(std::exp(-1.0)), 1e-12);
}

TEST(Supervision, ParentsWithDifferentLabelsRejected) {
  const ad::Tensor x = ad::Tensor::zeros({2, 2});
  const std::vector<int> a = {0, 1};
  const std::vector<int> b = {0, 0};
  auto head = [](const ad::Tensor& h) { return h; };
  EXPECT_THROW(source_counterfactual_supervision(x, x, a, b, zero_attention(2),
                                                 head),
               std::invalid_argument);
}

TEST(Combinations, Domains) {
  EXPECT_EQ(anchor_domain(Combination::ts), Domain::target);
  EXPECT_EQ(partner_domain(Combination::ts), Domain::source);
  EXPECT_EQ(to_string(Combination::st), "ST");
}

}  // namespace
}  // namespace ida::intervention
