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


#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ida/datagen.hpp"
#include "ida/trainer.hpp"
#include "ida/util.hpp"

namespace ida::train {
namespace {

using Grads = std::vector<std::pair<std::string, ad::Tensor>>;

ad::Tensor random_tensor(ad::Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(s.size());
  for (double& x : v) x = n(rng);
  return ad::Tensor(s, std::move(v));
}

TrainConfig small_config(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.arch.input_dim = 4;
  c.arch.extractor_hidden = {8};
  c.arch.adaptation_dim = 6;
  c.arch.discriminator_hidden = {5};
  c.arch.attention_hidden = 4;
  return c;
}

struct Batches {
  Batch source;
  Batch target;
};

Batches toy_batches(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batches b;
  b.source.x = random_tensor({8, 4}, rng);
  b.target.x = random_tensor({8, 4}, rng);
  b.source.labels = {0, 1, 0, 1, 0, 1, 0, 1};
  return b;
}

Grads step_gradients(const TrainConfig& cfg, double progress,
                     std::uint64_t model_seed = 3) {
  nn::ModelBundle m = nn::init_model(cfg.arch, model_seed);
  OptimizerState opt;
  const Batches b = toy_batches(11);
  std::mt19937_64 rng(5);
  Grads grads;
  StepOptions so;
  so.apply_update = false;
  so.gradients = &grads;
  train_step(m, opt, b.source, b.target, progress, cfg, rng, so);
  return grads;
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

TEST(Schedule, Endpoints) {
  EXPECT_EQ(gamma_schedule(0.0, -10.0), 0.0);
  // 2 / (1 + e^-10) - 1 = tanh(5)
  const long double ref = std::tanh(5.0L);
  EXPECT_NEAR(gamma_schedule(1.0, -10.0), static_cast<double>(ref), 1e-12);
  EXPECT_NEAR(gamma_schedule(1.0, -10.0), 0.999909, 1e-6);
}

TEST(Schedule, Monotone) {
  EXPECT_LT(gamma_schedule(0.3, -10.0), gamma_schedule(0.6, -10.0));
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double g = gamma_schedule(i / 100.0, -10.0);
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(Schedule, ProgressOutsideRangeRejected) {
  EXPECT_THROW(gamma_schedule(-0.01, -10.0), std::invalid_argument);
  EXPECT_THROW(gamma_schedule(1.01, -10.0), std::invalid_argument);
}

TEST(PseudoLabel, Softmax) {
  const PseudoLabels p = pseudo_label_from_logits(ad::Tensor::row({3.0, -1.0}));
  EXPECT_EQ(p.labels[0], 0);
  EXPECT_NEAR(p.probabilities[0][0], 0.982, 5e-4);
  EXPECT_NEAR(p.probabilities[0][1], 0.018, 5e-4);
}

TEST(PseudoLabel, TiesGoToLowestClass) {
  const PseudoLabels p =
      pseudo_label_from_logits(ad::Tensor(ad::Shape{2, 3}, {1, 1, 1, 0, 2, 2}));
  EXPECT_EQ(p.labels[0], 0);
  EXPECT_EQ(p.labels[1], 1);
}

TEST(PseudoLabel, PermutingClassesPermutesArgmax) {
  std::mt19937_64 rng(1);
  const ad::Tensor z = random_tensor({20, 3}, rng);
  std::vector<double> perm;
  for (std::size_t r = 0; r < 20; ++r) {
    perm.insert(perm.end(), {z.at(r, 2), z.at(r, 0), z.at(r, 1)});
  }
  const auto a = pseudo_label_from_logits(z);
  const auto b = pseudo_label_from_logits(ad::Tensor(z.shape(), perm));
  const int where[3] = {1, 2, 0};
  for (std::size_t r = 0; r < 20; ++r) EXPECT_EQ(b.labels[r], where[a.labels[r]]);
}

TEST(Modes, Names) {
  EXPECT_EQ(parse_mode("dann_style"), Mode::dann_style);
  EXPECT_EQ(to_string(Mode::source_only), "source_only");
  EXPECT_THROW(parse_mode("dann"), std::invalid_argument);
  const auto arms = baseline_modes(TrainConfig{});
  ASSERT_EQ(arms.size(), 3u);
  EXPECT_EQ(arms[1].mode, Mode::dann_style);
  EXPECT_EQ(arms[1].learning_rate, arms[2].learning_rate);
}

TEST(Step, Deterministic) {
  const TrainConfig cfg = small_config(Mode::ida);
  auto run = [&] {
    nn::ModelBundle m = nn::init_model(cfg.arch, 3);
    OptimizerState opt;
    const Batches b = toy_batches(2);
    std::mt19937_64 rng(9);
    const StepResult r = train_step(m, opt, b.source, b.target, 0.4, cfg, rng);
    return std::make_pair(r.terms, m.parameter_hash());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first.total, b.first.total);
  EXPECT_EQ(a.first.l_fi, b.first.l_fi);
  EXPECT_EQ(a.first.d_domain, b.first.d_domain);
  EXPECT_EQ(a.second, b.second);
}

TEST(Step, BetaFollowsGamma) {
  const TrainConfig cfg = small_config(Mode::ida);
  for (double m : {0.0, 0.2, 0.5, 1.0}) {
    nn::ModelBundle model = nn::init_model(cfg.arch, 3);
    OptimizerState opt;
    const Batches b = toy_batches(2);
    std::mt19937_64 rng(9);
    const StepResult r = train_step(model, opt, b.source, b.target, m, cfg, rng);
    EXPECT_EQ(r.terms.gamma, gamma_schedule(m, -10.0));
    EXPECT_EQ(r.terms.beta, 0.1 * r.terms.gamma);
    EXPECT_NEAR(r.terms.total,
                r.terms.j_supervised + r.terms.beta * r.terms.l_fi +
                    r.terms.gamma * r.terms.d_domain,
                1e-12);
  }
}

TEST(Step, ZeroGammaSilencesDiscriminator) {
  for (Mode mode : {Mode::dann_style, Mode::ida}) {
    for (const auto& [name, g] : step_gradients(small_config(mode), 0.0)) {
      if (!starts_with(name, "discriminator")) continue;
      for (double v : g.values()) ASSERT_EQ(v, 0.0) << name;
    }
  }
}

TEST(Step, ZeroGammaDannIsSupervisedTraining) {
  const Grads so = step_gradients(small_config(Mode::source_only), 0.0);
  const Grads dann = step_gradients(small_config(Mode::dann_style), 0.0);
  ASSERT_EQ(so.size(), dann.size());
  for (std::size_t i = 0; i < so.size(); ++i) {
    for (std::size_t k = 0; k < so[i].second.size(); ++k) {
      ASSERT_EQ(so[i].second.values()[k], dann[i].second.values()[k])
          << so[i].first;
    }
  }
}

// dtotal/dD = gamma * dd/dD while E and M see -gamma * gamma * dd/dF.
TEST(Step, AdversarialGradientSigns) {
  const double m = 0.3;
  const double gamma = gamma_schedule(m, -10.0);
  const Grads dann = step_gradients(small_config(Mode::dann_style), m);
  const Grads so = step_gradients(small_config(Mode::source_only), m);

  const TrainConfig cfg = small_config(Mode::dann_style);
  const nn::ModelBundle model = nn::init_model(cfg.arch, 3);
  ad::Tape tape;
  const nn::ModelBundle b = model.bind(tape);
  const Batches batches = toy_batches(11);
  const ad::Tensor d = losses::domain_adv_loss_logits(
      b.discriminator.forward(b.represent(b.features(batches.source.x))),
      b.discriminator.forward(b.represent(b.features(batches.target.x))));
  tape.backward(d);
  Grads plain;
  b.for_each_parameter([&](const std::string& name, const ad::Tensor& p) {
    plain.emplace_back(name, tape.grad(p));
  });

  ASSERT_EQ(plain.size(), dann.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    const std::string& name = plain[i].first;
    if (starts_with(name, "attention")) continue;
    for (std::size_t k = 0; k < plain[i].second.size(); ++k) {
      const double gd = plain[i].second.values()[k];
      double expect = so[i].second.values()[k];
      if (starts_with(name, "discriminator")) {
        expect = gamma * gd;
      } else if (!starts_with(name, "classifier")) {
        expect -= gamma * gamma * gd;
      }
      ASSERT_NEAR(dann[i].second.values()[k], expect, 1e-10) << name << "[" << k << "]";
    }
  }
}

// With the reversal W ascends L_FI; without it W descends it.
TEST(Step, AttentionReversalAblation) {
  const double m = 0.5;
  const double gamma = gamma_schedule(m, -10.0);
  TrainConfig base = small_config(Mode::ida);
  base.beta_ratio = 0.0;
  TrainConfig rev = small_config(Mode::ida);
  TrainConfig plain = small_config(Mode::ida);
  plain.reverse_attention = false;
  const Grads a = step_gradients(base, m);
  const Grads r = step_gradients(rev, m);
  const Grads p = step_gradients(plain, m);
  double moved = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!starts_with(a[i].first, "attention")) continue;
    for (std::size_t k = 0; k < a[i].second.size(); ++k) {
      const double ga = a[i].second.values()[k];
      const double from_rev = ga - r[i].second.values()[k];
      const double from_plain = p[i].second.values()[k] - ga;
      EXPECT_NEAR(from_rev, gamma * from_plain, 1e-10) << a[i].first;
      moved += std::abs(from_plain);
    }
  }
  EXPECT_GT(moved, 0.0);
}

TEST(Step, EmptyBatchRejected) {
  const TrainConfig cfg = small_config(Mode::ida);
  nn::ModelBundle m = nn::init_model(cfg.arch, 3);
  OptimizerState opt;
  Batches b = toy_batches(2);
  b.source.labels.clear();
  std::mt19937_64 rng(0);
  EXPECT_THROW(train_step(m, opt, b.source, b.target, 0.0, cfg, rng),
               std::invalid_argument);
}

TEST(Step, SupervisedLossDecreases) {
  TrainConfig cfg = small_config(Mode::source_only);
  cfg.learning_rate = 0.01;
  cfg.momentum = 0.0;
  nn::ModelBundle m = nn::init_model(cfg.arch, 4);
  OptimizerState opt;
  std::mt19937_64 rng(3);
  Batch s;
  std::vector<double> x;
  for (int i = 0; i < 32; ++i) {
    const int y = i % 2;
    s.labels.push_back(y);
    const ad::Tensor noise = random_tensor({1, 4}, rng);
    for (std::size_t k = 0; k < 4; ++k) {
      x.push_back((k == 0 ? (y ? 2.0 : -2.0) : 0.0) + 0.3 * noise.values()[k]);
    }
  }
  s.x = ad::Tensor({32, 4}, x);
  Batch t;
  t.x = s.x;
  double prev = 1e300;
  for (int step = 0; step < 10; ++step) {
    const StepResult r = train_step(m, opt, s, t, 0.0, cfg, rng);
    EXPECT_LT(r.terms.j_supervised, prev) << "step " << step;
    prev = r.terms.j_supervised;
  }
}

data::DomainSpec toy_spec(std::uint64_t seed, std::size_t n) {
  data::DomainSpec s;
  s.u_dim = 4;
  s.v_dim = 4;
  s.class_means = data::default_class_means(2, 4, 5.0);
  s.v_palette = data::default_palette(2, 4, 10.0);
  s.correlation = 0.95;
  s.n_samples = n;
  s.seed = seed;
  return s;
}

TEST(Train, ZeroEpochsLeavesModel) {
  TrainConfig cfg = small_config(Mode::ida);
  cfg.arch.input_dim = 8;
  cfg.epochs = 0;
  const nn::ModelBundle m = nn::init_model(cfg.arch, 1);
  const auto rot = data::identity_rotation(8);
  const data::Dataset d = data::gen_domain(toy_spec(1, 50), rot);
  const TrainResult r = train(m, d, d, cfg);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.model.parameter_hash(), m.parameter_hash());
}

TEST(Train, DimensionMismatchRejected) {
  TrainConfig cfg = small_config(Mode::ida);
  const nn::ModelBundle m = nn::init_model(cfg.arch, 1);
  const data::Dataset d =
      data::gen_domain(toy_spec(1, 50), data::identity_rotation(8));
  EXPECT_THROW(train(m, d, d, cfg), std::invalid_argument);
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig cfg = small_config(Mode::ida);
  cfg.t_d = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config(Mode::ida);
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Train, MetricsPerEpoch) {
  TrainConfig cfg = small_config(Mode::ida);
  cfg.arch.input_dim = 8;
  cfg.epochs = 4;
  cfg.warmup_epochs = 1;
  const auto rot = data::identity_rotation(8);
  const data::Dataset s = data::gen_domain(toy_spec(1, 128), rot);
  const data::Dataset t = data::gen_domain(toy_spec(2, 128), rot, 1);
  std::size_t seen = 0;
  const TrainResult r = train(nn::init_model(cfg.arch, 1), s, t, cfg,
                              [&](const MetricsRecord&) { ++seen; });
  ASSERT_EQ(r.metrics.size(), 4u);
  EXPECT_EQ(seen, 4u);
  EXPECT_EQ(r.metrics[0].gamma, 0.0);
  for (const auto& rec : r.metrics) EXPECT_EQ(rec.beta, 0.1 * rec.gamma);
  EXPECT_GT(r.metrics.back().gamma, 0.0);
}

TEST(Train, SameDistributionsTransfer) {
  double gap = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = small_config(Mode::ida);
    cfg.arch.input_dim = 8;
    cfg.arch.extractor_hidden = {16};
    cfg.epochs = 10;
    cfg.warmup_epochs = 2;
    cfg.seed = seed;
    const auto rot = data::random_rotation(8, seed);
    const data::Dataset s = data::gen_domain(toy_spec(100 + seed, 400), rot);
    const data::Dataset t = data::gen_domain(toy_spec(200 + seed, 400), rot, 1);
    const TrainResult r = train(nn::init_model(cfg.arch, seed), s, t, cfg);
    gap += accuracy(r.model, s) - accuracy(r.model, t);
  }
  EXPECT_LE(std::abs(gap / 5.0), 0.03);
}

}  // namespace
}  // namespace ida::train
