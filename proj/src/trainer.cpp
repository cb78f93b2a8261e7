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

#include "ida/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ida/intervention.hpp"
#include "ida/util.hpp"

namespace ida::train {

using intervention::Combination;

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::source_only: return "source_only";
    case Mode::dann_style: return "dann_style";
    case Mode::ida: return "ida";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  if (name == "source_only") return Mode::source_only;
  if (name == "dann_style") return Mode::dann_style;
  if (name == "ida") return Mode::ida;
  throw std::invalid_argument("unknown mode '" + name +
                              "' (expected source_only, dann_style or ida)");
}

std::string to_string(ConsistencySpace space) {
  switch (space) {
    case ConsistencySpace::representation: return "representation";
    case ConsistencySpace::prob_l1: return "prob_l1";
    case ConsistencySpace::prob_l2: return "prob_l2";
    case ConsistencySpace::prob_kl: return "prob_kl";
  }
  return "unknown";
}

ConsistencySpace parse_consistency_space(const std::string& name) {
  if (name == "representation") return ConsistencySpace::representation;
  if (name == "prob_l1") return ConsistencySpace::prob_l1;
  if (name == "prob_l2") return ConsistencySpace::prob_l2;
  if (name == "prob_kl") return ConsistencySpace::prob_kl;
  throw std::invalid_argument("unknown consistency space '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(t_d > 0.0)) throw std::invalid_argument("t_d must be positive");
  if (q != 1 && q != 2) throw std::invalid_argument("q must be 1 or 2");
  if (!(beta_ratio >= 0.0)) {
    throw std::invalid_argument("beta_ratio must be nonnegative");
  }
  if (!std::isfinite(k_schedule)) {
    throw std::invalid_argument("k_schedule must be finite");
  }
}

TrainConfig with_mode(TrainConfig config, Mode mode) {
  config.mode = mode;
  return config;
}

std::vector<TrainConfig> baseline_modes(const TrainConfig& config) {
  return {with_mode(config, Mode::source_only),
          with_mode(config, Mode::dann_style), with_mode(config, Mode::ida)};
}

double gamma_schedule(double progress, double k) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw std::invalid_argument("gamma_schedule: progress " +
                                std::to_string(progress) + " outside [0, 1]");
  }
  return 2.0 / (1.0 + std::exp(k * progress)) - 1.0;
}

PseudoLabels pseudo_label_from_logits(const ad::Tensor& logits) {
  const ad::Tensor probs = ad::softmax(logits.detach());
  PseudoLabels out;
  const std::size_t k = probs.cols();
  auto pv = probs.values();
  auto lv = logits.values();
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (lv[i * k + j] > lv[i * k + best]) best = j;
    }
    out.labels.push_back(static_cast<int>(best));
    out.probabilities.emplace_back(pv.begin() + i * k, pv.begin() + (i + 1) * k);
  }
  return out;
}

PseudoLabels pseudo_label(const nn::ModelBundle& model, const ad::Tensor& x) {
  return pseudo_label_from_logits(model.logits(x.detach()));
}

namespace {

std::vector<double> certainties(const PseudoLabels& p, losses::CertaintyMode m) {
  std::vector<double> out;
  out.reserve(p.probabilities.size());
  for (const auto& row : p.probabilities) {
    out.push_back(losses::certainty_weight(row, m).value);
  }
  return out;
}

// Representation used by the consistency loss.
ad::Tensor consistency_view(const nn::ModelBundle& model, const ad::Tensor& f,
                            ConsistencySpace space) {
  if (space == ConsistencySpace::representation) return f;
  return ad::softmax(model.classifier.forward(f));
}

losses::LfiConfig lfi_config(const TrainConfig& config) {
  losses::LfiConfig c;
  c.t_d = config.t_d;
  c.q = config.q;
  c.inter_class_hinge = config.inter_class_hinge;
  switch (config.consistency) {
    case ConsistencySpace::representation: break;
    case ConsistencySpace::prob_l1:
      c.q = 1;
      c.inter_class_hinge = false;
      break;
    case ConsistencySpace::prob_l2:
      c.q = 2;
      c.inter_class_hinge = false;
      break;
    case ConsistencySpace::prob_kl:
      c.distance = losses::ConsistencyDistance::kl;
      c.inter_class_hinge = false;
      break;
  }
  return c;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

StepResult train_step(nn::ModelBundle& model, OptimizerState& optimizer,
                      const Batch& source, const Batch& target,
                      double progress, const TrainConfig& config,
                      std::mt19937_64& rng, const StepOptions& options) {
  if (source.labels.empty() || target.x.size() == 0) {
    throw std::invalid_argument("train_step: batches must be nonempty");
  }
  if (source.x.rows() != source.labels.size()) {
    throw ad::ShapeError("train_step: source labels do not match features");
  }

  const bool use_domain = config.mode != Mode::source_only;
  const bool use_fi = config.mode == Mode::ida;
  const double gamma =
      use_domain ? gamma_schedule(progress, config.k_schedule) : 0.0;
  const double beta = use_fi ? config.beta_ratio * gamma : 0.0;

  ad::Tape tape;
  nn::ModelBundle bound = model.bind(tape);
  bound.grl_lambda_domain = gamma;
  bound.grl_lambda_attention = config.reverse_attention ? gamma : 0.0;

  const ad::Tensor h_s = bound.features(source.x.detach());
  const ad::Tensor h_t = bound.features(target.x.detach());
  const ad::Tensor f_s = bound.represent(h_s);
  const ad::Tensor f_t = bound.represent(h_t);
  const ad::Tensor logits_s = bound.classifier.forward(f_s);
  const ad::Tensor logits_t = bound.classifier.forward(f_t);

  StepResult result;
  if (!all_finite(logits_s.values()) || !all_finite(logits_t.values())) {
    result.diagnostics.nan = true;
    return result;
  }
  const PseudoLabels pl_t = pseudo_label_from_logits(logits_t);
  const PseudoLabels pl_s = pseudo_label_from_logits(logits_s);

  if (target.labels.size() == pl_t.labels.size()) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pl_t.labels.size(); ++i) {
      hit += pl_t.labels[i] == target.labels[i];
    }
    result.diagnostics.pseudo_label_accuracy =
        static_cast<double>(hit) / static_cast<double>(pl_t.labels.size());
  }
  const std::vector<double> q_t = certainties(pl_t, config.certainty);
  result.diagnostics.mean_target_certainty =
      std::accumulate(q_t.begin(), q_t.end(), 0.0) /
      static_cast<double>(q_t.size());

  ad::Tensor j = losses::cross_entropy(logits_s, source.labels);
  ad::Tensor l_fi = ad::Tensor::scalar(0.0);
  ad::Tensor d_domain = ad::Tensor::scalar(0.0);

  if (use_fi) {
    const intervention::PairPlan plan =
        intervention::sample_pairs(source.labels, pl_t.labels, rng);
    result.diagnostics.skipped_pairs = plan.total_skipped();

    // Supervised counterfactuals: plain switch, W trained with the model.
    {
      const std::array<Combination, 1> ss = {Combination::ss};
      auto cf = intervention::generate_counterfactuals(h_s, h_t, plan,
                                                       bound.attention, {}, ss);
      const auto& g = cf.group(Combination::ss);
      ad::Tensor logits_cf = bound.classifier.forward(bound.represent(g.outputs));
      ad::Tensor j_cf = losses::cross_entropy(logits_cf, g.classes);
      j = ad::scale(ad::add(j, j_cf), 0.5);
    }

    // Intervention loss: W ascends through the reversed switch.
    {
      intervention::GenerateOptions opt;
      const double lambda = bound.grl_lambda_attention;
      if (config.reverse_attention) {
        opt.switch_transform = [lambda](const ad::Tensor& a) {
          return ad::grad_reverse(a, lambda);
        };
      }
      auto cf = intervention::generate_counterfactuals(h_s, h_t, plan,
                                                       bound.attention, opt);
      losses::LfiInputs in;
      in.source_reps = consistency_view(bound, f_s, config.consistency);
      in.target_reps = consistency_view(bound, f_t, config.consistency);
      in.source_labels = source.labels;
      in.target_labels = pl_t.labels;
      in.source_certainty = certainties(pl_s, config.certainty);
      in.target_certainty = q_t;
      for (Combination c : intervention::kCombinations) {
        const auto& g = cf.group(c);
        if (g.empty) continue;
        auto& lg = in.groups[static_cast<std::size_t>(c)];
        lg.anchors = g.anchors;
        lg.classes = g.classes;
        lg.reps = consistency_view(bound, bound.represent(g.outputs),
                                   config.consistency);
      }
      l_fi = losses::l_fi(in, lfi_config(config));
    }

    // Adversarial alignment over counterfactuals; W gets nothing from it.
    {
      intervention::GenerateOptions opt;
      opt.switch_transform = [](const ad::Tensor& a) { return a.detach(); };
      const std::array<Combination, 2> within = {Combination::ss,
                                                 Combination::tt};
      auto cf = intervention::generate_counterfactuals(
          h_s, h_t, plan, bound.attention, opt, within);
      auto domain_logits = [&](const intervention::CounterfactualGroup& g) {
        if (g.empty) return ad::Tensor();
        return bound.discriminator.forward(ad::grad_reverse(
            bound.represent(g.outputs), bound.grl_lambda_domain));
      };
      d_domain = losses::domain_adv_loss_logits(domain_logits(cf.group(Combination::ss)),
                                                domain_logits(cf.group(Combination::tt)));
    }
  } else if (use_domain) {
    auto domain_logits = [&](const ad::Tensor& f) {
      return bound.discriminator.forward(
          ad::grad_reverse(f, bound.grl_lambda_domain));
    };
    d_domain = losses::domain_adv_loss_logits(domain_logits(f_s), domain_logits(f_t));
  }

  ad::Tensor total = j;
  if (use_fi) total = ad::add(total, ad::scale(l_fi, beta));
  if (use_domain) total = ad::add(total, ad::scale(d_domain, gamma));

  result.terms = losses::LossTerms::assemble(j.item(), l_fi.item(),
                                             d_domain.item(), beta, gamma);

  bool finite = std::isfinite(total.item());
  std::vector<ad::Tensor> grads;
  if (finite) {
    tape.backward(total);
    bound.for_each_parameter([&](const std::string&, const ad::Tensor& p) {
      grads.push_back(tape.grad(p));
    });
    for (const ad::Tensor& g : grads) finite = finite && all_finite(g.values());
  }
  if (!finite) {
    result.diagnostics.nan = true;
    return result;
  }

  if (options.gradients != nullptr) {
    options.gradients->clear();
    std::size_t i = 0;
    model.for_each_parameter([&](const std::string& name, const ad::Tensor&) {
      options.gradients->emplace_back(name, grads[i++]);
    });
  }
  if (!options.apply_update) return result;

  if (optimizer.velocity.size() != grads.size()) {
    optimizer.velocity.assign(grads.size(), {});
  }
  double clip = 1.0;
  if (config.grad_clip > 0.0) {
    double sq = 0.0;
    for (const ad::Tensor& g : grads) {
      for (double x : g.values()) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > config.grad_clip) clip = config.grad_clip / norm;
  }
  result.diagnostics.grad_norm_scale = clip;
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string&, ad::Tensor& p) {
    auto& v = optimizer.velocity[i];
    auto g = grads[i].values();
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    std::vector<double> updated(p.values().begin(), p.values().end());
    for (std::size_t k = 0; k < g.size(); ++k) {
      v[k] = config.momentum * v[k] + clip * g[k];
      updated[k] -= config.learning_rate * v[k];
    }
    p = ad::Tensor(p.shape(), std::move(updated));
    ++i;
  });
  return result;
}

double accuracy(const nn::ModelBundle& model, const data::Dataset& data) {
  if (data.size() == 0) return 0.0;
  const PseudoLabels pred = pseudo_label(model, data.features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hit += pred.labels[i] == data.labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

namespace {

// Cycles through a domain in shuffled order, reshuffling on wrap.
class BatchStream {
 public:
  BatchStream(const data::Dataset& data, std::mt19937_64& rng)
      : data_(data), rng_(rng), order_(data.size()) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  Batch next(std::size_t n) {
    std::vector<std::size_t> rows;
    rows.reserve(n);
    while (rows.size() < n) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      rows.push_back(order_[pos_++]);
    }
    data::Dataset sub = data_.subset(rows);
    return {sub.features, sub.labels};
  }

 private:
  const data::Dataset& data_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace

TrainResult train(nn::ModelBundle model, const data::Dataset& source,
                  const data::Dataset& target, const TrainConfig& config,
                  const std::function<void(const MetricsRecord&)>& on_epoch) {
  config.validate();
  const std::size_t in_dim = model.extractor.input_dim();
  if (source.dim() != in_dim || target.dim() != in_dim) {
    throw std::invalid_argument(
        "train: dataset dimension (source " + std::to_string(source.dim()) +
        ", target " + std::to_string(target.dim()) +
        ") does not match model input " + std::to_string(in_dim));
  }
  TrainResult result;
  if (config.epochs == 0) {
    result.model = std::move(model);
    return result;
  }
  if (source.size() == 0 || target.size() == 0) {
    throw std::invalid_argument("train: source and target must be nonempty");
  }
  for (int y : source.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.classifier.output_dim()) {
      throw std::invalid_argument("train: source label " + std::to_string(y) +
                                  " outside the classifier's range");
    }
  }

  auto batch_rng = make_rng(config.seed, 1);
  auto pair_rng = make_rng(config.seed, 2);
  BatchStream src(source, batch_rng);
  BatchStream tgt(target, batch_rng);
  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, std::max(source.size(), target.size()) /
                                   config.batch_size);
  const std::size_t warm = std::min(config.warmup_epochs, config.epochs);
  const std::size_t warm_steps = steps_per_epoch * warm;
  const std::size_t total_steps = steps_per_epoch * config.epochs - warm_steps;
  const TrainConfig warm_config = with_mode(config, Mode::source_only);

  OptimizerState opt;
  std::size_t step = 0;
  std::size_t consecutive_nan = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    MetricsRecord rec;
    rec.epoch = epoch;
    std::size_t counted = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const bool warming = step < warm_steps;
      const double progress =
          warming ? 0.0
                  : static_cast<double>(step - warm_steps) /
                        static_cast<double>(total_steps);
      const Batch bs = src.next(config.batch_size);
      const Batch bt = tgt.next(config.batch_size);
      const StepResult r = train_step(model, opt, bs, bt, progress,
                                      warming ? warm_config : config, pair_rng);
      if (r.diagnostics.nan) {
        ++result.nan_steps;
        if (++consecutive_nan >= 3) {
          throw std::runtime_error("train: three consecutive non-finite steps at "
                                   "step " + std::to_string(step));
        }
        continue;
      }
      consecutive_nan = 0;
      rec.j_supervised += r.terms.j_supervised;
      rec.l_fi += r.terms.l_fi;
      rec.d_domain += r.terms.d_domain;
      rec.pseudo_label_accuracy += r.diagnostics.pseudo_label_accuracy;
      rec.mean_certainty += r.diagnostics.mean_target_certainty;
      rec.gamma = r.terms.gamma;
      rec.beta = r.terms.beta;
      ++counted;
    }
    if (counted > 0) {
      const double n = static_cast<double>(counted);
      rec.j_supervised /= n;
      rec.l_fi /= n;
      rec.d_domain /= n;
      rec.pseudo_label_accuracy /= n;
      rec.mean_certainty /= n;
    }
    rec.source_accuracy = accuracy(model, source);
    rec.target_accuracy = accuracy(model, target);
    result.metrics.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace ida::train
