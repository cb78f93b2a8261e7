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

#include "ida/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ida::losses {

namespace {

void check_probability(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("probability vector is empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) {
      throw std::invalid_argument("probability vector has a negative entry");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("probability vector sums to " +
                                std::to_string(total) + ", not 1");
  }
}

}  // namespace

double entropy(std::span<const double> p) {
  check_probability(p);
  double h = 0.0;
  for (double v : p) h -= v * std::log(std::max(v, ad::kLogFloor));
  return h;
}

CertaintyMode parse_certainty_mode(const std::string& name) {
  if (name == "exp_neg_entropy") return CertaintyMode::exp_neg_entropy;
  if (name == "paper_literal") return CertaintyMode::paper_literal;
  throw std::invalid_argument("unknown certainty mode '" + name +
                              "' (expected exp_neg_entropy or paper_literal)");
}

std::string to_string(CertaintyMode mode) {
  return mode == CertaintyMode::exp_neg_entropy ? "exp_neg_entropy"
                                                : "paper_literal";
}

CertaintyWeight certainty_weight(std::span<const double> p,
                                 CertaintyMode mode) {
  const double h = entropy(p);
  switch (mode) {
    case CertaintyMode::exp_neg_entropy: return {std::exp(-h), mode};
    case CertaintyMode::paper_literal: return {-std::exp(h), mode};
  }
  throw std::invalid_argument("unknown certainty mode");
}

ad::Tensor cross_entropy(const ad::Tensor& logits,
                         std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw ad::ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + logits.shape().str());
  }
  const std::size_t k = logits.cols();
  std::vector<double> onehot(logits.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw std::out_of_range("cross_entropy: label " +
                              std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(k) + ")");
    }
    onehot[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  ad::Tensor picked = ad::mul(ad::log_softmax(logits),
                              ad::Tensor(logits.shape(), std::move(onehot)));
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(labels.size()));
}

namespace {

ad::Tensor row_norm(const ad::Tensor& diff, int q) {
  if (q == 2) return ad::row_l2_norm(diff);
  if (q == 1) return ad::row_l1_norm(diff);
  throw std::invalid_argument("pair_distance: q must be 1 or 2, got " +
                              std::to_string(q));
}

void check_distance_params(double t_d, int q) {
  if (!(t_d > 0.0)) {
    throw std::invalid_argument("pair_distance: t_d must be positive");
  }
  if (q != 1 && q != 2) {
    throw std::invalid_argument("pair_distance: q must be 1 or 2, got " +
                                std::to_string(q));
  }
}

}  // namespace

ad::Tensor pair_distance(const ad::Tensor& a, const ad::Tensor& b,
                         std::span<const char> same_class, double t_d, int q) {
  check_distance_params(t_d, q);
  if (a.shape() != b.shape()) {
    throw ad::ShapeError("pair_distance: shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
  }
  if (same_class.size() != a.rows()) {
    throw ad::ShapeError("pair_distance: " + std::to_string(same_class.size()) +
                         " class flags for " + std::to_string(a.rows()) +
                         " rows");
  }
  ad::Tensor norms = row_norm(ad::sub(a, b), q);
  const bool all_same = std::all_of(same_class.begin(), same_class.end(),
                                    [](char c) { return c != 0; });
  if (all_same) return norms;
  const bool none_same = std::none_of(same_class.begin(), same_class.end(),
                                      [](char c) { return c != 0; });
  ad::Tensor hinged = ad::hinge(norms, t_d);
  if (none_same) return hinged;
  std::vector<double> mask(same_class.size()), inv(same_class.size());
  for (std::size_t i = 0; i < same_class.size(); ++i) {
    mask[i] = same_class[i] ? 1.0 : 0.0;
    inv[i] = 1.0 - mask[i];
  }
  return ad::add(ad::mul(norms, ad::Tensor::column(std::move(mask))),
                 ad::mul(hinged, ad::Tensor::column(std::move(inv))));
}

double pair_distance(std::span<const double> a, std::span<const double> b,
                     bool same_class, double t_d, int q) {
  check_distance_params(t_d, q);
  if (a.size() != b.size()) {
    throw ad::ShapeError("pair_distance: length mismatch " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    norm += q == 2 ? d * d : std::abs(d);
  }
  if (q == 2) norm = std::sqrt(norm);
  return same_class ? norm : std::max(0.0, t_d - norm);
}

namespace {

// Row-wise KL(p || r) over probability rows, n x 1.
ad::Tensor row_kl(const ad::Tensor& p, const ad::Tensor& r) {
  return ad::sum_cols(ad::mul(p, ad::sub(ad::log(p), ad::log(r))));
}

struct DomainAccumulator {
  std::vector<ad::Tensor> terms;  // each a 1x1 weighted sum
  std::vector<char> included;     // per anchor
};

void add_term(DomainAccumulator& acc, ad::Tensor t) {
  acc.terms.push_back(std::move(t));
}

ad::Tensor domain_average(const DomainAccumulator& acc) {
  if (acc.terms.empty()) return {};
  ad::Tensor total = acc.terms.front();
  for (std::size_t i = 1; i < acc.terms.size(); ++i) {
    total = ad::add(total, acc.terms[i]);
  }
  const auto n = std::count(acc.included.begin(), acc.included.end(), 1);
  return ad::scale(total, 1.0 / static_cast<double>(n));
}

void check_group(const LfiGroup& g, const ad::Tensor& anchor_reps,
                 std::size_t num_anchors, const char* which) {
  if (g.empty()) return;
  if (g.classes.size() != g.anchors.size() || g.reps.rows() != g.anchors.size()) {
    throw ad::ShapeError(std::string("l_fi: group ") + which +
                         " has misaligned anchors/classes/reps");
  }
  if (g.reps.cols() != anchor_reps.cols()) {
    throw ad::ShapeError(std::string("l_fi: group ") + which +
                         " representation width " +
                         std::to_string(g.reps.cols()) + " != " +
                         std::to_string(anchor_reps.cols()));
  }
  for (std::size_t a : g.anchors) {
    if (a >= num_anchors) {
      throw std::out_of_range(std::string("l_fi: group ") + which +
                              " anchor index out of range");
    }
  }
}

// Accumulates one domain's terms: same-class consistency against the two
// groups anchored there, and optionally the inter-class hinge.
ad::Tensor domain_terms(const ad::Tensor& reps, std::span<const int> labels,
                        std::span<const double> certainty,
                        const LfiGroup& first, const LfiGroup& second,
                        const LfiConfig& config) {
  const std::size_t n = labels.size();
  DomainAccumulator acc;
  acc.included.assign(n, 0);

  for (const LfiGroup* g : {&first, &second}) {
    if (g->empty()) continue;
    ad::Tensor anchor_rows = ad::gather_rows(reps, g->anchors);
    ad::Tensor d;
    if (config.distance == ConsistencyDistance::kl) {
      d = row_kl(anchor_rows, g->reps);
    } else {
      std::vector<char> same(g->anchors.size(), 1);
      d = pair_distance(anchor_rows, g->reps, same, config.t_d, config.q);
    }
    std::vector<double> w(g->anchors.size());
    for (std::size_t r = 0; r < g->anchors.size(); ++r) {
      w[r] = certainty[g->anchors[r]];
      acc.included[g->anchors[r]] = 1;
    }
    add_term(acc, ad::sum(ad::mul(d, ad::Tensor::column(std::move(w)))));
  }

  if (config.inter_class_hinge && config.distance == ConsistencyDistance::norm) {
    // Candidate counterfactuals: both groups stacked.
    std::vector<int> cf_classes;
    ad::Tensor cf;
    for (const LfiGroup* g : {&first, &second}) {
      if (g->empty()) continue;
      cf_classes.insert(cf_classes.end(), g->classes.begin(), g->classes.end());
      cf = cf.size() == 0 ? g->reps : ad::concat_rows(cf, g->reps);
    }
    std::vector<std::size_t> anchor_idx, cf_idx;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t count = 0;
      for (int c : cf_classes) count += c != labels[i];
      if (count == 0) continue;
      const double wi = certainty[i] / static_cast<double>(count);
      for (std::size_t j = 0; j < cf_classes.size(); ++j) {
        if (cf_classes[j] == labels[i]) continue;
        anchor_idx.push_back(i);
        cf_idx.push_back(j);
        w.push_back(wi);
      }
      acc.included[i] = 1;
    }
    if (!anchor_idx.empty()) {
      std::vector<char> same(anchor_idx.size(), 0);
      ad::Tensor d = pair_distance(ad::gather_rows(reps, anchor_idx),
                                   ad::gather_rows(cf, cf_idx), same,
                                   config.t_d, config.q);
      add_term(acc, ad::sum(ad::mul(d, ad::Tensor::column(std::move(w)))));
    }
  }
  return domain_average(acc);
}

}  // namespace

ad::Tensor l_fi(const LfiInputs& in, const LfiConfig& config) {
  if (config.distance == ConsistencyDistance::norm) {
    check_distance_params(config.t_d, config.q);
  }
  const std::size_t ns = in.source_labels.size();
  const std::size_t nt = in.target_labels.size();
  if (ns > 0 && (in.source_reps.rows() != ns || in.source_certainty.size() != ns)) {
    throw ad::ShapeError("l_fi: source reps/labels/certainty lengths differ");
  }
  if (nt > 0 && (in.target_reps.rows() != nt || in.target_certainty.size() != nt)) {
    throw ad::ShapeError("l_fi: target reps/labels/certainty lengths differ");
  }
  check_group(in.groups[0], in.source_reps, ns, "SS");
  check_group(in.groups[1], in.source_reps, ns, "ST");
  check_group(in.groups[2], in.target_reps, nt, "TS");
  check_group(in.groups[3], in.target_reps, nt, "TT");

  ad::Tensor source_part, target_part;
  if (ns > 0) {
    source_part = domain_terms(in.source_reps, in.source_labels,
                               in.source_certainty, in.groups[0], in.groups[1],
                               config);
  }
  if (nt > 0) {
    target_part = domain_terms(in.target_reps, in.target_labels,
                               in.target_certainty, in.groups[2], in.groups[3],
                               config);
  }
  if (source_part.size() == 0 && target_part.size() == 0) {
    return ad::Tensor::scalar(0.0);
  }
  if (source_part.size() == 0) return target_part;
  if (target_part.size() == 0) return source_part;
  return ad::add(source_part, target_part);
}

ad::Tensor domain_adv_loss(const ad::Tensor& source_probs,
                           const ad::Tensor& target_probs,
                           AdversarialStats* stats) {
  const bool has_s = source_probs.size() > 0;
  const bool has_t = target_probs.size() > 0;
  if (stats != nullptr) {
    stats->empty_source_groups += has_s ? 0 : 1;
    stats->empty_target_groups += has_t ? 0 : 1;
  }
  for (const ad::Tensor* t : {&source_probs, &target_probs}) {
    if (t->size() > 0 && t->cols() != 1) {
      throw ad::ShapeError("domain_adv_loss: expected n x 1 probabilities, got " +
                           t->shape().str());
    }
  }
  if (!has_s && !has_t) return ad::Tensor::scalar(0.0);
  // Log-likelihood of the true domain, negated so D minimizes it.
  ad::Tensor ll_s, ll_t;
  if (has_s) ll_s = ad::mean(ad::log(source_probs));
  if (has_t) {
    ll_t = ad::mean(ad::log(ad::add_scalar(ad::scale(target_probs, -1.0), 1.0)));
  }
  if (!has_t) return ad::scale(ll_s, -1.0);
  if (!has_s) return ad::scale(ll_t, -1.0);
  return ad::scale(ad::add(ll_s, ll_t), -0.5);
}

ad::Tensor domain_adv_loss_logits(const ad::Tensor& source_logits,
                                  const ad::Tensor& target_logits,
                                  AdversarialStats* stats) {
  const bool has_s = source_logits.size() > 0;
  const bool has_t = target_logits.size() > 0;
  if (stats != nullptr) {
    stats->empty_source_groups += has_s ? 0 : 1;
    stats->empty_target_groups += has_t ? 0 : 1;
  }
  for (const ad::Tensor* t : {&source_logits, &target_logits}) {
    if (t->size() > 0 && t->cols() != 1) {
      throw ad::ShapeError("domain_adv_loss_logits: expected n x 1 logits, got " +
                           t->shape().str());
    }
  }
  if (!has_s && !has_t) return ad::Tensor::scalar(0.0);
  // log(1 - sigmoid(z)) = log_sigmoid(-z)
  ad::Tensor ll_s, ll_t;
  if (has_s) ll_s = ad::mean(ad::log_sigmoid(source_logits));
  if (has_t) ll_t = ad::mean(ad::log_sigmoid(ad::scale(target_logits, -1.0)));
  if (!has_t) return ad::scale(ll_s, -1.0);
  if (!has_s) return ad::scale(ll_t, -1.0);
  return ad::scale(ad::add(ll_s, ll_t), -0.5);
}

}  // namespace ida::losses
