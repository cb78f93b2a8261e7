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

// Objective terms: supervised cross-entropy, the pairwise consistency
// distance with its inter-class hinge, the certainty-weighted intervention
// loss, and the adversarial domain loss over counterfactual representations.

#ifndef IDA_LOSSES_HPP_
#define IDA_LOSSES_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ida/autodiff.hpp"

namespace ida::losses {

// Natural-log entropy with the log floor. `p` must sum to 1 within 1e-6.
double entropy(std::span<const double> p);

enum class CertaintyMode {
  exp_neg_entropy,  // e^{-H(p)} in (0, 1]
  paper_literal,    // -e^{H(p)} in [-K, -1]
};

CertaintyMode parse_certainty_mode(const std::string& name);
std::string to_string(CertaintyMode mode);

struct CertaintyWeight {
  double value = 1.0;
  CertaintyMode mode = CertaintyMode::exp_neg_entropy;
};

CertaintyWeight certainty_weight(std::span<const double> p, CertaintyMode mode);

// Mean cross-entropy of row-wise logits against integer labels.
ad::Tensor cross_entropy(const ad::Tensor& logits, std::span<const int> labels);

// Row-wise distance between two representation batches, n x 1:
// ||a - b||_q for same-class rows, max(0, t_d - ||a - b||_q) otherwise.
ad::Tensor pair_distance(const ad::Tensor& a, const ad::Tensor& b,
                         std::span<const char> same_class, double t_d, int q);
double pair_distance(std::span<const double> a, std::span<const double> b,
                     bool same_class, double t_d, int q);

// How a consistency term compares two rows. `norm` is the class-aware
// distance above; `kl` is KL(anchor || counterfactual) over probability rows.
enum class ConsistencyDistance { norm, kl };

struct LfiConfig {
  double t_d = 9.0;
  int q = 2;
  bool inter_class_hinge = true;
  ConsistencyDistance distance = ConsistencyDistance::norm;
};

// One group of counterfactual representations anchored in one domain.
struct LfiGroup {
  std::vector<std::size_t> anchors;  // rows of the anchor domain batch
  std::vector<int> classes;          // shared class of each counterfactual
  ad::Tensor reps;                   // one row per anchor entry

  bool empty() const { return anchors.empty(); }
};

struct LfiInputs {
  ad::Tensor source_reps;  // F_S
  ad::Tensor target_reps;  // F_T
  std::vector<int> source_labels;
  std::vector<int> target_labels;   // pseudo-labels
  std::vector<double> source_certainty;  // Q per source anchor
  std::vector<double> target_certainty;  // Q per target anchor
  // Indexed by intervention::Combination: SS, ST, TS, TT.
  std::array<LfiGroup, 4> groups;
};

// Q_S * [D(F_S, F_SS) + D(F_S, F_ST)] averaged over source anchors plus
// Q_T * [D(F_T, F_TS) + D(F_T, F_TT)] averaged over target anchors. An anchor
// whose pair was skipped omits that term; anchors without any term are left
// out of their domain's average. With the inter-class hinge enabled each
// anchor also gets the mean hinge distance to the counterfactuals of other
// classes in its own domain's groups.
ad::Tensor l_fi(const LfiInputs& inputs, const LfiConfig& config);

struct AdversarialStats {
  std::size_t empty_source_groups = 0;
  std::size_t empty_target_groups = 0;
};

// -(E_S log D + E_T log(1 - D)) / 2 over discriminator probabilities (n x 1).
// An empty side (default-constructed tensor) drops its expectation, counts
// it in `stats`, and the remaining side is not halved.
ad::Tensor domain_adv_loss(const ad::Tensor& source_probs,
                           const ad::Tensor& target_probs,
                           AdversarialStats* stats = nullptr);

// Same objective from discriminator logits z, with D = sigmoid(z). Stays
// finite when D saturates.
ad::Tensor domain_adv_loss_logits(const ad::Tensor& source_logits,
                                  const ad::Tensor& target_logits,
                                  AdversarialStats* stats = nullptr);

struct LossTerms {
  double j_supervised = 0.0;
  double l_fi = 0.0;
  double d_domain = 0.0;
  double total = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  static LossTerms assemble(double j, double lfi, double d, double beta,
                            double gamma) {
    return {j, lfi, d, j + beta * lfi + gamma * d, beta, gamma};
  }
};

}  // namespace ida::losses

#endif  // IDA_LOSSES_HPP_
