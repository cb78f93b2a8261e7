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

// Joint training of E, M, C, D and W. One optimizer step per batch; the two
// min-max couplings (D against E/M, W against E/M on the intervention loss)
// are implemented with gradient reversal.

#ifndef IDA_TRAINER_HPP_
#define IDA_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ida/autodiff.hpp"
#include "ida/datagen.hpp"
#include "ida/losses.hpp"
#include "ida/nn.hpp"

namespace ida::train {

enum class Mode { source_only, dann_style, ida };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

// Where L_FI measures consistency: the adaptation-layer representation F, or
// class probabilities compared with L1, L2 or KL.
enum class ConsistencySpace { representation, prob_l1, prob_l2, prob_kl };

std::string to_string(ConsistencySpace space);
ConsistencySpace parse_consistency_space(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 40;
  // Leading epochs trained on J alone; the schedule then runs over the rest.
  std::size_t warmup_epochs = 5;
  std::size_t batch_size = 64;
  double learning_rate = 0.015;
  double momentum = 0.9;
  // Global gradient-norm cap applied before the momentum update; 0 disables.
  double grad_clip = 20.0;
  double t_d = 9.0;
  int q = 2;
  double k_schedule = -10.0;
  double beta_ratio = 0.1;
  std::uint64_t seed = 0;
  nn::ArchitectureConfig arch;
  losses::CertaintyMode certainty = losses::CertaintyMode::exp_neg_entropy;
  bool inter_class_hinge = true;
  // Gradient reversal between L_FI and W. Off makes W descend L_FI.
  bool reverse_attention = true;
  ConsistencySpace consistency = ConsistencySpace::representation;
  Mode mode = Mode::ida;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// The three comparison arms share everything except the objective terms.
TrainConfig with_mode(TrainConfig config, Mode mode);
std::vector<TrainConfig> baseline_modes(const TrainConfig& config);

// 2 / (1 + exp(k m)) - 1 for progress m in [0, 1].
double gamma_schedule(double progress, double k);

struct PseudoLabels {
  std::vector<int> labels;
  std::vector<std::vector<double>> probabilities;
};

// Argmax of softmax(logits); ties go to the lowest class index.
PseudoLabels pseudo_label_from_logits(const ad::Tensor& logits);
// Evaluation-mode forward of C(M(E(x))); records nothing.
PseudoLabels pseudo_label(const nn::ModelBundle& model, const ad::Tensor& x);

struct Batch {
  ad::Tensor x;
  std::vector<int> labels;  // target labels are for metrics only
};

struct OptimizerState {
  std::vector<std::vector<double>> velocity;
};

struct StepDiagnostics {
  double pseudo_label_accuracy = 0.0;
  double mean_target_certainty = 0.0;
  std::size_t skipped_pairs = 0;
  bool nan = false;
  double grad_norm_scale = 1.0;  // < 1 when clipping engaged
};

struct StepOptions {
  bool apply_update = true;
  // When set, receives (name, gradient) for every parameter.
  std::vector<std::pair<std::string, ad::Tensor>>* gradients = nullptr;
};

struct StepResult {
  losses::LossTerms terms;
  StepDiagnostics diagnostics;
};

// One forward/backward/update. A non-finite loss or gradient leaves the model
// and optimizer untouched and sets diagnostics.nan.
StepResult train_step(nn::ModelBundle& model, OptimizerState& optimizer,
                      const Batch& source, const Batch& target,
                      double progress, const TrainConfig& config,
                      std::mt19937_64& rng, const StepOptions& options = {});

struct MetricsRecord {
  std::size_t epoch = 0;
  double j_supervised = 0.0;
  double l_fi = 0.0;
  double d_domain = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
  double pseudo_label_accuracy = 0.0;
  double mean_certainty = 0.0;
};

struct TrainResult {
  nn::ModelBundle model;
  std::vector<MetricsRecord> metrics;
  std::size_t nan_steps = 0;
};

double accuracy(const nn::ModelBundle& model, const data::Dataset& data);

// Runs config.epochs epochs. `on_epoch` is called after each record.
TrainResult train(nn::ModelBundle model, const data::Dataset& source,
                  const data::Dataset& target, const TrainConfig& config,
                  const std::function<void(const MetricsRecord&)>& on_epoch = {});

}  // namespace ida::train

#endif  // IDA_TRAINER_HPP_
