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

// Analysis instruments over adaptation-layer representations: proxy
// A-distance, the joint-error probe, per-domain accuracy and embedding export.

#ifndef IDA_DIAGNOSTICS_HPP_
#define IDA_DIAGNOSTICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ida/autodiff.hpp"
#include "ida/datagen.hpp"
#include "ida/nn.hpp"

namespace ida::diag {

struct ProbeOptions {
  std::size_t hidden = 16;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
};

// Trains a one-hidden-layer perceptron classifier on standardized inputs and
// returns held-out accuracy. Exposed for tests; the probes below use it.
double probe_accuracy(const ad::Tensor& train_x, std::span<const int> train_y,
                      const ad::Tensor& test_x, std::span<const int> test_y,
                      int num_classes, std::uint64_t seed,
                      const ProbeOptions& options);

struct ADistance {
  double raw = 0.0;      // 2 (1 - 2 eps), may be negative
  double clipped = 0.0;  // clamped to [0, 2]
  double error = 0.0;    // held-out domain-classification error eps
};

// 50/50 split per domain; a probe (hidden 16) learns source vs target.
ADistance proxy_a_distance(const ad::Tensor& source_reps,
                           const ad::Tensor& target_reps, std::uint64_t seed,
                           const ProbeOptions& options = {});

// Probe (hidden 32) on the union of both domains with true labels, 80/20
// split; returns held-out accuracy. Target labels are required.
double joint_error_probe(const ad::Tensor& source_reps,
                         std::span<const int> source_labels,
                         const ad::Tensor& target_reps,
                         std::optional<std::span<const int>> target_labels,
                         std::uint64_t seed);

struct DiagnosticsReport {
  ADistance d_a;
  double joint_probe_accuracy = 0.0;
  // (domain name, accuracy): "source", "target", "target/<tag>", "unseen/<i>".
  std::vector<std::pair<std::string, double>> accuracies;
  std::string config_hash;
  std::uint64_t seed = 0;

  double accuracy(const std::string& name) const;
};

// Adaptation-layer representation M(E(x)).
ad::Tensor representations(const nn::ModelBundle& model, const ad::Tensor& x);

DiagnosticsReport evaluate(const nn::ModelBundle& model,
                           const data::ExperimentData& data,
                           std::uint64_t seed, const std::string& config_hash);

// Dataset-format file of M(E(x)) rows with each sample's label and domain.
void export_embeddings(const nn::ModelBundle& model,
                       const std::vector<const data::Dataset*>& datasets,
                       const std::filesystem::path& path);

// Structured key-value document (JSON), 17 significant digits.
std::string format_report(const DiagnosticsReport& report);

}  // namespace ida::diag

#endif  // IDA_DIAGNOSTICS_HPP_
