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

// Experiment configuration: a line-oriented "key = value" document with
// [train], [model], [data] and [sweep] sections. Unknown keys are errors.

#ifndef IDA_CONFIG_HPP_
#define IDA_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ida/trainer.hpp"

namespace ida::config {

struct DataConfig {
  int num_classes = 2;
  std::size_t u_dim = 8;
  std::size_t v_dim = 8;
  double class_separation = 5.0;
  double u_noise_sigma = 1.0;
  std::size_t palette_size = 4;
  // Defaults to twice the class separation.
  double prototype_magnitude = 10.0;
  double correlation = 0.95;
  std::size_t source_samples = 1000;
  std::size_t target_samples = 1000;
  std::size_t target_domains = 1;
  std::size_t unseen_domains = 1;
  std::size_t unseen_samples = 1000;
  bool random_rotation = true;

  bool operator==(const DataConfig&) const = default;
};

struct SweepConfig {
  std::vector<double> correlations = {0.5, 0.7, 0.9, 0.95};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<train::Mode> modes = {train::Mode::source_only,
                                    train::Mode::dann_style, train::Mode::ida};
  bool diagnostics = true;

  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  train::TrainConfig train;
  DataConfig data;
  SweepConfig sweep;

  bool operator==(const ExperimentConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses a config document. Errors name the origin, line and key.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Full document with every key; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& config);

// Digest of the canonical document.
std::string config_hash(const ExperimentConfig& config);

}  // namespace ida::config

#endif  // IDA_CONFIG_HPP_
