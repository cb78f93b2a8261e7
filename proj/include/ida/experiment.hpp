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

// Runs single cells and (mode x P x seed) sweeps, and persists their outputs.

#ifndef IDA_EXPERIMENT_HPP_
#define IDA_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ida/config.hpp"
#include "ida/datagen.hpp"
#include "ida/diagnostics.hpp"
#include "ida/nn.hpp"
#include "ida/trainer.hpp"

namespace ida::experiment {

inline constexpr const char* kToolVersion = "0.3.0";

// Domain specs of one cell. Data seeds depend on `seed` only, so every mode
// of a (P, seed) cell sees the same samples.
struct DomainSpecs {
  data::DomainSpec source;
  std::vector<data::DomainSpec> targets;
  std::vector<data::DomainSpec> unseen;
  std::uint64_t rotation_seed = 0;
  bool identity_rotation = false;
};

DomainSpecs domain_specs(const config::DataConfig& data, std::uint64_t seed);
data::ExperimentData build_data(const config::DataConfig& data,
                                std::uint64_t seed);

struct CellResult {
  train::Mode mode = train::Mode::ida;
  double correlation = 0.0;
  std::uint64_t seed = 0;
  std::vector<train::MetricsRecord> metrics;
  std::optional<diag::DiagnosticsReport> report;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
  nn::ModelBundle model;
};

// Trains one (mode, P, seed) cell described entirely by `config`
// (train.mode, data.correlation, train.seed).
CellResult run_cell(const config::ExperimentConfig& config, bool diagnostics,
                    const std::string& manifest_hash);

// Cell config: base with mode, correlation and seed overridden.
config::ExperimentConfig cell_config(const config::ExperimentConfig& base,
                                     train::Mode mode, double correlation,
                                     std::uint64_t seed);

struct Manifest {
  config::ExperimentConfig config;
  std::string output_dir;
  std::string started_at;
  std::string finished_at;

  std::string hash() const { return config::config_hash(config); }
};

std::string format_manifest(const Manifest& manifest);
// Recovers the config embedded in a manifest document.
config::ExperimentConfig parse_manifest_config(const std::string& text);

std::string format_metrics_csv(const std::vector<train::MetricsRecord>& rows);

// metrics.csv, report.json (when diagnostics ran) and cell.cfg under `dir`.
void persist_metrics(const CellResult& cell,
                     const config::ExperimentConfig& cell_cfg,
                     const std::filesystem::path& dir);

std::string format_summary_csv(const std::vector<CellResult>& cells);

// Per (mode, P) means over seeds.
struct TrendRow {
  train::Mode mode = train::Mode::ida;
  double correlation = 0.0;
  std::size_t seeds = 0;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
  double unseen_accuracy = 0.0;
  double d_a = 0.0;
  double joint_probe_accuracy = 0.0;
};
std::vector<TrendRow> trend_table(const std::vector<CellResult>& cells);
std::string format_trend_table(const std::vector<TrendRow>& rows);

std::string utc_timestamp();

struct SweepOptions {
  std::optional<std::filesystem::path> out_dir;
  std::size_t threads = 1;
  std::function<void(const CellResult&)> on_cell;
};

// Cells ordered by (P, seed, mode) regardless of thread count.
std::vector<CellResult> run_sweep(const config::ExperimentConfig& config,
                                  const SweepOptions& options = {});

}  // namespace ida::experiment

#endif  // IDA_EXPERIMENT_HPP_
