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

// ida: command-line entry point.
//   ida gen-data | train | sweep | diagnose | export-embeddings [flags]
// Exit status: 0 ok, 1 usage or config error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "ida/config.hpp"
#include "ida/datagen.hpp"
#include "ida/diagnostics.hpp"
#include "ida/experiment.hpp"
#include "ida/nn.hpp"
#include "ida/trainer.hpp"
#include "ida/util.hpp"

namespace fs = std::filesystem;
using namespace ida;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> p;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode = true) {
  cmd->add_option("--config", c.config_path, "Config file or manifest.json");
  cmd->add_option("--seed", c.seed, "Seed override");
  if (with_mode) cmd->add_option("--mode", c.mode, "source_only, dann_style or ida");
  cmd->add_option("--p", c.p, "Source correlation P override");
}

// Config from --config (a config document or a sweep manifest) plus overrides.
config::ExperimentConfig resolve(const Common& c) {
  config::ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    const fs::path path(c.config_path);
    if (!fs::exists(path)) {
      throw config::ConfigError("config file not found: " + path.string());
    }
    const std::string text = read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    cfg = (first != std::string::npos && text[first] == '{')
              ? experiment::parse_manifest_config(text)
              : config::parse_config(text, path.string());
  }
  try {
    if (c.seed) cfg.train.seed = *c.seed;
    if (c.mode) cfg.train.mode = train::parse_mode(*c.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (c.p) cfg.data.correlation = *c.p;
  return cfg;
}

train::TrainConfig model_config(const config::ExperimentConfig& cfg) {
  train::TrainConfig tc = cfg.train;
  tc.arch.input_dim = cfg.data.u_dim + cfg.data.v_dim;
  tc.arch.num_classes = static_cast<std::size_t>(cfg.data.num_classes);
  return tc;
}

int cmd_gen_data(const Common& c) {
  const auto cfg = resolve(c);
  const fs::path out = c.out.empty() ? fs::path("data") : fs::path(c.out);
  fs::create_directories(out);
  const auto ex = experiment::build_data(cfg.data, cfg.train.seed);
  data::write_dataset(ex.source, out / "source.csv");
  data::write_dataset(ex.target, out / "target.csv");
  for (std::size_t i = 0; i < ex.unseen.size(); ++i) {
    data::write_dataset(ex.unseen[i], out / ("unseen_" + std::to_string(i) + ".csv"));
  }
  write_file_atomic(out / "data.cfg", config::format_config(cfg));
  std::cout << "wrote " << ex.source.size() << " source, " << ex.target.size()
            << " target and " << ex.unseen.size() << " unseen domain(s) to "
            << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& c) {
  auto cfg = resolve(c);
  cfg.sweep.modes = {cfg.train.mode};
  cfg.sweep.seeds = {cfg.train.seed};
  cfg.sweep.correlations = {cfg.data.correlation};
  const fs::path out = c.out.empty() ? fs::path("run") : fs::path(c.out);
  experiment::Manifest manifest;
  manifest.config = cfg;
  manifest.output_dir = out.string();
  manifest.started_at = experiment::utc_timestamp();
  const auto cell = experiment::run_cell(cfg, cfg.sweep.diagnostics, manifest.hash());
  experiment::persist_metrics(cell, cfg, out);
  nn::save_parameters(cell.model, out / "model.params");
  manifest.finished_at = experiment::utc_timestamp();
  write_file_atomic(out / "manifest.json", experiment::format_manifest(manifest));
  std::printf("mode %s  P %g  seed %llu  source %.4f  target %.4f\n",
              train::to_string(cell.mode).c_str(), cell.correlation,
              static_cast<unsigned long long>(cell.seed), cell.source_accuracy,
              cell.target_accuracy);
  if (cell.report) std::cout << diag::format_report(*cell.report);
  return 0;
}

int cmd_sweep(const Common& c, std::size_t threads) {
  auto cfg = resolve(c);
  if (c.mode) cfg.sweep.modes = {cfg.train.mode};
  if (c.seed) cfg.sweep.seeds = {cfg.train.seed};
  if (c.p) cfg.sweep.correlations = {cfg.data.correlation};
  experiment::SweepOptions opts;
  opts.out_dir = c.out.empty() ? fs::path("results") : fs::path(c.out);
  opts.threads = threads;
  opts.on_cell = [](const experiment::CellResult& r) {
    std::fprintf(stderr, "  %-11s P=%-5g seed=%llu target=%.4f\n",
                 train::to_string(r.mode).c_str(), r.correlation,
                 static_cast<unsigned long long>(r.seed), r.target_accuracy);
  };
  const auto cells = experiment::run_sweep(cfg, opts);
  std::cout << experiment::format_trend_table(experiment::trend_table(cells));
  return 0;
}

nn::ModelBundle load_model(const config::ExperimentConfig& cfg,
                           const std::string& path) {
  if (path.empty()) throw UsageError("--model is required");
  if (!fs::exists(path)) throw UsageError("model file not found: " + path);
  nn::ModelBundle model = nn::init_model(model_config(cfg).arch, cfg.train.seed);
  nn::load_parameters(model, path);
  return model;
}

int cmd_diagnose(const Common& c, const std::string& model_path) {
  const auto cfg = resolve(c);
  const auto model = load_model(cfg, model_path);
  const auto ex = experiment::build_data(cfg.data, cfg.train.seed);
  const auto report = diag::evaluate(model, ex, cfg.train.seed,
                                     config::config_hash(cfg));
  const std::string text = diag::format_report(report);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_file_atomic(fs::path(c.out) / "report.json", text);
  }
  std::cout << text;
  return 0;
}

int cmd_export(const Common& c, const std::string& model_path) {
  const auto cfg = resolve(c);
  const auto model = load_model(cfg, model_path);
  const auto ex = experiment::build_data(cfg.data, cfg.train.seed);
  std::vector<const data::Dataset*> sets = {&ex.source, &ex.target};
  for (const auto& u : ex.unseen) sets.push_back(&u);
  const fs::path out = c.out.empty() ? fs::path("embeddings.csv") : fs::path(c.out);
  diag::export_embeddings(model, sets, out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual feature intervention for domain adaptation"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults,
               "Print the full default config and exit");

  Common gen, tr, sw, dg, ex;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::string dg_model, ex_model;

  auto* c_gen = app.add_subcommand("gen-data", "Write generated datasets");
  add_common(c_gen, gen, false);
  c_gen->add_option("--out", gen.out, "Output directory");

  auto* c_train = app.add_subcommand("train", "Train one cell");
  add_common(c_train, tr);
  c_train->add_option("--out", tr.out, "Output directory");

  auto* c_sweep = app.add_subcommand("sweep", "Run the P x mode x seed grid");
  add_common(c_sweep, sw);
  c_sweep->add_option("--out", sw.out, "Output directory");
  c_sweep->add_option("--threads", threads, "Worker threads")
      ->check(CLI::PositiveNumber);

  auto* c_diag = app.add_subcommand("diagnose", "Report on a saved model");
  add_common(c_diag, dg, false);
  c_diag->add_option("--model", dg_model, "Saved model.params")->required();
  c_diag->add_option("--out", dg.out, "Directory for report.json");

  auto* c_exp = app.add_subcommand("export-embeddings",
                                   "Write adaptation-layer embeddings");
  add_common(c_exp, ex, false);
  c_exp->add_option("--model", ex_model, "Saved model.params")->required();
  c_exp->add_option("--out", ex.out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (print_defaults) {
      std::cout << config::format_config(config::ExperimentConfig{});
      return 0;
    }
    if (c_gen->parsed()) return cmd_gen_data(gen);
    if (c_train->parsed()) return cmd_train(tr);
    if (c_sweep->parsed()) return cmd_sweep(sw, threads);
    if (c_diag->parsed()) return cmd_diagnose(dg, dg_model);
    if (c_exp->parsed()) return cmd_export(ex, ex_model);
    std::cerr << app.help();
    return 1;
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
