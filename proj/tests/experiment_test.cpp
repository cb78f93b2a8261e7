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
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ida/config.hpp"
#include "ida/experiment.hpp"
#include "ida/util.hpp"

namespace ida::experiment {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ida_experiment_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

config::ExperimentConfig tiny() {
  config::ExperimentConfig c = config::parse_config(R"(
[train]
epochs = 3
warmup_epochs = 1
batch_size = 32
[model]
extractor_hidden = 16
adaptation_dim = 8
discriminator_hidden = 8
attention_hidden = 8
[data]
u_dim = 4
v_dim = 8
source_samples = 128
target_samples = 128
unseen_samples = 64
[sweep]
correlations = 0.5, 0.95
seeds = 0
)");
  return c;
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const config::ExperimentConfig c = config::parse_config("");
  EXPECT_EQ(c, config::ExperimentConfig{});
  EXPECT_EQ(c.train.t_d, 9.0);
  EXPECT_EQ(c.train.q, 2);
  EXPECT_EQ(c.train.beta_ratio, 0.1);
  EXPECT_EQ(c.train.k_schedule, -10.0);
  EXPECT_EQ(c.data.palette_size, 4u);
  EXPECT_EQ(c.sweep.correlations, (std::vector<double>{0.5, 0.7, 0.9, 0.95}));
}

TEST(Config, FormatRoundTrip) {
  const config::ExperimentConfig d;
  EXPECT_EQ(config::parse_config(config::format_config(d)), d);
  const config::ExperimentConfig t = tiny();
  EXPECT_EQ(config::parse_config(config::format_config(t)), t);
  EXPECT_EQ(config::config_hash(t), config::config_hash(tiny()));
  EXPECT_NE(config::config_hash(t), config::config_hash(d));
}

TEST(Config, OverridesAndComments) {
  const auto c = config::parse_config(
      "# comment\n[train]\nmode = dann_style  # trailing\nt_d = 4.5\n"
      "[data]\nrotation = identity\n[sweep]\nmodes = ida\n");
  EXPECT_EQ(c.train.mode, train::Mode::dann_style);
  EXPECT_EQ(c.train.t_d, 4.5);
  EXPECT_FALSE(c.data.random_rotation);
  EXPECT_EQ(c.sweep.modes, (std::vector<train::Mode>{train::Mode::ida}));
}

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    config::parse_config(text, "x.cfg");
    FAIL() << "accepted: " << text;
  } catch (const config::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(Config, RejectsBadDocuments) {
  expect_config_error("[train]\nt_d = -1\n", "x.cfg:2: invalid value for 't_d'");
  expect_config_error("[train]\nq = 3\n", "'q'");
  expect_config_error("[train]\nlearning_rat = 0.1\n", "unknown key 'learning_rat'");
  expect_config_error("[optim]\n", "unknown section [optim]");
  expect_config_error("epochs = 3\n", "outside of a section");
  expect_config_error("[train]\nepochs\n", "expected 'key = value'");
  expect_config_error("[train]\nmode = dann\n", "'mode'");
  expect_config_error("[sweep]\ncorrelations = 0.5, x\n", "'correlations'");
}

TEST(Config, MissingFileNamed) {
  try {
    config::load_config("/nonexistent/ida.cfg");
    FAIL();
  } catch (const config::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/ida.cfg"), std::string::npos);
  }
}

TEST(Data, SeedsIndependentOfMode) {
  const auto a = build_data(tiny().data, 3);
  const auto b = build_data(tiny().data, 3);
  const auto c = build_data(tiny().data, 4);
  EXPECT_EQ(data::format_dataset(a.target), data::format_dataset(b.target));
  EXPECT_NE(data::format_dataset(a.target), data::format_dataset(c.target));
  ASSERT_EQ(a.unseen.size(), 1u);
  config::DataConfig narrow = tiny().data;
  narrow.v_dim = 6;
  EXPECT_THROW(domain_specs(narrow, 0), std::invalid_argument);
}

TEST(Persist, MetricsLinePerEpoch) {
  config::ExperimentConfig c = tiny();
  c.train.epochs = 10;
  const CellResult cell = run_cell(c, false, "h");
  const fs::path dir = fresh_dir("metrics");
  persist_metrics(cell, c, dir);
  const std::string csv = read_file(dir / "metrics.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  EXPECT_EQ(csv.rfind("epoch,j_supervised,l_fi,d_domain,gamma,beta,", 0), 0u);
  EXPECT_FALSE(fs::exists(dir / "report.json"));
  EXPECT_EQ(config::load_config(dir / "cell.cfg"), c);
}

TEST(Manifest, EmbedsTheConfig) {
  Manifest m;
  m.config = tiny();
  m.output_dir = "out";
  m.started_at = "2026-01-01T00:00:00Z";
  const std::string doc = format_manifest(m);
  EXPECT_EQ(parse_manifest_config(doc), m.config);
  EXPECT_NE(doc.find(m.hash()), std::string::npos);
  EXPECT_THROW(parse_manifest_config("{}"), config::ConfigError);
  EXPECT_THROW(parse_manifest_config("{"), config::ConfigError);
}

std::vector<std::string> cell_files(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "manifest.json") continue;
    out.push_back(fs::relative(e.path(), root).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Sweep, RerunsAreByteIdentical) {
  const config::ExperimentConfig c = tiny();
  const fs::path a = fresh_dir("sweep_a");
  const fs::path b = fresh_dir("sweep_b");
  SweepOptions oa;
  oa.out_dir = a;
  SweepOptions ob;
  ob.out_dir = b;
  ob.threads = 2;
  const auto cells = run_sweep(c, oa);
  run_sweep(c, ob);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].correlation, 0.5);
  EXPECT_EQ(cells[0].mode, train::Mode::source_only);
  EXPECT_EQ(cells[5].mode, train::Mode::ida);

  const auto files = cell_files(a);
  EXPECT_EQ(files, cell_files(b));
  EXPECT_NE(std::find(files.begin(), files.end(), "summary.csv"), files.end());
  EXPECT_NE(std::find(files.begin(), files.end(), "P0.95/ida_seed0/report.json"),
            files.end());
  for (const auto& f : files) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
}

TEST(Sweep, ReportCarriesManifestHash) {
  const config::ExperimentConfig c = tiny();
  const fs::path dir = fresh_dir("hash");
  SweepOptions o;
  o.out_dir = dir;
  run_sweep(c, o);
  const std::string manifest = read_file(dir / "manifest.json");
  const std::string hash = config::config_hash(c);
  EXPECT_NE(manifest.find("\"manifest_hash\": \"" + hash + "\""), std::string::npos);
  const std::string report = read_file(dir / "P0.5" / "dann_style_seed0" / "report.json");
  EXPECT_NE(report.find("\"config_hash\": \"" + hash + "\""), std::string::npos);
  // the manifest alone reproduces the sweep
  EXPECT_EQ(parse_manifest_config(manifest), c);
}

TEST(Summary, Columns) {
  CellResult r;
  r.mode = train::Mode::dann_style;
  r.correlation = 0.9;
  r.seed = 2;
  r.target_accuracy = 0.75;
  const std::string s = format_summary_csv({r});
  EXPECT_EQ(s, "mode,P,seed,target_accuracy\ndann_style," + format_double(0.9) +
                   ",2,0.75\n");
}

TEST(Trend, MeansOverSeeds) {
  std::vector<CellResult> cells(2);
  cells[0].mode = cells[1].mode = train::Mode::ida;
  cells[0].correlation = cells[1].correlation = 0.95;
  cells[0].seed = 0;
  cells[1].seed = 1;
  cells[0].target_accuracy = 0.8;
  cells[1].target_accuracy = 0.9;
  const auto rows = trend_table(cells);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].seeds, 2u);
  EXPECT_NEAR(rows[0].target_accuracy, 0.85, 1e-12);
  EXPECT_FALSE(format_trend_table(rows).empty());
}

}  // namespace
}  // namespace ida::experiment
