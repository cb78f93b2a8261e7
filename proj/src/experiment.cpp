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

#include "ida/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "ida/util.hpp"

namespace ida::experiment {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto rng = make_rng(seed, 0x64617461ull + stream);
  return rng();
}

std::string correlation_label(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", p);
  return buf;
}

}  // namespace

DomainSpecs domain_specs(const config::DataConfig& d, std::uint64_t seed) {
  if (d.v_dim < 2 * d.palette_size && d.unseen_domains > 0) {
    throw std::invalid_argument(
        "data: unseen domains need v_dim >= 2 * palette_size (got v_dim " +
        std::to_string(d.v_dim) + ", palette_size " +
        std::to_string(d.palette_size) + ")");
  }
  data::DomainSpec base;
  base.num_classes = d.num_classes;
  base.u_dim = d.u_dim;
  base.v_dim = d.v_dim;
  base.class_means = data::default_class_means(d.num_classes, d.u_dim,
                                               d.class_separation);
  base.u_noise_sigma = d.u_noise_sigma;
  base.v_palette = data::default_palette(d.palette_size, d.v_dim,
                                         d.prototype_magnitude);

  DomainSpecs out;
  out.rotation_seed = derive_seed(seed, 0);
  out.identity_rotation = !d.random_rotation;

  out.source = base;
  out.source.correlation = d.correlation;
  out.source.v_assignment = data::VAssignment::label_correlated;
  out.source.n_samples = d.source_samples;
  out.source.seed = derive_seed(seed, 1);

  const std::size_t m = d.target_domains;
  for (std::size_t i = 0; i < m; ++i) {
    data::DomainSpec t = base;
    t.v_assignment = data::VAssignment::uniform_random;
    t.correlation = 1.0 / static_cast<double>(d.palette_size);
    t.n_samples = d.target_samples / m + (i < d.target_samples % m ? 1 : 0);
    t.seed = derive_seed(seed, 2 + i);
    out.targets.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < d.unseen_domains; ++i) {
    data::DomainSpec u = base;
    u.v_palette = data::default_palette(d.palette_size, d.v_dim,
                                        d.prototype_magnitude, d.palette_size);
    u.v_assignment = data::VAssignment::uniform_random;
    u.correlation = 1.0 / static_cast<double>(d.palette_size);
    u.n_samples = d.unseen_samples;
    u.seed = derive_seed(seed, 1000 + i);
    out.unseen.push_back(std::move(u));
  }
  return out;
}

data::ExperimentData build_data(const config::DataConfig& d,
                                std::uint64_t seed) {
  const DomainSpecs s = domain_specs(d, seed);
  return data::gen_experiment(s.source, s.targets, s.unseen, s.rotation_seed,
                              s.identity_rotation);
}

config::ExperimentConfig cell_config(const config::ExperimentConfig& base,
                                     train::Mode mode, double correlation,
                                     std::uint64_t seed) {
  config::ExperimentConfig c = base;
  c.train.mode = mode;
  c.train.seed = seed;
  c.data.correlation = correlation;
  return c;
}

CellResult run_cell(const config::ExperimentConfig& cfg, bool diagnostics,
                    const std::string& manifest_hash) {
  const data::ExperimentData ex = build_data(cfg.data, cfg.train.seed);
  train::TrainConfig tc = cfg.train;
  tc.arch.input_dim = ex.source.dim();
  tc.arch.num_classes = static_cast<std::size_t>(cfg.data.num_classes);
  nn::ModelBundle model = nn::init_model(tc.arch, tc.seed);
  train::TrainResult tr = train::train(std::move(model), ex.source, ex.target, tc);

  CellResult out;
  out.mode = cfg.train.mode;
  out.correlation = cfg.data.correlation;
  out.seed = cfg.train.seed;
  out.metrics = std::move(tr.metrics);
  out.model = std::move(tr.model);
  out.source_accuracy = train::accuracy(out.model, ex.source);
  out.target_accuracy = train::accuracy(out.model, ex.target);
  if (diagnostics) {
    out.report = diag::evaluate(out.model, ex, cfg.train.seed, manifest_hash);
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_manifest(const Manifest& m) {
  nlohmann::ordered_json j;
  j["manifest_hash"] = m.hash();
  j["tool_version"] = kToolVersion;
  j["output_dir"] = m.output_dir;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  std::vector<std::string> modes;
  for (auto mode : m.config.sweep.modes) modes.push_back(train::to_string(mode));
  j["modes"] = modes;
  j["seeds"] = m.config.sweep.seeds;
  j["correlations"] = m.config.sweep.correlations;
  j["config"] = config::format_config(m.config);
  return j.dump(2) + "\n";
}

config::ExperimentConfig parse_manifest_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config::ConfigError(std::string("manifest: ") + e.what());
  }
  if (!j.contains("config") || !j["config"].is_string()) {
    throw config::ConfigError("manifest: missing 'config' document");
  }
  return config::parse_config(j["config"].get<std::string>(), "<manifest>");
}

std::string format_metrics_csv(const std::vector<train::MetricsRecord>& rows) {
  std::ostringstream os;
  os << "epoch,j_supervised,l_fi,d_domain,gamma,beta,source_accuracy,"
        "target_accuracy,pseudo_label_accuracy,mean_certainty\n";
  for (const auto& r : rows) {
    os << r.epoch << "," << format_double(r.j_supervised) << ","
       << format_double(r.l_fi) << "," << format_double(r.d_domain) << ","
       << format_double(r.gamma) << "," << format_double(r.beta) << ","
       << format_double(r.source_accuracy) << ","
       << format_double(r.target_accuracy) << ","
       << format_double(r.pseudo_label_accuracy) << ","
       << format_double(r.mean_certainty) << "\n";
  }
  return os.str();
}

void persist_metrics(const CellResult& cell,
                     const config::ExperimentConfig& cell_cfg,
                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + dir.string() + ": " +
                             ec.message());
  }
  write_file_atomic(dir / "metrics.csv", format_metrics_csv(cell.metrics));
  write_file_atomic(dir / "cell.cfg", config::format_config(cell_cfg));
  if (cell.report) {
    write_file_atomic(dir / "report.json", diag::format_report(*cell.report));
  }
}

std::string format_summary_csv(const std::vector<CellResult>& cells) {
  std::ostringstream os;
  os << "mode,P,seed,target_accuracy\n";
  for (const auto& c : cells) {
    os << train::to_string(c.mode) << "," << format_double(c.correlation) << ","
       << c.seed << "," << format_double(c.target_accuracy) << "\n";
  }
  return os.str();
}

std::vector<TrendRow> trend_table(const std::vector<CellResult>& cells) {
  std::map<std::pair<double, int>, TrendRow> acc;
  std::map<std::pair<double, int>, std::size_t> with_report;
  for (const auto& c : cells) {
    auto key = std::make_pair(c.correlation, static_cast<int>(c.mode));
    TrendRow& r = acc[key];
    r.mode = c.mode;
    r.correlation = c.correlation;
    r.seeds += 1;
    r.source_accuracy += c.source_accuracy;
    r.target_accuracy += c.target_accuracy;
    if (c.report) {
      with_report[key] += 1;
      r.d_a += c.report->d_a.clipped;
      r.joint_probe_accuracy += c.report->joint_probe_accuracy;
      double unseen = 0.0;
      std::size_t n = 0;
      for (const auto& [name, a] : c.report->accuracies) {
        if (name.rfind("unseen/", 0) == 0) {
          unseen += a;
          ++n;
        }
      }
      if (n > 0) r.unseen_accuracy += unseen / static_cast<double>(n);
    }
  }
  std::vector<TrendRow> out;
  for (auto& [key, r] : acc) {
    const double n = static_cast<double>(r.seeds);
    r.source_accuracy /= n;
    r.target_accuracy /= n;
    const std::size_t nr = with_report[key];
    if (nr > 0) {
      r.d_a /= static_cast<double>(nr);
      r.joint_probe_accuracy /= static_cast<double>(nr);
      r.unseen_accuracy /= static_cast<double>(nr);
    }
    out.push_back(r);
  }
  return out;
}

std::string format_trend_table(const std::vector<TrendRow>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %6s %5s %8s %8s %8s %7s %7s\n",
                "mode", "P", "seeds", "source", "target", "unseen", "d_A",
                "joint");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-12s %6s %5zu %8.4f %8.4f %8.4f %7.4f %7.4f\n",
                  train::to_string(r.mode).c_str(),
                  correlation_label(r.correlation).c_str(), r.seeds,
                  r.source_accuracy, r.target_accuracy, r.unseen_accuracy,
                  r.d_a, r.joint_probe_accuracy);
    os << line;
  }
  return os.str();
}

std::vector<CellResult> run_sweep(const config::ExperimentConfig& cfg,
                                  const SweepOptions& options) {
  struct Job {
    train::Mode mode;
    double p;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double p : cfg.sweep.correlations) {
    for (std::uint64_t s : cfg.sweep.seeds) {
      for (train::Mode m : cfg.sweep.modes) jobs.push_back({m, p, s});
    }
  }

  Manifest manifest;
  manifest.config = cfg;
  manifest.output_dir = options.out_dir ? options.out_dir->string() : "";
  manifest.started_at = utc_timestamp();
  const std::string hash = manifest.hash();
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    write_file_atomic(*options.out_dir / "manifest.json",
                      format_manifest(manifest));
  }

  std::vector<CellResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const Job& job = jobs[i];
        const auto cc = cell_config(cfg, job.mode, job.p, job.seed);
        results[i] = run_cell(cc, cfg.sweep.diagnostics, hash);
        if (options.out_dir) {
          const auto dir = *options.out_dir /
                           ("P" + correlation_label(job.p)) /
                           (train::to_string(job.mode) + "_seed" +
                            std::to_string(job.seed));
          persist_metrics(results[i], cc, dir);
        }
        std::lock_guard<std::mutex> lock(callback_mu);
        if (options.on_cell) options.on_cell(results[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(callback_mu);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(options.threads, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  if (options.out_dir) {
    write_file_atomic(*options.out_dir / "summary.csv",
                      format_summary_csv(results));
    write_file_atomic(*options.out_dir / "trend.txt",
                      format_trend_table(trend_table(results)));
    manifest.finished_at = utc_timestamp();
    write_file_atomic(*options.out_dir / "manifest.json",
                      format_manifest(manifest));
  }
  return results;
}

}  // namespace ida::experiment
