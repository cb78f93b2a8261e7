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

#include "ida/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ida/losses.hpp"
#include "ida/trainer.hpp"
#include "ida/util.hpp"

namespace ida::diag {

namespace {

struct Standardizer {
  std::vector<double> mean, inv_std;

  explicit Standardizer(const ad::Tensor& x) {
    const std::size_t n = x.rows(), d = x.cols();
    mean.assign(d, 0.0);
    inv_std.assign(d, 0.0);
    auto v = x.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += v[i * d + j];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = v[i * d + j] - mean[j];
        var[j] += c * c;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
  }

  ad::Tensor apply(const ad::Tensor& x) const {
    const std::size_t d = x.cols();
    std::vector<double> out(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::size_t j = i % d;
      out[i] = (out[i] - mean[j]) * inv_std[j];
    }
    return ad::Tensor(x.shape(), std::move(out));
  }
};

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

template <typename T>
std::vector<T> pick(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

double probe_accuracy(const ad::Tensor& train_x, std::span<const int> train_y,
                      const ad::Tensor& test_x, std::span<const int> test_y,
                      int num_classes, std::uint64_t seed,
                      const ProbeOptions& options) {
  if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size() ||
      train_y.empty() || test_y.empty()) {
    throw std::invalid_argument("probe: empty or misaligned split");
  }
  if (train_x.cols() != test_x.cols()) {
    throw ad::ShapeError("probe: train/test widths differ");
  }
  const Standardizer z(train_x);
  const ad::Tensor xtr = z.apply(train_x);
  const ad::Tensor xte = z.apply(test_x);

  auto rng = make_rng(seed, 0x70726f6265ull);
  nn::Mlp probe({{train_x.cols(), options.hidden,
                  static_cast<std::size_t>(num_classes)},
                 nn::Activation::relu,
                 nn::Activation::identity},
                rng);
  std::vector<std::vector<double>> velocity(2 * probe.num_layers());
  const std::size_t n = train_y.size();
  const std::size_t bs = std::min(options.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + bs <= n; start += bs) {
      std::span<const std::size_t> rows(order.data() + start, bs);
      const std::vector<int> y = pick(train_y, rows);
      ad::Tape tape;
      nn::Mlp bound = probe.bind(tape);
      ad::Tensor loss = losses::cross_entropy(
          bound.forward(ad::gather_rows(xtr, rows)), y);
      tape.backward(loss);
      std::size_t slot = 0;
      for (std::size_t l = 0; l < probe.num_layers(); ++l) {
        for (int which = 0; which < 2; ++which, ++slot) {
          ad::Tensor& p = which == 0 ? probe.layers()[l].weight
                                     : probe.layers()[l].bias;
          const ad::Tensor& bp = which == 0 ? bound.layers()[l].weight
                                            : bound.layers()[l].bias;
          auto g = tape.grad(bp);
          auto gv = g.values();
          auto& v = velocity[slot];
          if (v.empty()) v.assign(gv.size(), 0.0);
          std::vector<double> next(p.values().begin(), p.values().end());
          for (std::size_t k = 0; k < gv.size(); ++k) {
            v[k] = options.momentum * v[k] + gv[k];
            next[k] -= options.learning_rate * v[k];
          }
          p = ad::Tensor(p.shape(), std::move(next));
        }
      }
    }
  }
  const auto pred = train::pseudo_label_from_logits(probe.forward(xte));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test_y.size(); ++i) {
    hit += pred.labels[i] == test_y[i];
  }
  return static_cast<double>(hit) / static_cast<double>(test_y.size());
}

ADistance proxy_a_distance(const ad::Tensor& source_reps,
                           const ad::Tensor& target_reps, std::uint64_t seed,
                           const ProbeOptions& options) {
  if (source_reps.rows() < 20 || target_reps.rows() < 20) {
    throw std::invalid_argument(
        "proxy_a_distance: need at least 20 samples per domain");
  }
  if (source_reps.cols() != target_reps.cols()) {
    throw ad::ShapeError("proxy_a_distance: representation widths differ");
  }
  auto rng = make_rng(seed, 0x61646973ull);
  ad::Tensor train_x, test_x;
  std::vector<int> train_y, test_y;
  auto split = [&](const ad::Tensor& reps, int label) {
    auto idx = shuffled(reps.rows(), rng);
    const std::size_t half = reps.rows() / 2;
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + half);
    std::vector<std::size_t> te(idx.begin() + half, idx.end());
    if (tr.empty() || te.empty()) {
      throw std::invalid_argument("proxy_a_distance: empty split");
    }
    ad::Tensor a = ad::gather_rows(reps, tr);
    ad::Tensor b = ad::gather_rows(reps, te);
    train_x = train_x.size() == 0 ? a : ad::concat_rows(train_x, a);
    test_x = test_x.size() == 0 ? b : ad::concat_rows(test_x, b);
    train_y.insert(train_y.end(), tr.size(), label);
    test_y.insert(test_y.end(), te.size(), label);
  };
  split(source_reps.detach(), 0);
  split(target_reps.detach(), 1);

  const double acc = probe_accuracy(train_x, train_y, test_x, test_y, 2,
                                    seed, options);
  ADistance out;
  out.error = 1.0 - acc;
  out.raw = 2.0 * (1.0 - 2.0 * out.error);
  out.clipped = std::clamp(out.raw, 0.0, 2.0);
  return out;
}

double joint_error_probe(const ad::Tensor& source_reps,
                         std::span<const int> source_labels,
                         const ad::Tensor& target_reps,
                         std::optional<std::span<const int>> target_labels,
                         std::uint64_t seed) {
  if (!target_labels.has_value()) {
    throw std::invalid_argument(
        "joint_error_probe: true target labels are required (evaluation only)");
  }
  if (source_reps.rows() != source_labels.size() ||
      target_reps.rows() != target_labels->size()) {
    throw ad::ShapeError("joint_error_probe: labels do not match representations");
  }
  const ad::Tensor all = ad::concat_rows(source_reps.detach(), target_reps.detach());
  std::vector<int> labels(source_labels.begin(), source_labels.end());
  labels.insert(labels.end(), target_labels->begin(), target_labels->end());
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;

  auto rng = make_rng(seed, 0x6a6f696e74ull);
  auto idx = shuffled(labels.size(), rng);
  const std::size_t n_train = labels.size() * 4 / 5;
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + n_train);
  std::vector<std::size_t> te(idx.begin() + n_train, idx.end());
  ProbeOptions opt;
  opt.hidden = 32;
  return probe_accuracy(ad::gather_rows(all, tr),
                        pick(std::span<const int>(labels), tr),
                        ad::gather_rows(all, te),
                        pick(std::span<const int>(labels), te), k, seed, opt);
}

double DiagnosticsReport::accuracy(const std::string& name) const {
  for (const auto& [n, a] : accuracies) {
    if (n == name) return a;
  }
  throw std::out_of_range("no accuracy recorded for domain '" + name + "'");
}

ad::Tensor representations(const nn::ModelBundle& model, const ad::Tensor& x) {
  return model.represent(model.features(x.detach()));
}

DiagnosticsReport evaluate(const nn::ModelBundle& model,
                           const data::ExperimentData& data,
                           std::uint64_t seed, const std::string& config_hash) {
  const std::size_t d = model.extractor.input_dim();
  auto check = [&](const data::Dataset& ds, const std::string& name) {
    if (ds.size() > 0 && ds.dim() != d) {
      throw std::invalid_argument("evaluate: " + name + " has dimension " +
                                  std::to_string(ds.dim()) + ", model expects " +
                                  std::to_string(d));
    }
  };
  check(data.source, "source");
  check(data.target, "target");
  for (std::size_t i = 0; i < data.unseen.size(); ++i) {
    check(data.unseen[i], "unseen/" + std::to_string(i));
  }

  DiagnosticsReport r;
  r.seed = seed;
  r.config_hash = config_hash;
  r.accuracies.emplace_back("source", train::accuracy(model, data.source));
  r.accuracies.emplace_back("target", train::accuracy(model, data.target));

  // Per target sub-domain when the target is a mixture.
  std::vector<int> tags = data.target.domains;
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  if (tags.size() > 1) {
    for (int tag : tags) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < data.target.size(); ++i) {
        if (data.target.domains[i] == tag) rows.push_back(i);
      }
      r.accuracies.emplace_back("target/" + std::to_string(tag),
                                train::accuracy(model, data.target.subset(rows)));
    }
  }
  for (std::size_t i = 0; i < data.unseen.size(); ++i) {
    r.accuracies.emplace_back("unseen/" + std::to_string(i),
                              train::accuracy(model, data.unseen[i]));
  }

  const ad::Tensor fs = representations(model, data.source.features);
  const ad::Tensor ft = representations(model, data.target.features);
  r.d_a = proxy_a_distance(fs, ft, seed);
  r.joint_probe_accuracy = joint_error_probe(
      fs, data.source.labels, ft, std::span<const int>(data.target.labels), seed);
  return r;
}

void export_embeddings(const nn::ModelBundle& model,
                       const std::vector<const data::Dataset*>& datasets,
                       const std::filesystem::path& path) {
  data::Dataset out;
  out.set_dim(model.mapping.output_dim());
  ad::Tensor reps;
  for (const data::Dataset* ds : datasets) {
    if (ds->size() == 0) continue;
    ad::Tensor f = representations(model, ds->features);
    reps = reps.size() == 0 ? f : ad::concat_rows(reps, f);
    out.labels.insert(out.labels.end(), ds->labels.begin(), ds->labels.end());
    out.domains.insert(out.domains.end(), ds->domains.begin(), ds->domains.end());
  }
  out.features = reps;
  out.prototypes.assign(out.labels.size(), -1);
  data::write_dataset(out, path);
}

std::string format_report(const DiagnosticsReport& r) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"config_hash\": \"" << r.config_hash << "\",\n";
  os << "  \"seed\": " << r.seed << ",\n";
  os << "  \"d_A\": " << format_double(r.d_a.clipped) << ",\n";
  os << "  \"d_A_raw\": " << format_double(r.d_a.raw) << ",\n";
  os << "  \"domain_error\": " << format_double(r.d_a.error) << ",\n";
  os << "  \"joint_probe_accuracy\": " << format_double(r.joint_probe_accuracy)
     << ",\n";
  os << "  \"accuracy\": {";
  for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
    os << (i == 0 ? "\n" : ",\n") << "    \"" << r.accuracies[i].first
       << "\": " << format_double(r.accuracies[i].second);
  }
  os << "\n  }\n}\n";
  return os.str();
}

}  // namespace ida::diag
