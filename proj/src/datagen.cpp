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

#include "ida/datagen.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ida/util.hpp"

namespace ida::data {

std::string to_string(VAssignment v) {
  return v == VAssignment::label_correlated ? "label_correlated"
                                            : "uniform_random";
}

VAssignment parse_v_assignment(const std::string& name) {
  if (name == "label_correlated") return VAssignment::label_correlated;
  if (name == "uniform_random") return VAssignment::uniform_random;
  throw std::invalid_argument("unknown v_assignment '" + name + "'");
}

void DomainSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (u_dim == 0 || v_dim == 0) {
    throw std::invalid_argument("u_dim and v_dim must be positive");
  }
  if (!(u_noise_sigma > 0.0)) {
    throw std::invalid_argument("u_noise_sigma must be positive");
  }
  if (class_means.size() != static_cast<std::size_t>(num_classes)) {
    throw std::invalid_argument("need " + std::to_string(num_classes) +
                                " class means, got " +
                                std::to_string(class_means.size()));
  }
  for (const auto& m : class_means) {
    if (m.size() != u_dim) {
      throw std::invalid_argument("class mean length != u_dim");
    }
  }
  for (std::size_t a = 0; a < class_means.size(); ++a) {
    for (std::size_t b = a + 1; b < class_means.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < u_dim; ++i) {
        const double d = class_means[a][i] - class_means[b][i];
        d2 += d * d;
      }
      if (std::sqrt(d2) < 4.0 * u_noise_sigma) {
        throw std::invalid_argument(
            "class means " + std::to_string(a) + " and " + std::to_string(b) +
            " are closer than 4 * u_noise_sigma");
      }
    }
  }
  if (v_palette.empty()) throw std::invalid_argument("v_palette is empty");
  for (const auto& p : v_palette) {
    if (p.size() != v_dim) {
      throw std::invalid_argument("palette prototype length != v_dim");
    }
  }
  const double lo = 1.0 / static_cast<double>(v_palette.size());
  if (!(correlation >= lo - 1e-12 && correlation <= 1.0)) {
    throw std::invalid_argument("correlation P=" + std::to_string(correlation) +
                                " outside [" + std::to_string(lo) + ", 1]");
  }
}

std::uint64_t DomainSpec::hash() const {
  std::ostringstream os;
  os << num_classes << ";" << u_dim << ";" << v_dim << ";";
  for (const auto& m : class_means) {
    for (double v : m) os << format_double(v) << ",";
    os << ";";
  }
  os << format_double(u_noise_sigma) << ";";
  for (const auto& p : v_palette) {
    for (double v : p) os << format_double(v) << ",";
    os << ";";
  }
  os << format_double(correlation) << ";" << to_string(v_assignment) << ";"
     << n_samples << ";" << seed;
  return fnv1a(os.str());
}

std::vector<std::vector<double>> default_class_means(int num_classes,
                                                     std::size_t u_dim,
                                                     double separation) {
  if (static_cast<std::size_t>(num_classes) > u_dim) {
    throw std::invalid_argument("default_class_means: num_classes > u_dim");
  }
  std::vector<std::vector<double>> means(num_classes,
                                         std::vector<double>(u_dim, 0.0));
  for (int k = 0; k < num_classes; ++k) {
    means[k][k] = separation / std::sqrt(2.0);
  }
  return means;
}

std::vector<std::vector<double>> default_palette(std::size_t count,
                                                 std::size_t v_dim,
                                                 double magnitude,
                                                 std::size_t offset) {
  if (offset + count > v_dim) {
    throw std::invalid_argument("default_palette: offset + count > v_dim");
  }
  std::vector<std::vector<double>> palette(count,
                                           std::vector<double>(v_dim, 0.0));
  for (std::size_t j = 0; j < count; ++j) palette[j][offset + j] = magnitude;
  return palette;
}

std::vector<double> random_rotation(std::size_t dim, std::uint64_t seed) {
  auto rng = make_rng(seed, 0x726f74ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  std::vector<double> out(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) out[i * dim + j] = q(i, j);
  }
  return out;
}

std::vector<double> identity_rotation(std::size_t dim) {
  std::vector<double> out(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.spec_hash = spec_hash;
  out.dim_ = dim_;
  if (rows.empty()) return out;
  out.features = ad::gather_rows(features, rows);
  for (std::size_t r : rows) {
    out.labels.push_back(labels.at(r));
    out.domains.push_back(domains.at(r));
    out.prototypes.push_back(prototypes.empty() ? -1 : prototypes.at(r));
  }
  return out;
}

Dataset gen_domain(const DomainSpec& spec, const std::vector<double>& rotation,
                   int domain_tag) {
  spec.validate();
  const std::size_t d = spec.u_dim + spec.v_dim;
  if (rotation.size() != d * d) {
    throw std::invalid_argument("gen_domain: rotation must be " +
                                std::to_string(d) + "x" + std::to_string(d));
  }
  auto rng = make_rng(spec.seed, 0x64617461ull);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> label_dist(0, spec.num_classes - 1);
  const int palette = static_cast<int>(spec.v_palette.size());
  std::uniform_int_distribution<int> any_proto(0, palette - 1);
  std::uniform_int_distribution<int> other_proto(0, std::max(0, palette - 2));
  const double v_sigma = spec.u_noise_sigma / 4.0;

  Dataset out;
  out.spec_hash = spec.hash();
  out.set_dim(d);
  std::vector<double> values;
  values.reserve(spec.n_samples * d);
  std::vector<double> raw(d);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    const int y = label_dist(rng);
    int proto = 0;
    if (spec.v_assignment == VAssignment::uniform_random) {
      proto = any_proto(rng);
    } else {
      const int designated = y % palette;
      if (coin(rng) < spec.correlation || palette == 1) {
        proto = designated;
      } else {
        proto = other_proto(rng);
        if (proto >= designated) ++proto;
      }
    }
    for (std::size_t i = 0; i < spec.u_dim; ++i) {
      raw[i] = spec.class_means[y][i] + spec.u_noise_sigma * unit(rng);
    }
    for (std::size_t i = 0; i < spec.v_dim; ++i) {
      raw[spec.u_dim + i] = spec.v_palette[proto][i] + v_sigma * unit(rng);
    }
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += rotation[i * d + j] * raw[j];
      values.push_back(acc);
    }
    out.labels.push_back(y);
    out.domains.push_back(domain_tag);
    out.prototypes.push_back(proto);
  }
  if (spec.n_samples > 0) {
    out.features = ad::Tensor({spec.n_samples, d}, std::move(values));
  }
  return out;
}

namespace {

void check_compatible(const DomainSpec& a, const DomainSpec& b,
                      const std::string& which) {
  if (a.num_classes != b.num_classes || a.u_dim != b.u_dim ||
      a.v_dim != b.v_dim || a.class_means != b.class_means) {
    throw std::invalid_argument(
        "gen_experiment: " + which +
        " spec does not share the source's classes, dimensions and class means");
  }
}

Dataset concat(const std::vector<Dataset>& parts, std::size_t dim) {
  Dataset out;
  out.set_dim(dim);
  std::vector<double> values;
  std::uint64_t h = fnv1a("");
  for (const Dataset& p : parts) {
    if (p.size() > 0) {
      values.insert(values.end(), p.features.values().begin(),
                    p.features.values().end());
    }
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.domains.insert(out.domains.end(), p.domains.begin(), p.domains.end());
    out.prototypes.insert(out.prototypes.end(), p.prototypes.begin(),
                          p.prototypes.end());
    h = fnv1a(hex64(p.spec_hash), h);
  }
  out.spec_hash = h;
  if (!out.labels.empty()) {
    out.features = ad::Tensor({out.labels.size(), dim}, std::move(values));
  }
  return out;
}

}  // namespace

ExperimentData gen_experiment(const DomainSpec& source,
                              const std::vector<DomainSpec>& targets,
                              const std::vector<DomainSpec>& unseen,
                              std::uint64_t rotation_seed, bool identity) {
  if (targets.empty()) {
    throw std::invalid_argument("gen_experiment: need at least one target spec");
  }
  source.validate();
  for (const auto& t : targets) check_compatible(source, t, "target");
  for (const auto& u : unseen) check_compatible(source, u, "unseen");

  const std::size_t d = source.u_dim + source.v_dim;
  ExperimentData ex;
  ex.rotation = identity ? identity_rotation(d) : random_rotation(d, rotation_seed);
  ex.source = gen_domain(source, ex.rotation, 0);
  std::vector<Dataset> parts;
  int tag = 1;
  for (const auto& t : targets) parts.push_back(gen_domain(t, ex.rotation, tag++));
  ex.target = concat(parts, d);
  for (const auto& u : unseen) ex.unseen.push_back(gen_domain(u, ex.rotation, tag++));
  return ex;
}

// ---- dataset I/O ------------------------------------------------------------

std::string format_dataset(const Dataset& data) {
  std::ostringstream os;
  for (std::size_t j = 0; j < data.dim(); ++j) os << "f" << j << ",";
  os << "label,domain\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      os << format_double(data.features.at(i, j)) << ",";
    }
    os << data.labels[i] << "," << data.domains[i] << "\n";
  }
  return os.str();
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, format_dataset(data));
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

int parse_int(const std::string& s) {
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an integer: " + s);
  return v;
}

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(origin + ": missing header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 3 || header[header.size() - 2] != "label" ||
      header.back() != "domain") {
    throw std::runtime_error(origin +
                             ": header must be f0..f{d-1},label,domain");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw std::runtime_error(origin + ": header column " + std::to_string(j) +
                               " should be f" + std::to_string(j));
    }
  }
  Dataset out;
  out.set_dim(d);
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != d + 2) {
      throw std::runtime_error(origin + ": row " + std::to_string(row) +
                               " has " + std::to_string(cells.size()) +
                               " columns, header has " +
                               std::to_string(d + 2));
    }
    try {
      for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(cells[j]));
      out.labels.push_back(parse_int(cells[d]));
      out.domains.push_back(parse_int(cells[d + 1]));
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ": row " + std::to_string(row) + ": " +
                               e.what());
    }
    out.prototypes.push_back(-1);
  }
  if (!out.labels.empty()) {
    out.features = ad::Tensor({out.labels.size(), d}, std::move(values));
  }
  return out;
}

Dataset read_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path), path.string());
}

}  // namespace ida::data
