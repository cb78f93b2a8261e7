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

// Synthetic colored domains. Each sample is (U, V): U is a class-conditional
// Gaussian shared by every domain, V is a "color" prototype plus jitter whose
// link to the label is domain-specific. Features are [U | V] passed through a
// fixed orthonormal rotation shared by all domains of one experiment.

#ifndef IDA_DATAGEN_HPP_
#define IDA_DATAGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ida/autodiff.hpp"

namespace ida::data {

enum class VAssignment { label_correlated, uniform_random };

std::string to_string(VAssignment v);
VAssignment parse_v_assignment(const std::string& name);

struct DomainSpec {
  int num_classes = 2;
  std::size_t u_dim = 8;
  std::size_t v_dim = 8;
  std::vector<std::vector<double>> class_means;  // K points in u-space
  double u_noise_sigma = 1.0;
  std::vector<std::vector<double>> v_palette;    // prototypes in v-space
  double correlation = 0.95;                     // P
  VAssignment v_assignment = VAssignment::label_correlated;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the broken invariant.
  void validate() const;
  // Stable digest of every field.
  std::uint64_t hash() const;
};

// Class means at separation * e_k / sqrt(2) (pairwise distance `separation`).
std::vector<std::vector<double>> default_class_means(int num_classes,
                                                     std::size_t u_dim,
                                                     double separation);
// `count` prototypes magnitude * e_{offset + j} in v-space.
std::vector<std::vector<double>> default_palette(std::size_t count,
                                                 std::size_t v_dim,
                                                 double magnitude,
                                                 std::size_t offset = 0);

// Orthonormal d x d matrix (row-major) from a seeded Gaussian QR.
std::vector<double> random_rotation(std::size_t dim, std::uint64_t seed);
std::vector<double> identity_rotation(std::size_t dim);

struct Dataset {
  ad::Tensor features;            // n x d; empty when n == 0
  std::vector<int> labels;
  std::vector<int> domains;       // domain tag per sample
  std::vector<int> prototypes;    // V prototype id per sample (-1 if unknown)
  std::uint64_t spec_hash = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return dim_; }
  void set_dim(std::size_t d) { dim_ = d; }

  // Rows picked by index, in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const;

 private:
  std::size_t dim_ = 0;
};

// Raw (U, V) before rotation when `rotation` is identity.
Dataset gen_domain(const DomainSpec& spec, const std::vector<double>& rotation,
                   int domain_tag = 0);

struct ExperimentData {
  Dataset source;
  Dataset target;                // concatenation over target specs
  std::vector<Dataset> unseen;   // held out until evaluation
  std::vector<double> rotation;
};

// Domain tags: source 0, targets 1..m, unseen m+1... Target labels are kept
// for evaluation only.
ExperimentData gen_experiment(const DomainSpec& source,
                              const std::vector<DomainSpec>& targets,
                              const std::vector<DomainSpec>& unseen,
                              std::uint64_t rotation_seed,
                              bool identity = false);

// Delimited text: header "f0,...,f{d-1},label,domain", one row per sample,
// 17 significant digits.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::string format_dataset(const Dataset& data);
Dataset parse_dataset(const std::string& text, const std::string& origin);

}  // namespace ida::data

#endif  // IDA_DATAGEN_HPP_
