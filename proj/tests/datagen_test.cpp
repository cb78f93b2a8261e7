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
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ida/datagen.hpp"
#include "ida/diagnostics.hpp"
#include "ida/util.hpp"

namespace ida::data {
namespace {

namespace fs = std::filesystem;

DomainSpec spec(double p, VAssignment v, std::size_t n, std::uint64_t seed) {
  DomainSpec s;
  s.class_means = default_class_means(2, 8, 5.0);
  s.v_palette = default_palette(4, 8, 10.0);
  s.correlation = p;
  s.v_assignment = v;
  s.n_samples = n;
  s.seed = seed;
  return s;
}

// Columns [begin, end) of x.
ad::Tensor columns(const ad::Tensor& x, std::size_t begin, std::size_t end) {
  std::vector<double> v;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = begin; c < end; ++c) v.push_back(x.at(r, c));
  }
  return ad::Tensor({x.rows(), end - begin}, v);
}

// Held-out probe accuracy with a 4:1 split.
double probe(const ad::Tensor& x, const std::vector<int>& y,
             const ad::Tensor& test_x, const std::vector<int>& test_y) {
  return diag::probe_accuracy(x, y, test_x, test_y, 2, 0, diag::ProbeOptions{});
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ida_datagen_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(GenDomain, FullCorrelationUsesClassPrototype) {
  const Dataset d = gen_domain(spec(1.0, VAssignment::label_correlated, 500, 1),
                               identity_rotation(16));
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.prototypes[i], d.labels[i]);
}

TEST(GenDomain, UniformPrototypeFrequencies) {
  const std::size_t n = 10000;
  const Dataset d = gen_domain(spec(0.95, VAssignment::uniform_random, n, 2),
                               identity_rotation(16));
  std::map<int, int> counts;
  for (int p : d.prototypes) ++counts[p];
  ASSERT_EQ(counts.size(), 4u);
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (const auto& [p, c] : counts) EXPECT_NEAR(c, n * 0.25, 5 * sd) << p;
}

TEST(GenDomain, ChanceCorrelationCarriesNoLabelInformation) {
  const std::size_t n = 10000;
  const Dataset d = gen_domain(spec(0.25, VAssignment::label_correlated, n, 3),
                               identity_rotation(16));
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> py, pv;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{d.labels[i], d.prototypes[i]}] += 1.0 / n;
    py[d.labels[i]] += 1.0 / n;
    pv[d.prototypes[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [k, p] : joint) mi += p * std::log(p / (py[k.first] * pv[k.second]));
  EXPECT_LT(mi, 0.01);
}

TEST(GenDomain, DeterministicInSeed) {
  const auto rot = random_rotation(16, 4);
  const Dataset a = gen_domain(spec(0.9, VAssignment::label_correlated, 100, 5), rot);
  const Dataset b = gen_domain(spec(0.9, VAssignment::label_correlated, 100, 5), rot);
  const Dataset c = gen_domain(spec(0.9, VAssignment::label_correlated, 100, 6), rot);
  EXPECT_EQ(format_dataset(a), format_dataset(b));
  EXPECT_NE(format_dataset(a), format_dataset(c));
  EXPECT_EQ(a.spec_hash, b.spec_hash);
  EXPECT_NE(a.spec_hash, c.spec_hash);
}

TEST(GenDomain, InvalidSpecsRejected) {
  DomainSpec s = spec(0.1, VAssignment::label_correlated, 10, 0);
  EXPECT_THROW(gen_domain(s, identity_rotation(16)), std::invalid_argument);
  s = spec(0.9, VAssignment::label_correlated, 10, 0);
  s.class_means = default_class_means(2, 8, 1.0);
  EXPECT_THROW(gen_domain(s, identity_rotation(16)), std::invalid_argument);
  s = spec(0.9, VAssignment::label_correlated, 10, 0);
  EXPECT_THROW(gen_domain(s, identity_rotation(8)), std::invalid_argument);
}

TEST(Rotation, Orthonormal) {
  const std::size_t d = 16;
  const auto r = random_rotation(d, 9);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += r[i * d + k] * r[j * d + k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-12);
    }
  }
  EXPECT_EQ(random_rotation(d, 9), r);
}

TEST(Experiment, TargetsConcatenateWithTags) {
  const DomainSpec src = spec(0.9, VAssignment::label_correlated, 300, 1);
  const ExperimentData ex = gen_experiment(
      src,
      {spec(0.9, VAssignment::uniform_random, 500, 2),
       spec(0.9, VAssignment::uniform_random, 500, 3)},
      {spec(0.9, VAssignment::uniform_random, 200, 4)}, 7);
  ASSERT_EQ(ex.target.size(), 1000u);
  EXPECT_EQ(ex.target.features.rows(), 1000u);
  EXPECT_EQ(ex.target.domains.front(), 1);
  EXPECT_EQ(ex.target.domains[499], 1);
  EXPECT_EQ(ex.target.domains[500], 2);
  ASSERT_EQ(ex.unseen.size(), 1u);
  EXPECT_EQ(ex.unseen[0].domains.front(), 3);
  EXPECT_EQ(ex.source.domains.front(), 0);
}

TEST(Experiment, MismatchedClassStructureRejected) {
  const DomainSpec src = spec(0.9, VAssignment::label_correlated, 10, 1);
  DomainSpec other = spec(0.9, VAssignment::uniform_random, 10, 2);
  other.class_means = default_class_means(2, 8, 6.0);
  EXPECT_THROW(gen_experiment(src, {other}, {}, 0), std::invalid_argument);
  EXPECT_THROW(gen_experiment(src, {}, {}, 0), std::invalid_argument);
}

TEST(Experiment, IdenticalSpecsAreIndistinguishable) {
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DomainSpec a = spec(0.9, VAssignment::label_correlated, 1000, 10 + seed);
    const DomainSpec b = spec(0.9, VAssignment::label_correlated, 1000, 20 + seed);
    const ExperimentData ex = gen_experiment(a, {b}, {}, seed);
    mean += diag::proxy_a_distance(ex.source.features, ex.target.features, seed).raw;
  }
  EXPECT_LT(mean / 5.0, 0.2);
}

TEST(Properties, ClassesSolvableFromU) {
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rot = identity_rotation(16);
    const Dataset tr = gen_domain(spec(0.9, VAssignment::uniform_random, 800, seed), rot);
    const Dataset te = gen_domain(spec(0.9, VAssignment::uniform_random, 400, 50 + seed), rot);
    acc += probe(columns(tr.features, 0, 8), tr.labels, columns(te.features, 0, 8),
                 te.labels);
  }
  EXPECT_GE(acc / 5.0, 0.99);
}

TEST(Properties, SpuriousColorTrap) {
  const auto rot = identity_rotation(16);
  const Dataset src = gen_domain(spec(1.0, VAssignment::label_correlated, 800, 1), rot);
  const Dataset src_test = gen_domain(spec(1.0, VAssignment::label_correlated, 400, 2), rot);
  const Dataset tgt = gen_domain(spec(1.0, VAssignment::uniform_random, 2000, 3), rot);
  const ad::Tensor v = columns(src.features, 8, 16);
  EXPECT_GE(probe(v, src.labels, columns(src_test.features, 8, 16), src_test.labels),
            0.99);
  const double on_target =
      probe(v, src.labels, columns(tgt.features, 8, 16), tgt.labels);
  EXPECT_NEAR(on_target, 0.5, 0.1);
}

TEST(Io, RoundTripIsExact) {
  const Dataset d = gen_domain(spec(0.9, VAssignment::label_correlated, 64, 1),
                               random_rotation(16, 1), 3);
  const fs::path p = scratch("d.csv");
  write_dataset(d, p);
  const Dataset back = read_dataset(p);
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.dim(), d.dim());
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.domains, d.domains);
  for (std::size_t i = 0; i < d.features.size(); ++i) {
    ASSERT_EQ(back.features.values()[i], d.features.values()[i]);
  }
}

TEST(Io, EmptyDatasetIsHeaderOnly) {
  const Dataset d = gen_domain(spec(0.9, VAssignment::label_correlated, 0, 1),
                               identity_rotation(16));
  const std::string text = format_dataset(d);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  const Dataset back = parse_dataset(text, "empty.csv");
  EXPECT_EQ(back.size(), 0u);
  EXPECT_EQ(back.dim(), 16u);
}

TEST(Io, BadCellNamesTheRow) {
  std::string text = "f0,f1,label,domain\n";
  for (int r = 1; r <= 9; ++r) {
    text += (r == 7 ? std::string("abc") : std::to_string(r)) + ",0.5,1,0\n";
  }
  try {
    parse_dataset(text, "bad.csv");
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(Io, ColumnCountMismatch) {
  EXPECT_THROW(parse_dataset("f0,f1,label,domain\n1,2,0\n", "x.csv"),
               std::runtime_error);
  EXPECT_THROW(parse_dataset("a,b,label,domain\n", "x.csv"), std::runtime_error);
  EXPECT_THROW(parse_dataset("", "x.csv"), std::runtime_error);
}

}  // namespace
}  // namespace ida::data
