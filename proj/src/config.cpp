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

#include "ida/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "ida/util.hpp"

namespace ida::config {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& v) { return parse_double(v); }

std::uint64_t to_u64(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + v + "'");
  }
  return std::stoull(v);
}

long to_long(const std::string& v) {
  std::size_t pos = 0;
  const long out = std::stol(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

template <typename T>
std::string join_ints(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // [train]
      {"train.epochs", [](auto& c, auto& v) { c.train.epochs = to_u64(v); }},
      {"train.warmup_epochs",
       [](auto& c, auto& v) { c.train.warmup_epochs = to_u64(v); }},
      {"train.batch_size",
       [](auto& c, auto& v) {
         c.train.batch_size = to_u64(v);
         require(c.train.batch_size >= 2, "must be >= 2");
       }},
      {"train.learning_rate",
       [](auto& c, auto& v) {
         c.train.learning_rate = to_double(v);
         require(c.train.learning_rate > 0.0, "must be positive");
       }},
      {"train.momentum",
       [](auto& c, auto& v) {
         c.train.momentum = to_double(v);
         require(c.train.momentum >= 0.0 && c.train.momentum < 1.0,
                 "must lie in [0, 1)");
       }},
      {"train.grad_clip",
       [](auto& c, auto& v) {
         c.train.grad_clip = to_double(v);
         require(c.train.grad_clip >= 0.0, "must be nonnegative");
       }},
      {"train.t_d",
       [](auto& c, auto& v) {
         c.train.t_d = to_double(v);
         require(c.train.t_d > 0.0, "must be positive");
       }},
      {"train.q",
       [](auto& c, auto& v) {
         c.train.q = static_cast<int>(to_long(v));
         require(c.train.q == 1 || c.train.q == 2, "must be 1 or 2");
       }},
      {"train.k_schedule",
       [](auto& c, auto& v) { c.train.k_schedule = to_double(v); }},
      {"train.beta_ratio",
       [](auto& c, auto& v) {
         c.train.beta_ratio = to_double(v);
         require(c.train.beta_ratio >= 0.0, "must be nonnegative");
       }},
      {"train.seed", [](auto& c, auto& v) { c.train.seed = to_u64(v); }},
      {"train.certainty",
       [](auto& c, auto& v) {
         c.train.certainty = losses::parse_certainty_mode(v);
       }},
      {"train.inter_class_hinge",
       [](auto& c, auto& v) { c.train.inter_class_hinge = to_bool(v); }},
      {"train.reverse_attention",
       [](auto& c, auto& v) { c.train.reverse_attention = to_bool(v); }},
      {"train.consistency",
       [](auto& c, auto& v) {
         c.train.consistency = train::parse_consistency_space(v);
       }},
      {"train.mode",
       [](auto& c, auto& v) { c.train.mode = train::parse_mode(v); }},
      // [model]
      {"model.extractor_hidden",
       [](auto& c, auto& v) {
         c.train.arch.extractor_hidden.clear();
         for (const auto& s : split_list(v)) {
           c.train.arch.extractor_hidden.push_back(to_u64(s));
           require(c.train.arch.extractor_hidden.back() > 0, "sizes must be positive");
         }
         require(!c.train.arch.extractor_hidden.empty(), "needs at least one size");
       }},
      {"model.adaptation_dim",
       [](auto& c, auto& v) {
         c.train.arch.adaptation_dim = to_u64(v);
         require(c.train.arch.adaptation_dim > 0, "must be positive");
       }},
      {"model.discriminator_hidden",
       [](auto& c, auto& v) {
         c.train.arch.discriminator_hidden.clear();
         for (const auto& s : split_list(v)) {
           c.train.arch.discriminator_hidden.push_back(to_u64(s));
           require(c.train.arch.discriminator_hidden.back() > 0,
                   "sizes must be positive");
         }
       }},
      {"model.attention_hidden",
       [](auto& c, auto& v) {
         c.train.arch.attention_hidden = to_u64(v);
         require(c.train.arch.attention_hidden > 0, "must be positive");
       }},
      {"model.intervention_layer",
       [](auto& c, auto& v) { c.train.arch.intervention_layer = to_u64(v); }},
      // [data]
      {"data.num_classes",
       [](auto& c, auto& v) {
         c.data.num_classes = static_cast<int>(to_long(v));
         require(c.data.num_classes >= 2, "must be >= 2");
       }},
      {"data.u_dim", [](auto& c, auto& v) { c.data.u_dim = to_u64(v); }},
      {"data.v_dim", [](auto& c, auto& v) { c.data.v_dim = to_u64(v); }},
      {"data.class_separation",
       [](auto& c, auto& v) {
         c.data.class_separation = to_double(v);
         require(c.data.class_separation > 0.0, "must be positive");
       }},
      {"data.u_noise_sigma",
       [](auto& c, auto& v) {
         c.data.u_noise_sigma = to_double(v);
         require(c.data.u_noise_sigma > 0.0, "must be positive");
       }},
      {"data.palette_size",
       [](auto& c, auto& v) {
         c.data.palette_size = to_u64(v);
         require(c.data.palette_size > 0, "must be positive");
       }},
      {"data.prototype_magnitude",
       [](auto& c, auto& v) { c.data.prototype_magnitude = to_double(v); }},
      {"data.correlation",
       [](auto& c, auto& v) { c.data.correlation = to_double(v); }},
      {"data.source_samples",
       [](auto& c, auto& v) { c.data.source_samples = to_u64(v); }},
      {"data.target_samples",
       [](auto& c, auto& v) { c.data.target_samples = to_u64(v); }},
      {"data.target_domains",
       [](auto& c, auto& v) {
         c.data.target_domains = to_u64(v);
         require(c.data.target_domains >= 1, "must be >= 1");
       }},
      {"data.unseen_domains",
       [](auto& c, auto& v) { c.data.unseen_domains = to_u64(v); }},
      {"data.unseen_samples",
       [](auto& c, auto& v) { c.data.unseen_samples = to_u64(v); }},
      {"data.rotation",
       [](auto& c, auto& v) {
         require(v == "random" || v == "identity",
                 "expected random or identity");
         c.data.random_rotation = v == "random";
       }},
      // [sweep]
      {"sweep.correlations",
       [](auto& c, auto& v) {
         c.sweep.correlations.clear();
         for (const auto& s : split_list(v)) c.sweep.correlations.push_back(to_double(s));
       }},
      {"sweep.seeds",
       [](auto& c, auto& v) {
         c.sweep.seeds.clear();
         for (const auto& s : split_list(v)) c.sweep.seeds.push_back(to_u64(s));
       }},
      {"sweep.modes",
       [](auto& c, auto& v) {
         c.sweep.modes.clear();
         for (const auto& s : split_list(v)) c.sweep.modes.push_back(train::parse_mode(s));
       }},
      {"sweep.diagnostics",
       [](auto& c, auto& v) { c.sweep.diagnostics = to_bool(v); }},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "train" && section != "model" && section != "data" &&
          section != "sweep") {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    if (section.empty()) {
      throw ConfigError(where + ": key outside of a section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    auto it = setters().find(full);
    if (it == setters().end()) {
      throw ConfigError(where + ": unknown key '" + key + "' in [" + section +
                        "]");
    }
    try {
      it->second(config, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + ": invalid value for '" + key + "': " +
                        e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  return parse_config(read_file(path), path.string());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& t = c.train;
  os << "[train]\n"
     << "epochs = " << t.epochs << "\n"
     << "warmup_epochs = " << t.warmup_epochs << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "learning_rate = " << format_double(t.learning_rate) << "\n"
     << "momentum = " << format_double(t.momentum) << "\n"
     << "grad_clip = " << format_double(t.grad_clip) << "\n"
     << "t_d = " << format_double(t.t_d) << "\n"
     << "q = " << t.q << "\n"
     << "k_schedule = " << format_double(t.k_schedule) << "\n"
     << "beta_ratio = " << format_double(t.beta_ratio) << "\n"
     << "seed = " << t.seed << "\n"
     << "certainty = " << losses::to_string(t.certainty) << "\n"
     << "inter_class_hinge = " << (t.inter_class_hinge ? "true" : "false") << "\n"
     << "reverse_attention = " << (t.reverse_attention ? "true" : "false") << "\n"
     << "consistency = " << train::to_string(t.consistency) << "\n"
     << "mode = " << train::to_string(t.mode) << "\n";
  const auto& a = t.arch;
  os << "\n[model]\n"
     << "extractor_hidden = " << join_ints(a.extractor_hidden) << "\n"
     << "adaptation_dim = " << a.adaptation_dim << "\n"
     << "discriminator_hidden = " << join_ints(a.discriminator_hidden) << "\n"
     << "attention_hidden = " << a.attention_hidden << "\n"
     << "intervention_layer = " << a.intervention_layer << "\n";
  const auto& d = c.data;
  os << "\n[data]\n"
     << "num_classes = " << d.num_classes << "\n"
     << "u_dim = " << d.u_dim << "\n"
     << "v_dim = " << d.v_dim << "\n"
     << "class_separation = " << format_double(d.class_separation) << "\n"
     << "u_noise_sigma = " << format_double(d.u_noise_sigma) << "\n"
     << "palette_size = " << d.palette_size << "\n"
     << "prototype_magnitude = " << format_double(d.prototype_magnitude) << "\n"
     << "correlation = " << format_double(d.correlation) << "\n"
     << "source_samples = " << d.source_samples << "\n"
     << "target_samples = " << d.target_samples << "\n"
     << "target_domains = " << d.target_domains << "\n"
     << "unseen_domains = " << d.unseen_domains << "\n"
     << "unseen_samples = " << d.unseen_samples << "\n"
     << "rotation = " << (d.random_rotation ? "random" : "identity") << "\n";
  const auto& s = c.sweep;
  std::vector<std::string> modes;
  for (auto m : s.modes) modes.push_back(train::to_string(m));
  std::string mode_list;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    mode_list += (i ? "," : "") + modes[i];
  }
  os << "\n[sweep]\n"
     << "correlations = " << join_doubles(s.correlations) << "\n"
     << "seeds = " << join_ints(s.seeds) << "\n"
     << "modes = " << mode_list << "\n"
     << "diagnostics = " << (s.diagnostics ? "true" : "false") << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
  return hex64(fnv1a(format_config(config)));
}

}  // namespace ida::config
