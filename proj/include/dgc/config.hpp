// Copyright 2026 The dgcsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgc/perfmodel.hpp"
#include "dgc/sim.hpp"

namespace dgc {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` text. Blank lines and lines starting with '#' are
// ignored; keys may not repeat. Errors carry the offending line number.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": expected 'key = value', got '" + stripped + "'");
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": empty key");
      }
      if (cfg.entries_.count(key)) {
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": duplicate key '" + key + "'");
      }
      cfg.entries_[key] = {value, lineno};
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return it->second.value;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    try {
      std::size_t used = 0;
      double v = std::stod(it->second.value, &used);
      if (used != it->second.value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw config_error(where(it) + ": '" + key + "' expects a number, got '" +
                         it->second.value + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    try {
      std::size_t used = 0;
      unsigned long long v = std::stoull(it->second.value, &used);
      if (used != it->second.value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw config_error(where(it) + ": '" + key +
                         "' expects a non-negative integer, got '" +
                         it->second.value + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    const std::string& v = it->second.value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error(where(it) + ": '" + key + "' expects true/false, got '" +
                       v + "'");
  }

  std::vector<double> get_double_list(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return {};
    consumed_.insert(key);
    std::vector<double> out;
    std::istringstream ss(it->second.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(trim(item)));
      } catch (const std::exception&) {
        throw config_error(where(it) + ": '" + key +
                           "' expects comma-separated numbers");
      }
    }
    return out;
  }

  // Must be called after all gets: any untouched key is an error.
  void reject_unknown() const {
    for (const auto& [key, entry] : entries_) {
      if (!consumed_.count(key)) {
        throw config_error(origin_ + ":" + std::to_string(entry.line) +
                           ": unknown key '" + key + "'");
      }
    }
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
  }

  std::string where(std::map<std::string, Entry>::const_iterator it) const {
    return origin_ + ":" + std::to_string(it->second.line);
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> consumed_;
};

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "dense") return Algorithm::kDenseBaseline;
  if (name == "dense_nesterov") return Algorithm::kDenseNesterov;
  if (name == "dgc_vanilla") return Algorithm::kDgcVanilla;
  if (name == "dgc_nesterov") return Algorithm::kDgcNesterov;
  if (name == "dgc_vanilla_uncorrected")
    return Algorithm::kDgcVanillaUncorrected;
  if (name == "dgc_nesterov_uncorrected")
    return Algorithm::kDgcNesterovUncorrected;
  if (name == "plain_sparse") return Algorithm::kPlainSparse;
  throw config_error("unknown algorithm '" + name + "'");
}

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kDenseBaseline: return "dense";
    case Algorithm::kDenseNesterov: return "dense_nesterov";
    case Algorithm::kDgcVanilla: return "dgc_vanilla";
    case Algorithm::kDgcNesterov: return "dgc_nesterov";
    case Algorithm::kDgcVanillaUncorrected: return "dgc_vanilla_uncorrected";
    case Algorithm::kDgcNesterovUncorrected: return "dgc_nesterov_uncorrected";
    case Algorithm::kPlainSparse: return "plain_sparse";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(const std::string& name) {
  if (name == "quadratic") return ModelKind::kQuadraticBowl;
  if (name == "logistic") return ModelKind::kLogisticRegression;
  if (name == "mlp") return ModelKind::kTinyMlp;
  throw config_error("unknown model '" + name + "'");
}

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kQuadraticBowl: return "quadratic";
    case ModelKind::kLogisticRegression: return "logistic";
    case ModelKind::kTinyMlp: return "mlp";
  }
  return "unknown";
}

inline TrainConfig train_config_from(ConfigFile& cfg) {
  TrainConfig tc;
  tc.model.kind = parse_model_kind(cfg.get_string("model", "logistic"));
  tc.model.dimension = cfg.get_u64("dimension", tc.model.dimension);
  tc.model.dataset_size = cfg.get_u64("dataset_size", tc.model.dataset_size);
  tc.model.noise_scale = cfg.get_double("noise", tc.model.noise_scale);
  tc.model.conflict_fraction =
      cfg.get_double("conflict_fraction", tc.model.conflict_fraction);
  tc.node_count = cfg.get_u64("nodes", tc.node_count);
  tc.per_node_batch = cfg.get_u64("batch", tc.per_node_batch);
  tc.momentum = cfg.get_double("momentum", tc.momentum);
  tc.lr.base = cfg.get_double("lr", tc.lr.base);
  tc.lr.decay_factor = cfg.get_double("lr_decay_factor", tc.lr.decay_factor);
  for (double e : cfg.get_double_list("lr_decay_epochs")) {
    tc.lr.decay_epochs.push_back(static_cast<std::size_t>(e));
  }
  tc.epochs = cfg.get_u64("epochs", tc.epochs);
  tc.iterations_per_epoch =
      cfg.get_u64("iterations_per_epoch", tc.iterations_per_epoch);
  tc.algorithm = parse_algorithm(cfg.get_string("algorithm", "dense"));
  tc.sparsity.final_sparsity = cfg.get_double("sparsity", 0.0);
  tc.sparsity.warmup_values = cfg.get_double_list("warmup");
  tc.selection.per_layer = cfg.get_bool("per_layer", tc.selection.per_layer);
  tc.selection.sample_fraction =
      cfg.get_double("sample_fraction", tc.selection.sample_fraction);
  tc.selection.overflow_factor =
      cfg.get_double("overflow_factor", tc.selection.overflow_factor);
  tc.sampled_selection =
      cfg.get_bool("sampled_selection", tc.sampled_selection);
  tc.momentum_factor_masking =
      cfg.get_bool("momentum_factor_masking", tc.momentum_factor_masking);
  tc.clip_threshold = cfg.get_double("clip_threshold", tc.clip_threshold);
  tc.seed = cfg.get_u64("seed", tc.seed);
  tc.eval_every = cfg.get_u64("eval_every", tc.eval_every);
  tc.perf.t_compute = cfg.get_double("t_compute", tc.perf.t_compute);
  tc.perf.bandwidth_bps = cfg.get_double("bandwidth", tc.perf.bandwidth_bps);
  tc.perf.latency_per_round =
      cfg.get_double("latency", tc.perf.latency_per_round);
  cfg.reject_unknown();
  tc.validate();
  return tc;
}

// Round-trippable snapshot of an effective training configuration.
inline std::string train_config_to_text(const TrainConfig& tc) {
  std::ostringstream out;
  out << "model = " << model_kind_name(tc.model.kind) << '\n'
      << "dimension = " << tc.model.dimension << '\n'
      << "dataset_size = " << tc.model.dataset_size << '\n'
      << "noise = " << detail::fmt_g(tc.model.noise_scale) << '\n'
      << "conflict_fraction = " << detail::fmt_g(tc.model.conflict_fraction)
      << '\n'
      << "nodes = " << tc.node_count << '\n'
      << "batch = " << tc.per_node_batch << '\n'
      << "momentum = " << detail::fmt_g(tc.momentum) << '\n'
      << "lr = " << detail::fmt_g(tc.lr.base) << '\n'
      << "lr_decay_factor = " << detail::fmt_g(tc.lr.decay_factor) << '\n';
  if (!tc.lr.decay_epochs.empty()) {
    out << "lr_decay_epochs = ";
    for (std::size_t i = 0; i < tc.lr.decay_epochs.size(); ++i) {
      out << (i ? "," : "") << tc.lr.decay_epochs[i];
    }
    out << '\n';
  }
  out << "epochs = " << tc.epochs << '\n'
      << "iterations_per_epoch = " << tc.iterations_per_epoch << '\n'
      << "algorithm = " << algorithm_name(tc.algorithm) << '\n'
      << "sparsity = " << detail::fmt_g(tc.sparsity.final_sparsity) << '\n';
  if (!tc.sparsity.warmup_values.empty()) {
    out << "warmup = ";
    for (std::size_t i = 0; i < tc.sparsity.warmup_values.size(); ++i) {
      out << (i ? "," : "") << detail::fmt_g(tc.sparsity.warmup_values[i]);
    }
    out << '\n';
  }
  out << "per_layer = " << (tc.selection.per_layer ? "true" : "false") << '\n'
      << "sample_fraction = " << detail::fmt_g(tc.selection.sample_fraction)
      << '\n'
      << "overflow_factor = " << detail::fmt_g(tc.selection.overflow_factor)
      << '\n'
      << "sampled_selection = " << (tc.sampled_selection ? "true" : "false")
      << '\n'
      << "momentum_factor_masking = "
      << (tc.momentum_factor_masking ? "true" : "false") << '\n'
      << "clip_threshold = " << detail::fmt_g(tc.clip_threshold) << '\n'
      << "seed = " << tc.seed << '\n'
      << "eval_every = " << tc.eval_every << '\n'
      << "t_compute = " << detail::fmt_g(tc.perf.t_compute) << '\n'
      << "bandwidth = " << detail::fmt_g(tc.perf.bandwidth_bps) << '\n'
      << "latency = " << detail::fmt_g(tc.perf.latency_per_round) << '\n';
  return out.str();
}

inline PerfParams perf_params_from(ConfigFile& cfg, std::size_t* max_nodes) {
  PerfParams p;
  p.t_compute = cfg.get_double("t_compute", p.t_compute);
  p.model_bytes = cfg.get_double("model_bytes", 232.56e6);
  p.density = cfg.get_double("density", 0.001);
  p.bandwidth_bps = cfg.get_double("bandwidth", p.bandwidth_bps);
  p.latency_per_round = cfg.get_double("latency", p.latency_per_round);
  p.codec_overhead = cfg.get_double("codec_overhead", p.codec_overhead);
  if (max_nodes) {
    *max_nodes = cfg.get_u64("max_nodes", 128);
  }
  cfg.reject_unknown();
  p.validate();
  return p;
}

}  // namespace dgc
