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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dgc/codec.hpp"
#include "dgc/gradient.hpp"
#include "dgc/rng.hpp"
#include "dgc/sparsify.hpp"

namespace dgc {

// Local clipping threshold is the node's share of the global one: with N
// nodes of identical gradient statistics the aggregate norm grows like
// sqrt(N), so each node clips against global_threshold * N^(-1/2).
struct ClipConfig {
  double global_threshold = 0.0;
  std::size_t node_count = 1;

  void validate() const {
    if (!(global_threshold > 0.0)) {
      throw std::invalid_argument("clip: global_threshold must be > 0");
    }
    if (node_count < 1) {
      throw std::invalid_argument("clip: node_count must be >= 1");
    }
  }

  double local_threshold() const {
    return global_threshold / std::sqrt(static_cast<double>(node_count));
  }
};

inline GradientVector local_clip(const GradientVector& g,
                                 const ClipConfig& clip) {
  clip.validate();
  const double thr = clip.local_threshold();
  GradientVector out(g.layout(),
                     std::vector<float>(g.values().begin(), g.values().end()));
  double norm = l2_norm(out);
  if (norm == 0.0) return out;
  // Rescaling in 32-bit can land a hair above the threshold, and the exact
  // ratio is then too close to 1 to move the values again. Retry passes
  // deflate by one float ulp; the first pass stays exact so inputs that scale
  // cleanly (like [3,4] against 2.5) keep exact values.
  for (int pass = 0; pass < 8 && norm > thr; ++pass) {
    const double scale = (thr / norm) * (pass == 0 ? 1.0 : 1.0 - 1e-7);
    for (float& v : out.values()) {
      v = static_cast<float>(static_cast<double>(v) * scale);
    }
    norm = l2_norm(out);
  }
  return out;
}

// Sparsity ramp: explicit per-epoch values during warm-up, then the final
// sparsity for the rest of training.
struct SparsitySchedule {
  std::vector<double> warmup_values;
  double final_sparsity = 0.0;

  void validate() const {
    double prev = -1.0;
    for (double s : warmup_values) {
      if (!(s >= 0.0 && s < 1.0)) {
        throw std::invalid_argument("warmup sparsity out of [0, 1)");
      }
      if (s <= prev) {
        throw std::invalid_argument("warmup values must be strictly increasing");
      }
      prev = s;
    }
    if (!(final_sparsity >= 0.0 && final_sparsity < 1.0)) {
      throw std::invalid_argument("final_sparsity out of [0, 1)");
    }
    if (!warmup_values.empty() && warmup_values.back() > final_sparsity) {
      throw std::invalid_argument(
          "last warmup value must not exceed final_sparsity");
    }
  }

  static SparsitySchedule constant(double sparsity) {
    return SparsitySchedule{{}, sparsity};
  }

  // The standard ramp: 75%, 93.75%, 98.4375%, 99.6%, then 99.9% onwards.
  static SparsitySchedule default_warmup(double final_sparsity = 0.999) {
    return SparsitySchedule{{0.75, 0.9375, 0.984375, 0.996}, final_sparsity};
  }
};

inline double warmup_sparsity(std::size_t epoch,
                              const SparsitySchedule& schedule) {
  if (epoch < schedule.warmup_values.size()) {
    return schedule.warmup_values[epoch];
  }
  return schedule.final_sparsity;
}

enum class DgcVariant {
  kVanillaCorrected,
  kNesterovCorrected,
  kVanillaUncorrected,
  kNesterovUncorrected,
  kPlainSparse,
};

inline bool is_corrected(DgcVariant v) {
  return v == DgcVariant::kVanillaCorrected ||
         v == DgcVariant::kNesterovCorrected;
}

struct DgcConfig {
  DgcVariant variant = DgcVariant::kVanillaCorrected;
  double momentum = 0.9;
  std::optional<ClipConfig> clip;
  SparsityConfig sparsity;  // target_sparsity is supplied per step
  // Clearing the velocity at transmitted positions stops stale momentum from
  // steering delayed coordinates. Off reproduces the correction-only ablation.
  bool momentum_factor_masking = true;
  bool sampled_selection = false;
};

// Per-node compression state machine. Holds the velocity accumulation U and
// the gradient accumulation V; each step folds in one local gradient, selects
// per-scope thresholds over |V|, emits the surviving entries and retains the
// rest.
class DgcNodeState {
 public:
  DgcNodeState(LayoutPtr layout, DgcConfig config)
      : config_(std::move(config)),
        u_(layout),
        v_(std::move(layout)) {
    if (!(config_.momentum >= 0.0 && config_.momentum < 1.0)) {
      throw std::invalid_argument("momentum must be in [0, 1)");
    }
    if (config_.clip) config_.clip->validate();
  }

  const DgcConfig& config() const { return config_; }
  const GradientVector& velocity() const { return u_; }
  const GradientVector& accumulation() const { return v_; }

  // One iteration with thresholds selected from |V| at the given sparsity.
  SparseUpdate step(const GradientVector& g, double sparsity, RngStream& rng) {
    SparsityConfig cfg = config_.sparsity;
    cfg.target_sparsity = sparsity;
    accumulate(g);
    const std::size_t scopes = scope_count(cfg);
    std::vector<float> thresholds(scopes);
    std::vector<float> magnitudes;
    for (std::size_t scope = 0; scope < scopes; ++scope) {
      std::span<const float> vals =
          cfg.per_layer ? v_.segment_values(scope) : v_.values();
      magnitudes.resize(vals.size());
      for (std::size_t i = 0; i < vals.size(); ++i) {
        magnitudes[i] = std::fabs(vals[i]);
      }
      if (config_.sampled_selection) {
        thresholds[scope] = sampled_threshold(magnitudes, cfg, rng).threshold;
      } else {
        thresholds[scope] = exact_threshold(magnitudes, sparsity);
      }
    }
    return emit(cfg, thresholds);
  }

  // One iteration with caller-forced thresholds (one per scope; +inf
  // suppresses a scope entirely, -inf releases everything). The tie budget is
  // the scope size, so no survivor cap applies.
  SparseUpdate step_with_thresholds(const GradientVector& g,
                                    std::span<const float> thresholds) {
    SparsityConfig cfg = config_.sparsity;
    cfg.target_sparsity = 0.0;  // budget = scope length
    accumulate(g);
    return emit(cfg, thresholds);
  }

 private:
  std::size_t scope_count(const SparsityConfig& cfg) const {
    return cfg.per_layer ? v_.layout()->segment_count() : 1;
  }

  void accumulate(const GradientVector& g_in) {
    if (!same_layout(g_in, v_)) {
      throw std::invalid_argument("step: gradient layout mismatch");
    }
    if (!g_in.all_finite()) {
      throw std::invalid_argument("step: non-finite gradient");
    }
    const GradientVector& g =
        config_.clip ? (clipped_ = local_clip(g_in, *config_.clip)) : g_in;
    std::span<const float> gs = g.values();
    std::span<float> us = u_.values();
    std::span<float> vs = v_.values();
    const float m = static_cast<float>(config_.momentum);
    switch (config_.variant) {
      case DgcVariant::kVanillaCorrected:
        for (std::size_t i = 0; i < us.size(); ++i) us[i] = m * us[i] + gs[i];
        for (std::size_t i = 0; i < vs.size(); ++i) vs[i] = vs[i] + us[i];
        break;
      case DgcVariant::kNesterovCorrected:
        for (std::size_t i = 0; i < us.size(); ++i)
          us[i] = m * (us[i] + gs[i]);
        for (std::size_t i = 0; i < vs.size(); ++i) vs[i] = vs[i] + us[i];
        for (std::size_t i = 0; i < vs.size(); ++i) vs[i] = vs[i] + gs[i];
        break;
      case DgcVariant::kVanillaUncorrected:
      case DgcVariant::kNesterovUncorrected:
      case DgcVariant::kPlainSparse:
        // Raw-gradient accumulation; any momentum lives in the downstream
        // optimizer, and there is no local velocity to maintain.
        for (std::size_t i = 0; i < vs.size(); ++i) vs[i] = vs[i] + gs[i];
        break;
    }
  }

  SparseUpdate emit(const SparsityConfig& cfg,
                    std::span<const float> thresholds) {
    MaskResult masked = apply_mask(v_, cfg, thresholds);
    v_ = std::move(masked.residual);
    if (is_corrected(config_.variant) && config_.momentum_factor_masking) {
      for (std::uint32_t idx : masked.update.indices) u_[idx] = 0.0f;
    }
    return std::move(masked.update);
  }

  DgcConfig config_;
  GradientVector u_;
  GradientVector v_;
  GradientVector clipped_{LayerLayout::single("scratch", 1)};
};

}  // namespace dgc
