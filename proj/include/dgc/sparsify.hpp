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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgc/codec.hpp"
#include "dgc/gradient.hpp"
#include "dgc/rng.hpp"

namespace dgc {

struct SparsityConfig {
  double target_sparsity = 0.0;   // fraction of elements dropped, in [0, 1)
  double sample_fraction = 0.01;  // fraction sampled for threshold estimation
  double overflow_factor = 2.0;   // kept_count never exceeds overflow_factor * k
  bool per_layer = true;          // threshold per layer vs whole model

  void validate() const {
    if (!(target_sparsity >= 0.0 && target_sparsity < 1.0)) {
      throw std::invalid_argument("target_sparsity must be in [0, 1)");
    }
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
      throw std::invalid_argument("sample_fraction must be in (0, 1]");
    }
    if (!(overflow_factor > 1.0)) {
      throw std::invalid_argument("overflow_factor must be > 1");
    }
  }
};

struct SelectionResult {
  std::vector<bool> mask;
  float threshold = 0.0f;
  std::size_t kept_count = 0;
};

// Survivor budget for a selection scope: at least one element always survives.
inline std::size_t keep_count(std::size_t len, double target_sparsity) {
  if (len == 0) throw std::invalid_argument("keep_count: empty scope");
  auto k = static_cast<std::size_t>(
      std::llround((1.0 - target_sparsity) * static_cast<double>(len)));
  return std::clamp<std::size_t>(k, 1, len);
}

// k-th largest magnitude, k = max(1, round((1-s)*len)). Selecting strictly
// above the returned value keeps at most k elements; ties are admitted by
// index order in select(). The dense case (k == len) returns -inf so that
// every element passes the strict comparison.
inline float exact_threshold(std::span<const float> magnitudes,
                             double target_sparsity) {
  if (magnitudes.empty()) {
    throw std::invalid_argument("exact_threshold: empty input");
  }
  const std::size_t k = keep_count(magnitudes.size(), target_sparsity);
  if (k >= magnitudes.size()) {
    return -std::numeric_limits<float>::infinity();
  }
  std::vector<float> scratch(magnitudes.begin(), magnitudes.end());
  std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(),
                   std::greater<float>());
  return scratch[k - 1];
}

struct SampledThreshold {
  float threshold = 0.0f;
  bool refined = false;
};

// Threshold from a uniform sample, aimed at the overflow budget so the
// estimate errs toward keeping too much; when the population count strictly
// above the estimate overshoots overflow_factor * k, an exact threshold is
// recomputed over just the exceeding elements.
inline SampledThreshold sampled_threshold(std::span<const float> magnitudes,
                                          const SparsityConfig& config,
                                          RngStream& rng) {
  config.validate();
  if (magnitudes.empty()) {
    throw std::invalid_argument("sampled_threshold: empty input");
  }
  const std::size_t n = magnitudes.size();
  const std::size_t k = keep_count(n, config.target_sparsity);
  const auto sample_size = static_cast<std::size_t>(
      std::llround(config.sample_fraction * static_cast<double>(n)));

  const auto [mn, mx] = std::minmax_element(magnitudes.begin(), magnitudes.end());
  const bool degenerate = (*mn == *mx);
  if (sample_size < 10 || degenerate) {
    return {exact_threshold(magnitudes, config.target_sparsity), false};
  }

  std::vector<float> sample(sample_size);
  for (float& s : sample) s = magnitudes[rng.next_below(n)];
  const auto ks = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround((1.0 - config.target_sparsity) *
                                            static_cast<double>(sample_size) *
                                            config.overflow_factor)),
      1, sample_size);
  std::nth_element(sample.begin(), sample.begin() + (ks - 1), sample.end(),
                   std::greater<float>());
  // Nudge below the order statistic so the sampled element itself survives
  // the strict comparison.
  const float estimate = std::nextafter(
      sample[ks - 1], -std::numeric_limits<float>::infinity());

  std::size_t exceeding = 0;
  for (float m : magnitudes) {
    if (m > estimate) ++exceeding;
  }
  const double cap = config.overflow_factor * static_cast<double>(k);
  if (static_cast<double>(exceeding) <= cap) {
    return {estimate, false};
  }
  std::vector<float> selected;
  selected.reserve(exceeding);
  for (float m : magnitudes) {
    if (m > estimate) selected.push_back(m);
  }
  std::nth_element(selected.begin(), selected.begin() + (k - 1), selected.end(),
                   std::greater<float>());
  return {selected[k - 1], true};
}

// Mask of elements strictly above the threshold, plus elements equal to it
// admitted in ascending index order until `budget` survivors are reached.
inline SelectionResult select(std::span<const float> magnitudes, float threshold,
                              std::size_t budget) {
  SelectionResult r;
  r.threshold = threshold;
  r.mask.assign(magnitudes.size(), false);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes[i] > threshold) {
      r.mask[i] = true;
      ++kept;
    }
  }
  for (std::size_t i = 0; i < magnitudes.size() && kept < budget; ++i) {
    if (magnitudes[i] == threshold) {
      r.mask[i] = true;
      ++kept;
    }
  }
  r.kept_count = kept;
  return r;
}

struct MaskResult {
  SparseUpdate update;
  GradientVector residual;
};

// Split v into the transmitted update and the locally retained residual.
// Thresholds are given per scope (per layer when config.per_layer, otherwise
// one for the whole vector). No arithmetic is performed: every stored value
// lands in exactly one of the two outputs, so update + residual reconstructs
// v bit for bit. Exact zeros always stay in the residual; transmitting them
// carries no information.
inline MaskResult apply_mask(const GradientVector& v,
                             const SparsityConfig& config,
                             std::span<const float> thresholds) {
  config.validate();
  const std::size_t scope_count =
      config.per_layer ? v.layout()->segment_count() : 1;
  if (thresholds.size() != scope_count) {
    throw std::invalid_argument("apply_mask: expected " +
                                std::to_string(scope_count) + " thresholds, got " +
                                std::to_string(thresholds.size()));
  }
  MaskResult out{SparseUpdate{}, GradientVector(v.layout())};
  out.update.length = v.size();
  std::copy(v.values().begin(), v.values().end(),
            out.residual.values().begin());

  std::vector<float> magnitudes;
  for (std::size_t scope = 0; scope < scope_count; ++scope) {
    const std::size_t offset =
        config.per_layer ? v.layout()->segment(scope).offset : 0;
    std::span<const float> vals = config.per_layer
                                      ? v.segment_values(scope)
                                      : v.values();
    magnitudes.resize(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
      magnitudes[i] = std::fabs(vals[i]);
    const std::size_t budget = keep_count(vals.size(), config.target_sparsity);
    SelectionResult sel = select(magnitudes, thresholds[scope], budget);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (sel.mask[i] && vals[i] != 0.0f) {
        out.update.indices.push_back(static_cast<std::uint32_t>(offset + i));
        out.update.values.push_back(vals[i]);
        out.residual[offset + i] = 0.0f;
      }
    }
  }
  return out;
}

}  // namespace dgc
