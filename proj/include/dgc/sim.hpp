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
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgc/codec.hpp"
#include "dgc/engine.hpp"
#include "dgc/gradient.hpp"
#include "dgc/models.hpp"
#include "dgc/perfmodel.hpp"
#include "dgc/rng.hpp"
#include "dgc/sparsify.hpp"

namespace dgc {

enum class Algorithm {
  kDenseBaseline,        // dense exchange, vanilla momentum in the optimizer
  kDenseNesterov,        // dense exchange, Nesterov momentum in the optimizer
  kDgcVanilla,           // velocity accumulation, momentum inside the update
  kDgcNesterov,
  kDgcVanillaUncorrected,  // raw-gradient accumulation, momentum downstream
  kDgcNesterovUncorrected,
  kPlainSparse,          // sparsification + accumulation only, momentum downstream
};

inline bool is_dense(Algorithm a) {
  return a == Algorithm::kDenseBaseline || a == Algorithm::kDenseNesterov;
}

inline DgcVariant engine_variant(Algorithm a) {
  switch (a) {
    case Algorithm::kDgcVanilla:
      return DgcVariant::kVanillaCorrected;
    case Algorithm::kDgcNesterov:
      return DgcVariant::kNesterovCorrected;
    case Algorithm::kDgcVanillaUncorrected:
      return DgcVariant::kVanillaUncorrected;
    case Algorithm::kDgcNesterovUncorrected:
      return DgcVariant::kNesterovUncorrected;
    case Algorithm::kPlainSparse:
      return DgcVariant::kPlainSparse;
    default:
      throw std::invalid_argument("dense algorithm has no engine variant");
  }
}

// Whether the global optimizer keeps its own momentum buffer.
inline bool downstream_momentum(Algorithm a) {
  switch (a) {
    case Algorithm::kDenseBaseline:
    case Algorithm::kDenseNesterov:
    case Algorithm::kDgcVanillaUncorrected:
    case Algorithm::kDgcNesterovUncorrected:
    case Algorithm::kPlainSparse:
      return true;
    case Algorithm::kDgcVanilla:
    case Algorithm::kDgcNesterov:
      return false;
  }
  return false;
}

struct LrSchedule {
  double base = 0.1;
  double decay_factor = 1.0;
  std::vector<std::size_t> decay_epochs;

  double at(std::size_t epoch) const {
    double lr = base;
    for (std::size_t e : decay_epochs) {
      if (epoch >= e) lr *= decay_factor;
    }
    return lr;
  }
};

struct TrainConfig {
  std::size_t node_count = 1;
  std::size_t per_node_batch = 32;
  double momentum = 0.9;
  LrSchedule lr;
  std::size_t epochs = 1;
  std::size_t iterations_per_epoch = 100;
  Algorithm algorithm = Algorithm::kDenseBaseline;
  SparsitySchedule sparsity = SparsitySchedule::constant(0.0);
  SparsityConfig selection;      // target_sparsity supplied per epoch
  double clip_threshold = 0.0;   // global L2 threshold; 0 disables clipping
  bool momentum_factor_masking = true;
  bool sampled_selection = false;
  ModelSpec model;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;    // 0 disables the eval column
  PerfParams perf;               // feeds the wallclock_est column

  void validate() const {
    if (node_count < 1) throw std::invalid_argument("node_count must be >= 1");
    if (per_node_batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw std::invalid_argument("momentum must be in [0, 1)");
    if (!(lr.base > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (epochs < 1 || iterations_per_epoch < 1)
      throw std::invalid_argument("epochs and iterations_per_epoch must be >= 1");
    if (model.dataset_size < node_count * per_node_batch)
      throw std::invalid_argument(
          "dataset smaller than one global batch (need >= nodes * batch)");
    sparsity.validate();
    SparsityConfig probe = selection;
    probe.target_sparsity = sparsity.final_sparsity;
    probe.validate();
  }
};

struct IterationRecord {
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  double loss = 0.0;
  double eval = std::numeric_limits<double>::quiet_NaN();
  double bytes_per_node = 0.0;
  double union_density = 0.0;
  double wallclock_est = 0.0;
};

struct MetricsTrace {
  static constexpr const char* kCsvHeader =
      "iteration,epoch,loss,eval,bytes_per_node,union_density,wallclock_est";

  std::vector<IterationRecord> records;

  std::string to_csv() const {
    std::string out(kCsvHeader);
    out += '\n';
    for (const IterationRecord& r : records) {
      out += std::to_string(r.iteration);
      out += ',' + std::to_string(r.epoch);
      out += ',' + detail::fmt_g(r.loss);
      out += ',' + detail::fmt_g(r.eval);
      out += ',' + detail::fmt_g(r.bytes_per_node);
      out += ',' + detail::fmt_g(r.union_density);
      out += ',' + detail::fmt_g(r.wallclock_est);
      out += '\n';
    }
    return out;
  }
};

// Deterministic batch assignment: one shared shuffled stream per epoch,
// consumed in disjoint consecutive slices by (iteration, node). When
// N*b*iterations_per_epoch equals the dataset size, an epoch covers every
// sample exactly once.
inline std::vector<std::uint32_t> sample_minibatch(
    std::size_t dataset_size, std::size_t node_count, std::size_t batch,
    std::size_t iterations_per_epoch, std::uint64_t seed, std::size_t node,
    std::uint64_t iteration) {
  if (dataset_size == 0) throw std::invalid_argument("empty dataset");
  const std::uint64_t epoch = iteration / iterations_per_epoch;
  RngStream rng = derive_stream(seed, 0, epoch, StreamPurpose::kShuffle);
  std::vector<std::uint32_t> perm(dataset_size);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = dataset_size - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  const std::uint64_t within = iteration % iterations_per_epoch;
  const std::uint64_t start = (within * node_count + node) * batch;
  std::vector<std::uint32_t> out(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out[i] = perm[(start + i) % dataset_size];
  }
  return out;
}

// Fixed-order sum so every node, and every rerun, sees identical bits.
inline GradientVector allreduce_dense(std::span<const GradientVector> grads) {
  if (grads.empty()) throw std::invalid_argument("allreduce: no inputs");
  GradientVector sum(grads[0].layout(),
                     std::vector<float>(grads[0].values().begin(),
                                        grads[0].values().end()));
  for (std::size_t k = 1; k < grads.size(); ++k) {
    if (!same_layout(grads[k], sum)) {
      throw std::invalid_argument("allreduce: layout mismatch");
    }
    std::span<const float> g = grads[k].values();
    std::span<float> s = sum.values();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i];
  }
  return sum;
}

// Traffic accounting for a modeled recursive-doubling aggregation. Densities
// after round r (1-based) come from real support unions; the worst-case bound
// is min(1, d0 * 2^r) with d0 the largest single-node density.
struct AggregationStats {
  std::size_t rounds = 0;
  double initial_density = 0.0;                  // max over nodes
  std::vector<double> union_density;             // after each round
  std::vector<double> worst_case_density;        // min(1, d0 * 2^r)
  std::vector<double> round_message_bytes;       // largest message of the round
  double final_union_density = 0.0;
};

inline std::pair<GradientVector, AggregationStats> allreduce_sparse(
    std::span<const SparseUpdate> updates, LayoutPtr layout) {
  if (updates.empty()) throw std::invalid_argument("allreduce: no inputs");
  const std::uint64_t length = layout->size();
  for (const SparseUpdate& u : updates) {
    if (u.length != length) {
      throw std::invalid_argument("allreduce: sparse update length mismatch");
    }
  }

  GradientVector sum{std::move(layout)};
  for (const SparseUpdate& u : updates) {
    for (std::size_t i = 0; i < u.indices.size(); ++i) {
      sum[u.indices[i]] += u.values[i];
    }
  }

  AggregationStats stats;
  const double m = static_cast<double>(length);
  std::vector<std::vector<std::uint32_t>> sets(updates.size());
  for (std::size_t k = 0; k < updates.size(); ++k) {
    sets[k] = updates[k].indices;
    stats.initial_density = std::max(
        stats.initial_density, static_cast<double>(sets[k].size()) / m);
  }
  stats.rounds = doubling_rounds(updates.size());
  for (std::size_t r = 0; r < stats.rounds; ++r) {
    const std::size_t bit = static_cast<std::size_t>(1) << r;
    double max_density = 0.0;
    double max_bytes = 0.0;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      const std::size_t partner = k ^ bit;
      if (partner >= sets.size() || partner < k) continue;
      max_bytes = std::max(
          max_bytes, static_cast<double>(encoded_size_bytes(sets[k])));
      max_bytes = std::max(
          max_bytes, static_cast<double>(encoded_size_bytes(sets[partner])));
      std::vector<std::uint32_t> merged;
      merged.reserve(sets[k].size() + sets[partner].size());
      std::set_union(sets[k].begin(), sets[k].end(), sets[partner].begin(),
                     sets[partner].end(), std::back_inserter(merged));
      sets[k] = merged;
      sets[partner] = std::move(merged);
    }
    for (const auto& s : sets) {
      max_density =
          std::max(max_density, static_cast<double>(s.size()) / m);
    }
    stats.union_density.push_back(max_density);
    stats.worst_case_density.push_back(std::min(
        1.0, stats.initial_density * std::ldexp(1.0, static_cast<int>(r) + 1)));
    stats.round_message_bytes.push_back(max_bytes);
  }
  stats.final_union_density = stats.union_density.empty()
                                  ? stats.initial_density
                                  : stats.union_density.back();
  return {std::move(sum), std::move(stats)};
}

// The one place weights move: w <- w - lr * direction, elementwise in 64-bit
// with a single rounding back to storage precision.
inline void apply_sgd_update(std::span<float> w, std::span<const float> dir,
                             double lr) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = static_cast<float>(static_cast<double>(w[i]) -
                              lr * static_cast<double>(dir[i]));
  }
}

struct TrainResult {
  MetricsTrace trace;
  bool diverged = false;
  std::string abort_reason;
  GradientVector final_weights{LayerLayout::single("empty", 1)};
  double final_loss = 0.0;       // last recorded minibatch loss
  double final_full_loss = 0.0;  // whole-dataset loss at the final weights
  double final_eval = 0.0;
  double mean_compression_ratio = 0.0;
  double median_send_interval = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t replica_checks = 0;
  double total_megabytes_per_node = 0.0;
};

namespace detail {

inline double median(std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
  return 0.5 * (hi + v[mid - 1]);
}

}  // namespace detail

// Synchronous data-parallel training: every node computes its scaled local
// gradient, compresses (or not), the aggregate is formed once, and every node
// applies the identical global update. Weight copies are compared bit for bit
// after every iteration.
inline TrainResult train(const TrainConfig& config) {
  config.validate();
  const std::size_t n = config.node_count;
  std::unique_ptr<Model> model = make_model(config.model, config.seed);
  const LayoutPtr& layout = model->layout();
  const std::size_t m_total = layout->size();

  GradientVector w0 = model->init_weights(config.seed);
  std::vector<GradientVector> weights(n, w0);

  const bool dense = is_dense(config.algorithm);
  std::vector<DgcNodeState> states;
  if (!dense) {
    DgcConfig dc;
    dc.variant = engine_variant(config.algorithm);
    dc.momentum = config.momentum;
    dc.sparsity = config.selection;
    dc.momentum_factor_masking = config.momentum_factor_masking;
    dc.sampled_selection = config.sampled_selection;
    if (config.clip_threshold > 0.0) {
      dc.clip = ClipConfig{config.clip_threshold, n};
    }
    states.assign(n, DgcNodeState(layout, dc));
  }
  std::vector<GradientVector> momentum_buf;
  if (downstream_momentum(config.algorithm)) {
    momentum_buf.assign(n, GradientVector(layout));
  }

  TrainResult result;
  std::vector<std::int64_t> last_sent(m_total, -1);
  std::vector<double> send_intervals;
  double ratio_sum = 0.0;
  const std::uint64_t total_iters =
      static_cast<std::uint64_t>(config.epochs) * config.iterations_per_epoch;

  std::vector<GradientVector> grads;
  std::vector<SparseUpdate> updates;
  GradientVector scratch_dir(layout);

  for (std::uint64_t t = 0; t < total_iters; ++t) {
    const std::uint64_t epoch = t / config.iterations_per_epoch;
    const double sparsity = warmup_sparsity(epoch, config.sparsity);
    const double lr = config.lr.at(epoch);

    grads.clear();
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<std::uint32_t> batch = sample_minibatch(
          model->dataset_size(), n, config.per_node_batch,
          config.iterations_per_epoch, config.seed, k, t);
      auto [loss, g] = model->loss_grad(weights[k], batch, n);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        result.abort_reason = "non-finite loss at iteration " +
                              std::to_string(t) + " on node " +
                              std::to_string(k);
        break;
      }
      loss_sum += loss;
      grads.push_back(std::move(g));
    }
    if (result.diverged) break;
    const double loss = loss_sum / static_cast<double>(n);

    IterationRecord rec;
    rec.iteration = t;
    rec.epoch = epoch;
    rec.loss = loss;

    PerfParams perf = config.perf;
    perf.model_bytes = static_cast<double>(4 * m_total);

    const GradientVector* aggregate = nullptr;
    GradientVector agg_storage(layout);
    if (dense) {
      agg_storage = allreduce_dense(grads);
      aggregate = &agg_storage;
      rec.bytes_per_node = static_cast<double>(4 * m_total);
      rec.union_density = 1.0;
      rec.wallclock_est =
          perf.t_compute + comm_time(perf, n, CommMode::kDense);
    } else {
      updates.clear();
      double bytes_sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        RngStream rng =
            derive_stream(config.seed, k, t, StreamPurpose::kThresholdSample);
        updates.push_back(states[k].step(grads[k], sparsity, rng));
        bytes_sum += static_cast<double>(encoded_size_bytes(updates[k].indices));
      }
      auto [sum, stats] = allreduce_sparse(updates, layout);
      agg_storage = std::move(sum);
      aggregate = &agg_storage;
      rec.bytes_per_node = bytes_sum / static_cast<double>(n);
      rec.union_density = stats.final_union_density;
      perf.density = std::max(stats.initial_density, 1.0 / 1e9);
      rec.wallclock_est =
          perf.t_compute + comm_time(perf, n, CommMode::kSparse);
      // Staleness bookkeeping: a coordinate counts as updated when any node
      // transmits it, so intervals are measured over the aggregated union.
      for (std::size_t k = 0; k < n; ++k) {
        for (std::uint32_t idx : updates[k].indices) {
          if (last_sent[idx] >= 0 &&
              last_sent[idx] != static_cast<std::int64_t>(t)) {
            send_intervals.push_back(
                static_cast<double>(static_cast<std::int64_t>(t) -
                                    last_sent[idx]));
          }
          last_sent[idx] = static_cast<std::int64_t>(t);
        }
      }
    }
    ratio_sum += static_cast<double>(4 * m_total) / rec.bytes_per_node;
    result.total_megabytes_per_node += rec.bytes_per_node / 1e6;

    // Global update, executed independently per node from the shared
    // aggregate; all copies must stay bit-identical.
    const float mom = static_cast<float>(config.momentum);
    for (std::size_t k = 0; k < n; ++k) {
      std::span<const float> agg = aggregate->values();
      std::span<float> wk = weights[k].values();
      switch (config.algorithm) {
        case Algorithm::kDenseBaseline:
        case Algorithm::kDgcVanillaUncorrected:
        case Algorithm::kDgcNesterovUncorrected:
        case Algorithm::kPlainSparse: {
          std::span<float> u = momentum_buf[k].values();
          for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = mom * u[i] + agg[i];
          apply_sgd_update(wk, u, lr);
          break;
        }
        case Algorithm::kDenseNesterov: {
          std::span<float> u = momentum_buf[k].values();
          std::span<float> dir = scratch_dir.values();
          for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = mom * u[i] + agg[i];
          for (std::size_t i = 0; i < u.size(); ++i)
            dir[i] = mom * u[i] + agg[i];
          apply_sgd_update(wk, dir, lr);
          break;
        }
        case Algorithm::kDgcVanilla:
        case Algorithm::kDgcNesterov:
          apply_sgd_update(wk, agg, lr);
          break;
      }
    }
    for (std::size_t k = 1; k < n; ++k) {
      if (std::memcmp(weights[0].values().data(), weights[k].values().data(),
                      m_total * sizeof(float)) != 0) {
        throw std::logic_error("replica divergence at iteration " +
                               std::to_string(t));
      }
    }
    ++result.replica_checks;

    if (config.eval_every > 0 && t % config.eval_every == 0) {
      rec.eval = model->eval_metric(weights[0].values());
    }
    result.trace.records.push_back(rec);

    if (loss > 1e6) {
      result.diverged = true;
      result.abort_reason = "loss exceeded 1e6 at iteration " +
                            std::to_string(t);
      break;
    }
  }

  result.final_weights = weights[0];
  if (!result.trace.records.empty()) {
    result.final_loss = result.trace.records.back().loss;
    result.mean_compression_ratio =
        ratio_sum / static_cast<double>(result.trace.records.size());
  }
  std::vector<std::uint32_t> all(model->dataset_size());
  std::iota(all.begin(), all.end(), 0u);
  result.final_full_loss = model->loss_only(weights[0].values(), all);
  result.final_eval = model->eval_metric(weights[0].values());
  result.median_send_interval = detail::median(send_intervals);
  return result;
}

}  // namespace dgc
