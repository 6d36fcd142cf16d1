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
//
// Experiment runner: train/bench-codec/perf/sweep over the dgc library.
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dgc/dgc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << contents;
}

json summary_json(const dgc::TrainResult& r) {
  json j;
  j["final_loss"] = r.final_loss;
  j["final_full_loss"] = r.final_full_loss;
  j["final_eval"] = r.final_eval;
  j["mean_compression_ratio"] = r.mean_compression_ratio;
  j["total_megabytes_per_node"] = r.total_megabytes_per_node;
  j["iterations"] = r.trace.records.size();
  j["replica_checks"] = r.replica_checks;
  j["diverged"] = r.diverged;
  if (r.diverged) j["abort_reason"] = r.abort_reason;
  if (std::isfinite(r.median_send_interval)) {
    j["median_send_interval"] = r.median_send_interval;
  }
  return j;
}

dgc::Algorithm baseline_for(dgc::Algorithm a) {
  switch (a) {
    case dgc::Algorithm::kDgcNesterov:
    case dgc::Algorithm::kDgcNesterovUncorrected:
      return dgc::Algorithm::kDenseNesterov;
    default:
      return dgc::Algorithm::kDenseBaseline;
  }
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              bool with_baseline, std::int64_t seed_override) {
  dgc::ConfigFile file = dgc::ConfigFile::load(config_path);
  dgc::TrainConfig config = dgc::train_config_from(file);
  if (seed_override >= 0) {
    config.seed = static_cast<std::uint64_t>(seed_override);
  }

  fs::create_directories(out_dir);
  dgc::TrainResult result = dgc::train(config);
  const fs::path trace_path = fs::path(out_dir) / "trace.csv";
  write_file(trace_path, result.trace.to_csv());

  json manifest;
  manifest["config"] = dgc::train_config_to_text(config);
  manifest["seed"] = config.seed;
  manifest["artifacts"] = {trace_path.string()};
  manifest["summary"] = summary_json(result);

  if (with_baseline) {
    dgc::TrainConfig base = config;
    base.algorithm = baseline_for(config.algorithm);
    dgc::TrainResult base_result = dgc::train(base);
    const fs::path base_path = fs::path(out_dir) / "baseline_trace.csv";
    write_file(base_path, base_result.trace.to_csv());
    manifest["artifacts"].push_back(base_path.string());
    manifest["baseline_summary"] = summary_json(base_result);
    manifest["baseline_algorithm"] = dgc::algorithm_name(base.algorithm);
    if (base_result.final_full_loss > 0.0) {
      manifest["relative_loss_gap"] =
          (result.final_full_loss - base_result.final_full_loss) /
          base_result.final_full_loss;
    }
  }
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "trace: " << trace_path.string()
            << "\nfinal loss: " << result.final_full_loss
            << "\nmean compression ratio: " << result.mean_compression_ratio
            << std::endl;
  if (result.diverged) {
    std::cerr << "run diverged: " << result.abort_reason << std::endl;
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_bench_codec(std::uint64_t size, double sparsity, std::uint64_t seed) {
  if (size < 1) throw dgc::config_error("size must be >= 1");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw dgc::config_error("sparsity must be in [0, 1)");
  }
  const auto nonzeros = static_cast<std::uint64_t>(
      std::max<double>(1.0, std::llround((1.0 - sparsity) *
                                         static_cast<double>(size))));
  dgc::RngStream rng = dgc::derive_stream(seed, 0, 0,
                                          dgc::StreamPurpose::kDataGen);
  // Floyd's sampling: k distinct positions in [0, size).
  std::vector<std::uint32_t> indices;
  indices.reserve(nonzeros);
  {
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = size - nonzeros; j < size; ++j) {
      std::uint64_t t = rng.next_below(j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    indices.assign(chosen.begin(), chosen.end());
  }
  dgc::SparseUpdate update;
  update.length = size;
  update.indices = std::move(indices);
  update.values.resize(update.indices.size());
  for (float& v : update.values) {
    v = rng.next_float() * 2.0f - 1.0f;
    if (v == 0.0f) v = 0.5f;
  }

  dgc::EncodedUpdate encoded = dgc::encode(update);
  dgc::SparseUpdate back = dgc::decode(encoded);
  if (!(back == update)) {
    std::cerr << "round-trip mismatch" << std::endl;
    return kExitRuntime;
  }
  dgc::CompressionRatio ratio = dgc::compression_ratio(size, encoded);
  std::cout << "dense bytes: " << 4 * size
            << "\nencoded bytes: " << encoded.byte_size()
            << "\nnonzeros: " << encoded.nonzero_count
            << "\nfiller tokens: " << encoded.filler_count()
            << "\ncompression ratio: " << ratio.ratio
            << "\nround-trip: ok" << std::endl;
  return kExitOk;
}

int cmd_perf(const std::string& params_path, const std::string& out_dir) {
  dgc::ConfigFile file = dgc::ConfigFile::load(params_path);
  std::size_t max_nodes = 128;
  dgc::PerfParams params = dgc::perf_params_from(file, &max_nodes);

  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / "speedup.csv";
  write_file(csv_path, dgc::speedup_csv(params, max_nodes));

  json manifest;
  manifest["t_compute"] = params.t_compute;
  manifest["model_bytes"] = params.model_bytes;
  manifest["density"] = params.density;
  manifest["bandwidth_bps"] = params.bandwidth_bps;
  manifest["latency_per_round"] = params.latency_per_round;
  manifest["codec_overhead"] = params.codec_overhead;
  manifest["max_nodes"] = max_nodes;
  manifest["t_compute_is_declared_default"] = true;
  manifest["crossover_density_at_max_nodes"] =
      dgc::crossover_density(params, max_nodes);
  manifest["artifacts"] = {csv_path.string()};
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "speedup table: " << csv_path.string()
            << "\ncrossover density at N=" << max_nodes << ": "
            << dgc::crossover_density(params, max_nodes) << std::endl;
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::vector<double>& sparsities,
              const std::vector<std::string>& variants,
              std::int64_t seed_override) {
  dgc::ConfigFile file = dgc::ConfigFile::load(config_path);
  dgc::TrainConfig base = dgc::train_config_from(file);
  if (seed_override >= 0) base.seed = static_cast<std::uint64_t>(seed_override);

  fs::create_directories(out_dir);
  std::string summary =
      "algorithm,sparsity,final_loss,final_full_loss,eval,mean_ratio,total_mb,"
      "diverged\n";
  json manifest;
  manifest["config"] = dgc::train_config_to_text(base);
  manifest["seed"] = base.seed;
  manifest["artifacts"] = json::array();

  for (const std::string& name : variants) {
    const dgc::Algorithm algo = dgc::parse_algorithm(name);
    for (double s : sparsities) {
      dgc::TrainConfig cfg = base;
      cfg.algorithm = algo;
      cfg.sparsity = dgc::SparsitySchedule::constant(dgc::is_dense(algo) ? 0.0
                                                                         : s);
      dgc::TrainResult r = dgc::train(cfg);
      std::string tag = name + "_s" + dgc::detail::fmt_g(s);
      const fs::path trace_path = fs::path(out_dir) / ("trace_" + tag + ".csv");
      write_file(trace_path, r.trace.to_csv());
      manifest["artifacts"].push_back(trace_path.string());
      summary += name;
      summary += ',' + dgc::detail::fmt_g(s);
      summary += ',' + dgc::detail::fmt_g(r.final_loss);
      summary += ',' + dgc::detail::fmt_g(r.final_full_loss);
      summary += ',' + dgc::detail::fmt_g(r.final_eval);
      summary += ',' + dgc::detail::fmt_g(r.mean_compression_ratio);
      summary += ',' + dgc::detail::fmt_g(r.total_megabytes_per_node);
      summary += ',' + std::string(r.diverged ? "true" : "false");
      summary += '\n';
      if (dgc::is_dense(algo)) break;  // dense arm does not vary with sparsity
    }
  }
  const fs::path summary_path = fs::path(out_dir) / "summary.csv";
  write_file(summary_path, summary);
  manifest["artifacts"].push_back(summary_path.string());
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "sweep summary: " << summary_path.string() << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep gradient compression trainer, codec bench and speedup model"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  bool with_baseline = false;
  std::int64_t seed_override = -1;

  CLI::App* train = app.add_subcommand("train", "run a training simulation");
  train->add_option("config", config_path, "flat key = value config file")
      ->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_flag("--baseline", with_baseline,
                  "also run the dense arm with the same seed and schedule");
  train->add_option("--seed", seed_override, "override the config seed");

  std::uint64_t bench_size = 25'000'000;
  double bench_sparsity = 0.999;
  std::uint64_t bench_seed = 1;
  CLI::App* bench =
      app.add_subcommand("bench-codec", "encode/decode a seeded random update");
  bench->add_option("--size", bench_size, "dense element count");
  bench->add_option("--sparsity", bench_sparsity, "fraction of zeros");
  bench->add_option("--seed", bench_seed, "rng seed");

  std::string params_path;
  CLI::App* perf = app.add_subcommand("perf", "evaluate the speedup model");
  perf->add_option("params", params_path, "flat key = value params file")
      ->required();
  perf->add_option("--out", out_dir, "output directory");

  std::vector<double> sweep_sparsities{0.9, 0.99, 0.999};
  std::vector<std::string> sweep_variants{"dgc_vanilla", "plain_sparse",
                                          "dense"};
  CLI::App* sweep =
      app.add_subcommand("sweep", "cartesian product of variants x sparsities");
  sweep->add_option("config", config_path, "flat key = value config file")
      ->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--sparsities", sweep_sparsities, "sparsity list")
      ->delimiter(',');
  sweep->add_option("--variants", sweep_variants, "algorithm list")
      ->delimiter(',');
  sweep->add_option("--seed", seed_override, "override the config seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(config_path, out_dir, with_baseline, seed_override);
    }
    if (bench->parsed()) {
      return cmd_bench_codec(bench_size, bench_sparsity, bench_seed);
    }
    if (perf->parsed()) {
      return cmd_perf(params_path, out_dir);
    }
    if (sweep->parsed()) {
      return cmd_sweep(config_path, out_dir, sweep_sparsities, sweep_variants,
                       seed_override);
    }
  } catch (const dgc::config_error& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitOk;
}
