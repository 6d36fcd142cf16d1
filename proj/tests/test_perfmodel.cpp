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

#include <cmath>
#include <sstream>

#include "catch2/catch_amalgamated.hpp"

#include "dgc/perfmodel.hpp"

using namespace dgc;

namespace {

PerfParams resnet50_like() {
  PerfParams p;
  p.t_compute = 0.3;
  p.model_bytes = 97.49e6;
  p.density = 0.001;
  p.bandwidth_bps = 1e9;
  p.latency_per_round = 0.0;
  return p;
}

}  // namespace

TEST_CASE("a single node never communicates") {
  PerfParams p = alexnet_like();
  CHECK(comm_time(p, 1, CommMode::kDense) == 0.0);
  CHECK(comm_time(p, 1, CommMode::kSparse) == 0.0);
  CHECK(speedup(p, 1, CommMode::kDense) == 1.0);
  CHECK(speedup(p, 1, CommMode::kSparse) == 1.0);
}

TEST_CASE("dense ring time matches the closed form at N=2") {
  PerfParams p = resnet50_like();
  // 2 * (N-1)/N * bytes * 8 / bandwidth = 97.49e6 * 8 / 1e9 ~ 0.78 s
  const double t = comm_time(p, 2, CommMode::kDense);
  CHECK(t == Catch::Approx(0.77992).epsilon(1e-6));
  CHECK(t == Catch::Approx(0.78).epsilon(0.001));
}

TEST_CASE("doubling rounds follow ceil(log2 N)") {
  CHECK(doubling_rounds(1) == 0);
  CHECK(doubling_rounds(2) == 1);
  CHECK(doubling_rounds(4) == 2);
  CHECK(doubling_rounds(5) == 3);
  CHECK(doubling_rounds(64) == 6);
  CHECK(doubling_rounds(128) == 7);
}

TEST_CASE("sparse rounds double the density and match a hand-built sum") {
  PerfParams p = resnet50_like();
  p.density = 0.001;
  const std::size_t n = 64;
  double bytes = 0.0;
  for (std::size_t r = 1; r <= 6; ++r) {
    const double d = std::min(1.0, p.density * std::pow(2.0, double(r)));
    bytes += p.model_bytes * d * p.codec_overhead;
  }
  CHECK(sparse_comm_bytes(p, n) == Catch::Approx(bytes).epsilon(1e-12));
  // densities 0.002, 0.004, ..., 0.064 sum to 0.126
  CHECK(sparse_comm_bytes(p, n) ==
        Catch::Approx(p.model_bytes * 0.126 * 1.5).epsilon(1e-12));
  CHECK(comm_time(p, n, CommMode::kSparse) ==
        Catch::Approx(bytes * 8.0 / p.bandwidth_bps).epsilon(1e-12));
}

TEST_CASE("round densities saturate at one") {
  PerfParams p = resnet50_like();
  p.density = 0.3;
  // rounds at N=8: 0.6, 1.0 (capped from 1.2), 1.0 (capped from 2.4)
  const double expected = p.model_bytes * p.codec_overhead * (0.6 + 1.0 + 1.0);
  CHECK(sparse_comm_bytes(p, 8) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("speedup approaches N as communication vanishes") {
  PerfParams p = resnet50_like();
  p.bandwidth_bps = 1e18;
  p.latency_per_round = 0.0;
  CHECK(speedup(p, 4, CommMode::kDense) == Catch::Approx(4.0).epsilon(1e-8));
  CHECK(speedup(p, 16, CommMode::kSparse) == Catch::Approx(16.0).epsilon(1e-8));
}

TEST_CASE("compressed communication never scales worse than dense here") {
  PerfParams p = alexnet_like();
  for (std::size_t n = 2; n <= 128; n *= 2) {
    CHECK(speedup(p, n, CommMode::kSparse) >=
          speedup(p, n, CommMode::kDense));
  }
}

TEST_CASE("speedup monotonicities at fixed node count") {
  const std::size_t n = 16;
  PerfParams base = resnet50_like();

  double prev = std::numeric_limits<double>::infinity();
  for (double bytes : {10e6, 50e6, 250e6, 1250e6}) {
    PerfParams p = base;
    p.model_bytes = bytes;
    const double s = speedup(p, n, CommMode::kDense);
    CHECK(s <= prev);
    prev = s;
  }

  prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    PerfParams p = base;
    p.density = d;
    const double s = speedup(p, n, CommMode::kSparse);
    CHECK(s <= prev);
    prev = s;
  }

  prev = 0.0;
  for (double bw : {1e8, 1e9, 1e10, 1e11}) {
    PerfParams p = base;
    p.bandwidth_bps = bw;
    const double s = speedup(p, n, CommMode::kDense);
    CHECK(s >= prev);
    prev = s;
  }

  prev = 0.0;
  for (double t : {0.01, 0.1, 1.0, 10.0}) {
    PerfParams p = base;
    p.t_compute = t;
    const double s = speedup(p, n, CommMode::kDense);
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("crossover density separates the byte regimes") {
  PerfParams p = resnet50_like();
  for (std::size_t n : {2ul, 8ul, 64ul}) {
    const double d_star = crossover_density(p, n);
    CHECK(d_star > 0.0);
    CHECK(d_star <= 1.0);
    PerfParams below = p;
    below.density = d_star * 0.5;
    CHECK(sparse_comm_bytes(below, n) <= dense_comm_bytes(p, n));
    if (d_star < 1.0) {
      PerfParams above = p;
      above.density = std::min(1.0, d_star * 1.5);
      CHECK(sparse_comm_bytes(above, n) >= dense_comm_bytes(p, n));
    }
  }
}

TEST_CASE("csv table carries the exact header and a unit first row") {
  PerfParams p = alexnet_like();
  const std::string csv = speedup_csv(p, 8);
  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "nodes,dense_speedup,dgc_speedup,dense_comm_s,dgc_comm_s");
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("1,1,1,", 0) == 0);
  std::size_t rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);  // N = 1, 2, 4, 8
}

TEST_CASE("parameter validation") {
  PerfParams p = alexnet_like();
  p.density = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = alexnet_like();
  p.model_bytes = -1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = alexnet_like();
  p.codec_overhead = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
