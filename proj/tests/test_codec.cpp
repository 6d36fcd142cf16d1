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

#include <cstring>
#include <set>
#include <sstream>
#include <vector>

#include "catch2/catch_amalgamated.hpp"

#include "dgc/codec.hpp"
#include "dgc/rng.hpp"

using namespace dgc;

namespace {

SparseUpdate random_update(RngStream& rng, std::uint64_t max_length) {
  SparseUpdate u;
  u.length = 1 + rng.next_below(max_length);
  std::set<std::uint32_t> idx;
  const std::uint64_t target = rng.next_below(std::min<std::uint64_t>(
                                   u.length, 64)) ;
  while (idx.size() < target) {
    idx.insert(static_cast<std::uint32_t>(rng.next_below(u.length)));
  }
  for (std::uint32_t i : idx) {
    u.indices.push_back(i);
    float v = rng.next_float() * 2.0f - 1.0f;
    if (v == 0.0f) v = 0.25f;
    u.values.push_back(v);
  }
  return u;
}

}  // namespace

TEST_CASE("encode emits run/value tokens in order") {
  SparseUpdate u;
  u.length = 8;
  u.indices = {2, 6};
  u.values = {1.5f, -2.0f};
  EncodedUpdate e = encode(u);
  CHECK(e.byte_size() == 12);
  CHECK(e.nonzero_count == 2);
  CHECK(e.filler_count() == 0);
  // [2][1.5] then [3][-2.0], little-endian
  CHECK(e.bytes[0] == 2);
  CHECK(e.bytes[1] == 0);
  float v0, v1;
  std::memcpy(&v0, e.bytes.data() + 2, 4);
  CHECK(v0 == 1.5f);
  CHECK(e.bytes[6] == 3);
  CHECK(e.bytes[7] == 0);
  std::memcpy(&v1, e.bytes.data() + 8, 4);
  CHECK(v1 == -2.0f);
  CHECK(decode(e) == u);
}

TEST_CASE("empty update encodes to zero bytes") {
  SparseUpdate u;
  u.length = 10;
  EncodedUpdate e = encode(u);
  CHECK(e.byte_size() == 0);
  SparseUpdate back = decode(e);
  CHECK(back == u);
}

TEST_CASE("gaps beyond 65535 are split with filler tokens") {
  SparseUpdate u;
  u.length = 100000;
  u.indices = {70000};
  u.values = {3.25f};
  EncodedUpdate e = encode(u);
  CHECK(e.byte_size() == 12);  // [65535][0.0] then [4464][v]
  CHECK(e.filler_count() == 1);
  CHECK(detail::get_u16_le(e.bytes.data()) == 65535);
  float filler;
  std::memcpy(&filler, e.bytes.data() + 2, 4);
  CHECK(filler == 0.0f);
  CHECK(detail::get_u16_le(e.bytes.data() + 6) == 4464);
  CHECK(decode(e) == u);
}

TEST_CASE("round-trip identity over 10k seeded updates") {
  RngStream rng = derive_stream(2026, 0, 0, StreamPurpose::kGeneric);
  for (int i = 0; i < 10000; ++i) {
    // mix of small dense-ish updates and long-gap updates
    const std::uint64_t max_len = (i % 7 == 0) ? 500000 : 300;
    SparseUpdate u = random_update(rng, max_len);
    EncodedUpdate e = encode(u);
    CHECK(e.byte_size() ==
          6 * (e.nonzero_count + e.filler_count()));
    SparseUpdate back = decode(e);
    REQUIRE(back == u);
  }
}

TEST_CASE("adjacent indices produce zero runs") {
  SparseUpdate u;
  u.length = 4;
  u.indices = {0, 1, 2, 3};
  u.values = {1.0f, 2.0f, 3.0f, 4.0f};
  EncodedUpdate e = encode(u);
  CHECK(e.byte_size() == 24);
  for (int t = 0; t < 4; ++t) {
    CHECK(detail::get_u16_le(e.bytes.data() + 6 * t) == 0);
  }
  CHECK(decode(e) == u);
}

TEST_CASE("gap of exactly 65536 splits into filler plus zero run") {
  SparseUpdate u;
  u.length = 70000;
  u.indices = {65536};
  u.values = {1.0f};
  EncodedUpdate e = encode(u);
  CHECK(e.filler_count() == 1);
  CHECK(detail::get_u16_le(e.bytes.data() + 6) == 0);
  CHECK(decode(e) == u);
}

TEST_CASE("encode validates its input") {
  SparseUpdate bad;
  bad.length = 4;
  bad.indices = {1, 1};
  bad.values = {1.0f, 2.0f};
  CHECK_THROWS_AS(encode(bad), std::invalid_argument);
  bad.indices = {5};
  bad.values = {1.0f};
  CHECK_THROWS_AS(encode(bad), std::invalid_argument);
  bad.indices = {1};
  bad.values = {0.0f};
  CHECK_THROWS_AS(encode(bad), std::invalid_argument);
}

TEST_CASE("malformed streams are rejected, never misread") {
  SparseUpdate u;
  u.length = 100;
  u.indices = {10, 50};
  u.values = {1.0f, 2.0f};
  EncodedUpdate e = encode(u);

  SECTION("truncated token") {
    std::vector<std::uint8_t> bytes(e.bytes.begin(), e.bytes.end() - 3);
    CHECK_THROWS_AS(decode(bytes, e.original_length), malformed_stream);
  }
  SECTION("index overflow past original_length") {
    CHECK_THROWS_AS(decode(e.bytes, 40), malformed_stream);
  }
  SECTION("zero value outside a filler token") {
    std::vector<std::uint8_t> bytes = e.bytes;
    std::memset(bytes.data() + 2, 0, 4);  // first value -> 0.0f with run 10
    CHECK_THROWS_AS(decode(bytes, e.original_length), malformed_stream);
  }
  SECTION("filler as the final token") {
    std::vector<std::uint8_t> bytes = e.bytes;
    // rewrite the last token into [65535][0.0]
    bytes[6] = 0xff;
    bytes[7] = 0xff;
    std::memset(bytes.data() + 8, 0, 4);
    CHECK_THROWS_AS(decode(bytes, 1 << 20), malformed_stream);
  }
}

TEST_CASE("compression ratio accounting") {
  SECTION("single nonzero in four elements") {
    SparseUpdate u;
    u.length = 4;
    u.indices = {2};
    u.values = {1.0f};
    EncodedUpdate e = encode(u);
    CompressionRatio r = compression_ratio(4, e);
    CHECK_FALSE(r.infinite);
    CHECK(r.ratio == Catch::Approx(16.0 / 6.0));
  }
  SECTION("fully dense costs 6 bytes per 4-byte element") {
    SparseUpdate u;
    u.length = 1000;
    for (std::uint32_t i = 0; i < 1000; ++i) {
      u.indices.push_back(i);
      u.values.push_back(1.0f + static_cast<float>(i));
    }
    EncodedUpdate e = encode(u);
    CompressionRatio r = compression_ratio(u.length, e);
    CHECK(r.ratio == Catch::Approx(4.0 / 6.0));
  }
  SECTION("empty encoding reports infinity with a flag") {
    SparseUpdate u;
    u.length = 10;
    EncodedUpdate e = encode(u);
    CompressionRatio r = compression_ratio(10, e);
    CHECK(r.infinite);
    CHECK(std::isinf(r.ratio));
  }
  SECTION("dense_length must be positive") {
    EncodedUpdate e;
    CHECK_THROWS_AS(compression_ratio(0, e), std::invalid_argument);
  }
}

TEST_CASE("file dump round-trips through the length-prefixed format") {
  RngStream rng = derive_stream(5, 0, 0, StreamPurpose::kGeneric);
  SparseUpdate u = random_update(rng, 200000);
  EncodedUpdate e = encode(u);
  std::stringstream ss;
  write_encoded(ss, e);
  // prefix is the original length as u64 little-endian
  const std::string blob = ss.str();
  REQUIRE(blob.size() == 8 + e.byte_size());
  EncodedUpdate back = read_encoded(ss);
  CHECK(back.original_length == e.original_length);
  CHECK(back.bytes == e.bytes);
  CHECK(back.nonzero_count == e.nonzero_count);
  CHECK(decode(back) == u);
}

TEST_CASE("encoded_size_bytes matches the real encoder") {
  RngStream rng = derive_stream(6, 0, 0, StreamPurpose::kGeneric);
  for (int i = 0; i < 200; ++i) {
    SparseUpdate u = random_update(rng, 400000);
    CHECK(encoded_size_bytes(u.indices) == encode(u).byte_size());
  }
}
