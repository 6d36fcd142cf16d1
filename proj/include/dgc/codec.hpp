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

#include <bit>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgc {

// Surviving entries of a sparsified gradient: strictly increasing global
// indices with their 32-bit values. Zeros are represented by omission.
struct SparseUpdate {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  std::uint64_t length = 0;

  std::size_t nonzero_count() const { return indices.size(); }

  void validate() const {
    if (indices.size() != values.size()) {
      throw std::invalid_argument("sparse update: index/value count mismatch");
    }
    std::uint64_t prev = 0;
    bool first = true;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (!first && indices[i] <= prev) {
        throw std::invalid_argument(
            "sparse update: indices not strictly increasing at entry " +
            std::to_string(i));
      }
      if (indices[i] >= length) {
        throw std::invalid_argument("sparse update: index " +
                                    std::to_string(indices[i]) +
                                    " out of range for length " +
                                    std::to_string(length));
      }
      if (values[i] == 0.0f) {
        throw std::invalid_argument(
            "sparse update: explicit zero value at entry " + std::to_string(i));
      }
      prev = indices[i];
      first = false;
    }
  }

  friend bool operator==(const SparseUpdate& a, const SparseUpdate& b) {
    return a.length == b.length && a.indices == b.indices &&
           a.values == b.values;
  }
};

// Wire form: repeated [run_len: u16 LE][value: f32 LE] tokens, where run_len
// counts the zeros preceding the value. Gaps over 65535 are split with
// [65535][0.0f] filler tokens. Trailing zeros are implied by original_length.
struct EncodedUpdate {
  std::vector<std::uint8_t> bytes;
  std::uint64_t original_length = 0;
  std::uint64_t nonzero_count = 0;

  std::size_t byte_size() const { return bytes.size(); }
  std::uint64_t filler_count() const {
    return bytes.size() / kTokenBytes - nonzero_count;
  }

  static constexpr std::size_t kTokenBytes = 6;
};

class malformed_stream : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

constexpr std::uint32_t kMaxRun = 0xffff;

inline void put_u16_le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_f32_le(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<std::uint8_t>(bits & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
}

inline std::uint16_t get_u16_le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline float get_f32_le(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                       (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
}

inline std::uint64_t get_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

// Number of [65535][0.0] filler tokens a sorted index set requires.
inline std::uint64_t filler_token_count(std::span<const std::uint32_t> indices) {
  std::uint64_t fillers = 0;
  std::uint64_t pos = 0;  // next index after the last emitted value
  for (std::uint32_t idx : indices) {
    std::uint64_t gap = idx - pos;
    fillers += gap / (detail::kMaxRun + 1);
    pos = idx + 1;
  }
  return fillers;
}

// Encoded byte size for a sorted index set, without materializing values.
inline std::uint64_t encoded_size_bytes(std::span<const std::uint32_t> indices) {
  return EncodedUpdate::kTokenBytes * (indices.size() + filler_token_count(indices));
}

inline EncodedUpdate encode(const SparseUpdate& u) {
  u.validate();
  EncodedUpdate out;
  out.original_length = u.length;
  out.nonzero_count = u.nonzero_count();
  out.bytes.reserve(EncodedUpdate::kTokenBytes *
                    (u.indices.size() + filler_token_count(u.indices)));
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < u.indices.size(); ++i) {
    std::uint64_t gap = u.indices[i] - pos;
    while (gap > detail::kMaxRun) {
      detail::put_u16_le(out.bytes, detail::kMaxRun);
      detail::put_f32_le(out.bytes, 0.0f);
      gap -= detail::kMaxRun + 1;  // filler consumes its run plus one slot
    }
    detail::put_u16_le(out.bytes, static_cast<std::uint16_t>(gap));
    detail::put_f32_le(out.bytes, u.values[i]);
    pos = u.indices[i] + 1;
  }
  return out;
}

inline SparseUpdate decode(std::span<const std::uint8_t> bytes,
                           std::uint64_t original_length) {
  if (bytes.size() % EncodedUpdate::kTokenBytes != 0) {
    throw malformed_stream("truncated stream: " + std::to_string(bytes.size()) +
                           " bytes is not a whole number of tokens");
  }
  SparseUpdate u;
  u.length = original_length;
  std::uint64_t pos = 0;
  const std::size_t tokens = bytes.size() / EncodedUpdate::kTokenBytes;
  for (std::size_t t = 0; t < tokens; ++t) {
    const std::uint8_t* p = bytes.data() + t * EncodedUpdate::kTokenBytes;
    std::uint32_t run = detail::get_u16_le(p);
    float value = detail::get_f32_le(p + 2);
    pos += run;
    if (pos >= original_length) {
      throw malformed_stream("token " + std::to_string(t) +
                             " places a value at index " + std::to_string(pos) +
                             ", past length " + std::to_string(original_length));
    }
    if (value == 0.0f) {
      // Only the gap-splitting filler may carry a zero, and never last.
      if (run != detail::kMaxRun || t + 1 == tokens) {
        throw malformed_stream("zero value in non-filler token " +
                               std::to_string(t));
      }
    } else {
      u.indices.push_back(static_cast<std::uint32_t>(pos));
      u.values.push_back(value);
    }
    pos += 1;
  }
  return u;
}

inline SparseUpdate decode(const EncodedUpdate& e) {
  return decode(std::span<const std::uint8_t>(e.bytes), e.original_length);
}

struct CompressionRatio {
  double ratio = 0.0;    // dense bytes over encoded bytes; larger is better
  bool infinite = false;  // set when the encoding is empty
};

inline CompressionRatio compression_ratio(std::uint64_t dense_length,
                                          const EncodedUpdate& e) {
  if (dense_length == 0) {
    throw std::invalid_argument("compression_ratio: dense_length must be > 0");
  }
  if (e.bytes.empty()) {
    return {std::numeric_limits<double>::infinity(), true};
  }
  return {static_cast<double>(4 * dense_length) /
              static_cast<double>(e.bytes.size()),
          false};
}

// File dump: [original_length: u64 LE] followed by the token stream.
inline void write_encoded(std::ostream& os, const EncodedUpdate& e) {
  std::vector<std::uint8_t> header;
  detail::put_u64_le(header, e.original_length);
  os.write(reinterpret_cast<const char*>(header.data()),
           static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(e.bytes.data()),
           static_cast<std::streamsize>(e.bytes.size()));
}

inline EncodedUpdate read_encoded(std::istream& is) {
  std::uint8_t header[8];
  is.read(reinterpret_cast<char*>(header), 8);
  if (is.gcount() != 8) {
    throw malformed_stream("dump shorter than its length prefix");
  }
  EncodedUpdate e;
  e.original_length = detail::get_u64_le(header);
  e.bytes.assign(std::istreambuf_iterator<char>(is),
                 std::istreambuf_iterator<char>());
  // Count nonzeros by decoding; also validates the stream.
  e.nonzero_count = decode(e).nonzero_count();
  return e;
}

}  // namespace dgc
