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
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dgc {

struct LayerSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t extent = 0;
};

// Partition of a flat parameter vector into named, contiguous layers.
// Segments must cover [0, M) with no gaps or overlaps.
class LayerLayout {
 public:
  explicit LayerLayout(std::vector<LayerSegment> segments)
      : segments_(std::move(segments)) {
    std::size_t expected_offset = 0;
    for (const LayerSegment& s : segments_) {
      if (s.extent == 0) {
        throw std::invalid_argument("layer '" + s.name + "' has zero extent");
      }
      if (s.offset != expected_offset) {
        throw std::invalid_argument("layer '" + s.name +
                                    "' breaks contiguity: offset " +
                                    std::to_string(s.offset) + " != " +
                                    std::to_string(expected_offset));
      }
      expected_offset += s.extent;
    }
    total_ = expected_offset;
  }

  static std::shared_ptr<const LayerLayout> single(std::string name,
                                                   std::size_t extent) {
    return std::make_shared<const LayerLayout>(
        std::vector<LayerSegment>{{std::move(name), 0, extent}});
  }

  std::size_t size() const { return total_; }
  std::size_t segment_count() const { return segments_.size(); }
  const LayerSegment& segment(std::size_t i) const { return segments_.at(i); }
  const std::vector<LayerSegment>& segments() const { return segments_; }

  friend bool operator==(const LayerLayout& a, const LayerLayout& b) {
    if (a.total_ != b.total_ || a.segments_.size() != b.segments_.size())
      return false;
    for (std::size_t i = 0; i < a.segments_.size(); ++i) {
      if (a.segments_[i].offset != b.segments_[i].offset ||
          a.segments_[i].extent != b.segments_[i].extent)
        return false;
    }
    return true;
  }

 private:
  std::vector<LayerSegment> segments_;
  std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const LayerLayout>;

// Flat 32-bit value vector tied to a layout. Holds gradients, accumulations
// and flattened weights alike.
class GradientVector {
 public:
  explicit GradientVector(LayoutPtr layout)
      : layout_(std::move(layout)), values_(layout_->size(), 0.0f) {}

  GradientVector(LayoutPtr layout, std::vector<float> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->size()) {
      throw std::invalid_argument(
          "value count " + std::to_string(values_.size()) +
          " does not match layout size " + std::to_string(layout_->size()));
    }
  }

  std::size_t size() const { return values_.size(); }
  const LayoutPtr& layout() const { return layout_; }

  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  std::span<float> segment_values(std::size_t seg) {
    const LayerSegment& s = layout_->segment(seg);
    return std::span<float>(values_.data() + s.offset, s.extent);
  }
  std::span<const float> segment_values(std::size_t seg) const {
    const LayerSegment& s = layout_->segment(seg);
    return std::span<const float>(values_.data() + s.offset, s.extent);
  }

  void fill(float v) { values_.assign(values_.size(), v); }

  bool all_finite() const {
    for (float v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  LayoutPtr layout_;
  std::vector<float> values_;
};

inline bool same_layout(const GradientVector& a, const GradientVector& b) {
  return a.layout() == b.layout() || *a.layout() == *b.layout();
}

// Euclidean norm with 64-bit accumulation; empty input gives 0.
inline double l2_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

inline double l2_norm(const GradientVector& v) { return l2_norm(v.values()); }

// alpha * x + y, elementwise. x and y must share a layout.
inline GradientVector saxpy(float alpha, const GradientVector& x,
                            const GradientVector& y) {
  if (!same_layout(x, y)) {
    throw std::invalid_argument("saxpy: layout mismatch");
  }
  GradientVector out(x.layout());
  std::span<const float> xs = x.values();
  std::span<const float> ys = y.values();
  std::span<float> os = out.values();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] = alpha * xs[i] + ys[i];
  return out;
}

}  // namespace dgc
