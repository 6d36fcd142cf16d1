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
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgc/gradient.hpp"
#include "dgc/rng.hpp"

namespace dgc {

enum class ModelKind { kQuadraticBowl, kLogisticRegression, kTinyMlp };

struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t dimension = 100;   // quadratic/logistic: feature dim; mlp: hidden width
  std::size_t dataset_size = 1024;
  double noise_scale = 0.5;
  // Fraction of logistic sample pairs that share identical features with
  // opposite labels. Forces a positive training-loss floor even when the
  // dimension exceeds the sample count (where any labeling is separable).
  double conflict_fraction = 0.0;
};

// Desk-scale training task with analytic gradients. Loss math runs in 64-bit;
// gradients are handed back as 32-bit vectors already carrying the 1/(N*b)
// scaling, so summing node contributions yields the global mean gradient.
class Model {
 public:
  virtual ~Model() = default;

  virtual const LayoutPtr& layout() const = 0;
  virtual std::size_t dataset_size() const = 0;

  virtual GradientVector init_weights(std::uint64_t seed) const = 0;

  // Mean loss over the batch (unscaled) and the gradient of that mean
  // divided by node_count.
  virtual std::pair<double, GradientVector> loss_grad(
      const GradientVector& w, std::span<const std::uint32_t> batch,
      std::size_t node_count) const = 0;

  // Batch-mean loss only; the finite-difference path through the model.
  virtual double loss_only(std::span<const float> w,
                           std::span<const std::uint32_t> batch) const = 0;

  // Scalar quality measure over the whole dataset (accuracy where labels
  // exist, otherwise full-dataset loss).
  virtual double eval_metric(std::span<const float> w) const = 0;
};

// f(x; w) = 1/2 w'Aw - (b + x)'w with A symmetric positive definite and
// per-sample noise x. The batch-mean gradient is Aw - b - mean(x).
class QuadraticBowlModel : public Model {
 public:
  QuadraticBowlModel(std::vector<double> a_matrix, std::vector<double> b,
                     std::vector<float> samples)
      : dim_(b.size()),
        a_(std::move(a_matrix)),
        b_(std::move(b)),
        samples_(std::move(samples)),
        layout_(LayerLayout::single("w", dim_)) {
    if (a_.size() != dim_ * dim_) {
      throw std::invalid_argument("quadratic: A must be dim x dim");
    }
    if (samples_.size() % dim_ != 0) {
      throw std::invalid_argument("quadratic: ragged sample matrix");
    }
  }

  static std::unique_ptr<QuadraticBowlModel> make_seeded(const ModelSpec& spec,
                                                         std::uint64_t seed) {
    const std::size_t d = spec.dimension;
    RngStream rng = derive_stream(seed, 0, 0, StreamPurpose::kDataGen);
    std::vector<double> r(d * d);
    for (double& v : r) v = rng.normal();
    // A = R'R / d + 0.1 I keeps the spectrum O(1) and bounded away from zero.
    std::vector<double> a(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += r[k * d + i] * r[k * d + j];
        acc /= static_cast<double>(d);
        if (i == j) acc += 0.1;
        a[i * d + j] = acc;
        a[j * d + i] = acc;
      }
    }
    std::vector<double> b(d);
    for (double& v : b) v = rng.normal();
    std::vector<float> samples(spec.dataset_size * d);
    for (float& v : samples)
      v = static_cast<float>(spec.noise_scale * rng.normal());
    return std::make_unique<QuadraticBowlModel>(std::move(a), std::move(b),
                                                std::move(samples));
  }

  const LayoutPtr& layout() const override { return layout_; }
  std::size_t dataset_size() const override { return samples_.size() / dim_; }

  GradientVector init_weights(std::uint64_t seed) const override {
    RngStream rng = derive_stream(seed, 0, 0, StreamPurpose::kWeightInit);
    GradientVector w(layout_);
    for (float& v : w.values()) v = static_cast<float>(rng.normal());
    return w;
  }

  std::pair<double, GradientVector> loss_grad(
      const GradientVector& w, std::span<const std::uint32_t> batch,
      std::size_t node_count) const override {
    std::vector<double> mean_x(dim_, 0.0);
    for (std::uint32_t s : batch) {
      const float* row = samples_.data() + static_cast<std::size_t>(s) * dim_;
      for (std::size_t j = 0; j < dim_; ++j) mean_x[j] += row[j];
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (double& v : mean_x) v *= inv_b;

    double loss = 0.0;
    GradientVector g(layout_);
    const double inv_n = 1.0 / static_cast<double>(node_count);
    for (std::size_t i = 0; i < dim_; ++i) {
      double aw = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        aw += a_[i * dim_ + j] * static_cast<double>(w[j]);
      }
      loss += 0.5 * aw * static_cast<double>(w[i]) -
              (b_[i] + mean_x[i]) * static_cast<double>(w[i]);
      g[i] = static_cast<float>((aw - b_[i] - mean_x[i]) * inv_n);
    }
    return {loss, std::move(g)};
  }

  double loss_only(std::span<const float> w,
                   std::span<const std::uint32_t> batch) const override {
    std::vector<double> mean_x(dim_, 0.0);
    for (std::uint32_t s : batch) {
      const float* row = samples_.data() + static_cast<std::size_t>(s) * dim_;
      for (std::size_t j = 0; j < dim_; ++j) mean_x[j] += row[j];
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      double aw = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        aw += a_[i * dim_ + j] * static_cast<double>(w[j]);
      }
      loss += 0.5 * aw * static_cast<double>(w[i]) -
              (b_[i] + mean_x[i] * inv_b) * static_cast<double>(w[i]);
    }
    return loss;
  }

  double eval_metric(std::span<const float> w) const override {
    std::vector<std::uint32_t> all(dataset_size());
    for (std::size_t i = 0; i < all.size(); ++i)
      all[i] = static_cast<std::uint32_t>(i);
    return loss_only(w, all);
  }

 private:
  std::size_t dim_;
  std::vector<double> a_;  // row-major dim x dim
  std::vector<double> b_;
  std::vector<float> samples_;  // row-major dataset_size x dim
  LayoutPtr layout_;
};

// Binary logistic regression on two seeded Gaussian clusters placed at
// +/- direction; balanced labels, zero-initialized weights.
class LogisticRegressionModel : public Model {
 public:
  LogisticRegressionModel(std::size_t dim, std::vector<float> features,
                          std::vector<std::uint8_t> labels)
      : dim_(dim),
        features_(std::move(features)),
        labels_(std::move(labels)),
        layout_(LayerLayout::single("w", dim_)) {
    if (features_.size() != labels_.size() * dim_) {
      throw std::invalid_argument("logistic: ragged feature matrix");
    }
  }

  static std::unique_ptr<LogisticRegressionModel> make_seeded(
      const ModelSpec& spec, std::uint64_t seed) {
    const std::size_t d = spec.dimension;
    RngStream rng = derive_stream(seed, 0, 0, StreamPurpose::kDataGen);
    std::vector<double> dir(d);
    double norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;
    std::vector<float> features(spec.dataset_size * d);
    std::vector<std::uint8_t> labels(spec.dataset_size);
    const std::size_t pairs = spec.dataset_size / 2;
    const auto conflict_pairs = static_cast<std::size_t>(
        std::llround(spec.conflict_fraction * static_cast<double>(pairs)));
    for (std::size_t p = 0; p < pairs; ++p) {
      float* even = features.data() + (2 * p) * d;
      float* odd = features.data() + (2 * p + 1) * d;
      labels[2 * p] = 0;
      labels[2 * p + 1] = 1;
      if (p < conflict_pairs) {
        // identical features under both labels: no separator fits these
        for (std::size_t j = 0; j < d; ++j) {
          even[j] = static_cast<float>(spec.noise_scale * rng.normal());
          odd[j] = even[j];
        }
      } else {
        for (std::size_t j = 0; j < d; ++j) {
          even[j] = static_cast<float>(-dir[j] + spec.noise_scale * rng.normal());
          odd[j] = static_cast<float>(dir[j] + spec.noise_scale * rng.normal());
        }
      }
    }
    if (spec.dataset_size % 2 == 1) {
      const std::size_t i = spec.dataset_size - 1;
      labels[i] = 1;
      for (std::size_t j = 0; j < d; ++j) {
        features[i * d + j] =
            static_cast<float>(dir[j] + spec.noise_scale * rng.normal());
      }
    }
    return std::make_unique<LogisticRegressionModel>(d, std::move(features),
                                                     std::move(labels));
  }

  const LayoutPtr& layout() const override { return layout_; }
  std::size_t dataset_size() const override { return labels_.size(); }

  GradientVector init_weights(std::uint64_t /*seed*/) const override {
    return GradientVector(layout_);  // zeros: starting loss is ln 2
  }

  std::pair<double, GradientVector> loss_grad(
      const GradientVector& w, std::span<const std::uint32_t> batch,
      std::size_t node_count) const override {
    std::vector<double> gsum(dim_, 0.0);
    double loss = 0.0;
    for (std::uint32_t s : batch) {
      const float* x = features_.data() + static_cast<std::size_t>(s) * dim_;
      double z = 0.0;
      for (std::size_t j = 0; j < dim_; ++j)
        z += static_cast<double>(w[j]) * static_cast<double>(x[j]);
      const double y = labels_[s];
      loss += sample_loss(z, y);
      const double r = sigmoid(z) - y;
      for (std::size_t j = 0; j < dim_; ++j)
        gsum[j] += r * static_cast<double>(x[j]);
    }
    const double scale = 1.0 / (static_cast<double>(batch.size()) *
                                static_cast<double>(node_count));
    GradientVector g(layout_);
    for (std::size_t j = 0; j < dim_; ++j)
      g[j] = static_cast<float>(gsum[j] * scale);
    return {loss / static_cast<double>(batch.size()), std::move(g)};
  }

  double loss_only(std::span<const float> w,
                   std::span<const std::uint32_t> batch) const override {
    double loss = 0.0;
    for (std::uint32_t s : batch) {
      const float* x = features_.data() + static_cast<std::size_t>(s) * dim_;
      double z = 0.0;
      for (std::size_t j = 0; j < dim_; ++j)
        z += static_cast<double>(w[j]) * static_cast<double>(x[j]);
      loss += sample_loss(z, labels_[s]);
    }
    return loss / static_cast<double>(batch.size());
  }

  double eval_metric(std::span<const float> w) const override {
    std::size_t correct = 0;
    for (std::size_t s = 0; s < labels_.size(); ++s) {
      const float* x = features_.data() + s * dim_;
      double z = 0.0;
      for (std::size_t j = 0; j < dim_; ++j)
        z += static_cast<double>(w[j]) * static_cast<double>(x[j]);
      if ((z > 0.0) == (labels_[s] != 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels_.size());
  }

 private:
  static double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  }
  static double sample_loss(double z, double y) {
    const double base = std::log1p(std::exp(-std::fabs(z)));
    if (y > 0.5) return base + (z < 0.0 ? -z : 0.0);
    return base + (z > 0.0 ? z : 0.0);
  }

  std::size_t dim_;
  std::vector<float> features_;  // row-major dataset_size x dim
  std::vector<std::uint8_t> labels_;
  LayoutPtr layout_;
};

// Two-layer tanh MLP (2 -> hidden -> 1 logit) on a two-moons dataset, with
// hand-written backprop. Segments: w1, b1, w2, b2.
class TinyMlpModel : public Model {
 public:
  TinyMlpModel(std::size_t hidden, std::vector<float> features,
               std::vector<std::uint8_t> labels)
      : hidden_(hidden),
        features_(std::move(features)),
        labels_(std::move(labels)),
        layout_(std::make_shared<const LayerLayout>(std::vector<LayerSegment>{
            {"w1", 0, 2 * hidden},
            {"b1", 2 * hidden, hidden},
            {"w2", 3 * hidden, hidden},
            {"b2", 4 * hidden, 1},
        })) {
    if (features_.size() != labels_.size() * 2) {
      throw std::invalid_argument("mlp: ragged feature matrix");
    }
  }

  static std::unique_ptr<TinyMlpModel> make_seeded(const ModelSpec& spec,
                                                   std::uint64_t seed) {
    RngStream rng = derive_stream(seed, 0, 0, StreamPurpose::kDataGen);
    std::vector<float> features(spec.dataset_size * 2);
    std::vector<std::uint8_t> labels(spec.dataset_size);
    for (std::size_t i = 0; i < spec.dataset_size; ++i) {
      const std::uint8_t y = static_cast<std::uint8_t>(i % 2);
      labels[i] = y;
      const double theta = rng.next_double() * 3.14159265358979323846;
      double px, py;
      if (y == 0) {
        px = std::cos(theta);
        py = std::sin(theta);
      } else {
        px = 1.0 - std::cos(theta);
        py = 0.5 - std::sin(theta);
      }
      features[i * 2 + 0] =
          static_cast<float>(px + spec.noise_scale * rng.normal());
      features[i * 2 + 1] =
          static_cast<float>(py + spec.noise_scale * rng.normal());
    }
    return std::make_unique<TinyMlpModel>(spec.dimension, std::move(features),
                                          std::move(labels));
  }

  const LayoutPtr& layout() const override { return layout_; }
  std::size_t dataset_size() const override { return labels_.size(); }

  GradientVector init_weights(std::uint64_t seed) const override {
    RngStream rng = derive_stream(seed, 0, 0, StreamPurpose::kWeightInit);
    GradientVector w(layout_);
    const double s1 = std::sqrt(0.5);
    const double s2 = std::sqrt(1.0 / static_cast<double>(hidden_));
    for (std::size_t i = 0; i < 2 * hidden_; ++i)
      w[i] = static_cast<float>(s1 * rng.normal());
    for (std::size_t i = 0; i < hidden_; ++i)
      w[3 * hidden_ + i] = static_cast<float>(s2 * rng.normal());
    return w;  // biases stay zero
  }

  std::pair<double, GradientVector> loss_grad(
      const GradientVector& w, std::span<const std::uint32_t> batch,
      std::size_t node_count) const override {
    const std::size_t h = hidden_;
    std::vector<double> grad(layout_->size(), 0.0);
    std::vector<double> act(h);
    double loss = 0.0;
    for (std::uint32_t s : batch) {
      const double x0 = features_[static_cast<std::size_t>(s) * 2 + 0];
      const double x1 = features_[static_cast<std::size_t>(s) * 2 + 1];
      const double y = labels_[s];
      double z = static_cast<double>(w[4 * h]);  // b2
      for (std::size_t j = 0; j < h; ++j) {
        const double a = std::tanh(static_cast<double>(w[2 * j]) * x0 +
                                   static_cast<double>(w[2 * j + 1]) * x1 +
                                   static_cast<double>(w[2 * h + j]));
        act[j] = a;
        z += static_cast<double>(w[3 * h + j]) * a;
      }
      loss += sample_loss(z, y);
      const double dz = sigmoid(z) - y;
      grad[4 * h] += dz;
      for (std::size_t j = 0; j < h; ++j) {
        grad[3 * h + j] += dz * act[j];
        const double da =
            dz * static_cast<double>(w[3 * h + j]) * (1.0 - act[j] * act[j]);
        grad[2 * j] += da * x0;
        grad[2 * j + 1] += da * x1;
        grad[2 * h + j] += da;
      }
    }
    const double scale = 1.0 / (static_cast<double>(batch.size()) *
                                static_cast<double>(node_count));
    GradientVector g(layout_);
    for (std::size_t i = 0; i < grad.size(); ++i)
      g[i] = static_cast<float>(grad[i] * scale);
    return {loss / static_cast<double>(batch.size()), std::move(g)};
  }

  double loss_only(std::span<const float> w,
                   std::span<const std::uint32_t> batch) const override {
    const std::size_t h = hidden_;
    double loss = 0.0;
    for (std::uint32_t s : batch) {
      const double x0 = features_[static_cast<std::size_t>(s) * 2 + 0];
      const double x1 = features_[static_cast<std::size_t>(s) * 2 + 1];
      double z = static_cast<double>(w[4 * h]);
      for (std::size_t j = 0; j < h; ++j) {
        const double a = std::tanh(static_cast<double>(w[2 * j]) * x0 +
                                   static_cast<double>(w[2 * j + 1]) * x1 +
                                   static_cast<double>(w[2 * h + j]));
        z += static_cast<double>(w[3 * h + j]) * a;
      }
      loss += sample_loss(z, labels_[s]);
    }
    return loss / static_cast<double>(batch.size());
  }

  double eval_metric(std::span<const float> w) const override {
    const std::size_t h = hidden_;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < labels_.size(); ++s) {
      const double x0 = features_[s * 2 + 0];
      const double x1 = features_[s * 2 + 1];
      double z = static_cast<double>(w[4 * h]);
      for (std::size_t j = 0; j < h; ++j) {
        const double a = std::tanh(static_cast<double>(w[2 * j]) * x0 +
                                   static_cast<double>(w[2 * j + 1]) * x1 +
                                   static_cast<double>(w[2 * h + j]));
        z += static_cast<double>(w[3 * h + j]) * a;
      }
      if ((z > 0.0) == (labels_[s] != 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels_.size());
  }

 private:
  static double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  }
  static double sample_loss(double z, double y) {
    const double base = std::log1p(std::exp(-std::fabs(z)));
    if (y > 0.5) return base + (z < 0.0 ? -z : 0.0);
    return base + (z > 0.0 ? z : 0.0);
  }

  std::size_t hidden_;
  std::vector<float> features_;  // dataset_size x 2
  std::vector<std::uint8_t> labels_;
  LayoutPtr layout_;
};

inline std::unique_ptr<Model> make_model(const ModelSpec& spec,
                                         std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::kQuadraticBowl:
      return QuadraticBowlModel::make_seeded(spec, seed);
    case ModelKind::kLogisticRegression:
      return LogisticRegressionModel::make_seeded(spec, seed);
    case ModelKind::kTinyMlp:
      return TinyMlpModel::make_seeded(spec, seed);
  }
  throw std::invalid_argument("unknown model kind");
}

}  // namespace dgc
