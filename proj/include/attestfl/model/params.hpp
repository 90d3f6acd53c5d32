#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "attestfl/error.hpp"

namespace attestfl {

/// Dense layer geometry: an `outputs x inputs` weight matrix (row-major)
/// followed by `outputs` biases when `has_bias` is set.
struct LayerShape {
  std::uint32_t inputs = 0;
  std::uint32_t outputs = 0;
  bool has_bias = true;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(inputs) * outputs;
  }
  std::size_t element_count() const noexcept {
    return weight_count() + (has_bias ? outputs : 0);
  }

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

using Architecture = std::vector<LayerShape>;

inline std::size_t parameter_count(const Architecture& arch) {
  std::size_t d = 0;
  for (const auto& layer : arch) d += layer.element_count();
  return d;
}

/// Builds the `inputs -> hidden... -> classes` MLP geometry.
inline Architecture mlp_architecture(std::uint32_t inputs,
                                     const std::vector<std::uint32_t>& hidden,
                                     std::uint32_t classes) {
  Architecture arch;
  std::uint32_t prev = inputs;
  for (auto width : hidden) {
    arch.push_back({prev, width, true});
    prev = width;
  }
  arch.push_back({prev, classes, true});
  return arch;
}

/// Flat parameter vector with per-layer shape metadata. Used for global
/// weights, local weights, updates and gradients alike.
class ModelParams {
 public:
  ModelParams() = default;

  ModelParams(Architecture shapes, std::vector<double> values)
      : shapes_(std::move(shapes)), values_(std::move(values)) {
    if (shapes_.empty()) {
      throw Error(Errc::kShapeMismatch, "model needs at least one layer");
    }
    if (parameter_count(shapes_) != values_.size()) {
      throw Error(Errc::kShapeMismatch,
                  "layer element counts sum to " +
                      std::to_string(parameter_count(shapes_)) + ", got " +
                      std::to_string(values_.size()) + " values");
    }
    if (values_.empty()) {
      throw Error(Errc::kShapeMismatch, "model dimension must be positive");
    }
  }

  static ModelParams zeros(const Architecture& shapes) {
    return ModelParams(shapes, std::vector<double>(parameter_count(shapes)));
  }

  /// Single pseudo-layer wrapper around a raw vector.
  static ModelParams flat(std::vector<double> values) {
    Architecture arch{{1, static_cast<std::uint32_t>(values.size()), false}};
    return ModelParams(std::move(arch), std::move(values));
  }

  /// Glorot-uniform weights, zero biases.
  static ModelParams xavier(const Architecture& shapes, std::uint64_t seed) {
    ModelParams p = zeros(shapes);
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const auto& s = shapes[k];
      double limit = std::sqrt(6.0 / (s.inputs + s.outputs));
      std::uniform_real_distribution<double> dist(-limit, limit);
      auto w = p.weights(k);
      for (auto& v : w) v = dist(rng);
    }
    return p;
  }

  const Architecture& shapes() const noexcept { return shapes_; }
  std::size_t layer_count() const noexcept { return shapes_.size(); }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vector() const noexcept { return values_; }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::size_t layer_offset(std::size_t layer) const noexcept {
    std::size_t off = 0;
    for (std::size_t k = 0; k < layer; ++k) off += shapes_[k].element_count();
    return off;
  }

  std::span<double> layer(std::size_t k) noexcept {
    return values().subspan(layer_offset(k), shapes_[k].element_count());
  }
  std::span<const double> layer(std::size_t k) const noexcept {
    return values().subspan(layer_offset(k), shapes_[k].element_count());
  }
  std::span<double> weights(std::size_t k) noexcept {
    return layer(k).first(shapes_[k].weight_count());
  }
  std::span<const double> weights(std::size_t k) const noexcept {
    return layer(k).first(shapes_[k].weight_count());
  }
  std::span<double> biases(std::size_t k) noexcept {
    return layer(k).subspan(shapes_[k].weight_count());
  }
  std::span<const double> biases(std::size_t k) const noexcept {
    return layer(k).subspan(shapes_[k].weight_count());
  }

  bool all_finite() const noexcept {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void require_same_shape(const ModelParams& other, const char* what) const {
    if (shapes_ != other.shapes_) {
      throw Error(Errc::kShapeMismatch, what);
    }
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  Architecture shapes_;
  std::vector<double> values_;
};

}  // namespace attestfl
