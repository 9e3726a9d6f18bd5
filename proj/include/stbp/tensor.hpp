#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stbp {

/// Height x width x channels, stored channel-last (HWC). Dense activations
/// use {1, 1, n}.
struct Shape3 {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const { return (y * width + x) * channels + c; }
  std::string str() const;

  static Shape3 flat(std::size_t n) { return {1, 1, n}; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Activity over a time window: `steps` frames of `shape`, frame-major.
/// Values are 0/1 spikes for spiking layers and may be fractional for
/// pooled activity or event counts.
struct SpikeTensor {
  std::size_t steps = 0;
  Shape3 shape;
  std::vector<double> data;

  SpikeTensor() = default;
  SpikeTensor(std::size_t steps_, Shape3 shape_) : steps(steps_), shape(shape_), data(steps_ * shape_.size(), 0.0) {}

  std::span<double> step(std::size_t t) { return {data.data() + t * shape.size(), shape.size()}; }
  std::span<const double> step(std::size_t t) const { return {data.data() + t * shape.size(), shape.size()}; }

  double& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) { return data[t * shape.size() + shape.index(y, x, c)]; }
  double at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return data[t * shape.size() + shape.index(y, x, c)];
  }

  /// (1/steps) * sum over time, per neuron.
  std::vector<double> mean_rate() const;
};

}  // namespace stbp
