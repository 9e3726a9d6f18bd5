#include "stbp/tensor.hpp"

namespace stbp {

std::string Shape3::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

std::vector<double> SpikeTensor::mean_rate() const {
  const std::size_t n = shape.size();
  std::vector<double> rate(n, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* frame = data.data() + t * n;
    for (std::size_t i = 0; i < n; ++i) rate[i] += frame[i];
  }
  if (steps > 0) {
    for (double& r : rate) r /= static_cast<double>(steps);
  }
  return rate;
}

}  // namespace stbp
