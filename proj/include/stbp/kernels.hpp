#pragma once

// Per-step layer kernels. The default namespace holds the sparse-aware
// versions used for training; `reference` holds the direct textbook loops
// they are tested and benchmarked against.

#include <cstddef>
#include <span>

#include "stbp/tensor.hpp"

namespace stbp::kernels {

enum class Backend { Fast, Reference };

struct DenseGeometry {
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Valid (unpadded) convolution. Weights are [out_ch][in_ch][kh][kw];
/// activations are HWC.
struct ConvGeometry {
  Shape3 in;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;

  Shape3 out() const {
    return {(in.height - kernel_h) / stride + 1, (in.width - kernel_w) / stride + 1, out_channels};
  }
  std::size_t weight_count() const { return out_channels * in.channels * kernel_h * kernel_w; }
};

/// Non-overlapping window x window average.
struct PoolGeometry {
  Shape3 in;
  std::size_t window = 2;

  Shape3 out() const { return {in.height / window, in.width / window, in.channels}; }
};

// x = W in
void dense_forward(const DenseGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x);
// d_in = W^T du
void dense_backward_input(const DenseGeometry& g, std::span<const double> w, std::span<const double> du,
                          std::span<double> d_in);
// dw += du in^T
void dense_weight_grad(const DenseGeometry& g, std::span<const double> du, std::span<const double> in,
                       std::span<double> dw);

void conv_forward(const ConvGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x);
void conv_backward_input(const ConvGeometry& g, std::span<const double> w, std::span<const double> du,
                         std::span<double> d_in);
// dw += correlation of du with in; db[c] += sum of du over positions of channel c
void conv_weight_grad(const ConvGeometry& g, std::span<const double> du, std::span<const double> in,
                      std::span<double> dw, std::span<double> db);

void avgpool_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out);
void avgpool_backward(const PoolGeometry& g, std::span<const double> d_out, std::span<double> d_in);

namespace reference {

void dense_forward(const DenseGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x);
void dense_backward_input(const DenseGeometry& g, std::span<const double> w, std::span<const double> du,
                          std::span<double> d_in);
void dense_weight_grad(const DenseGeometry& g, std::span<const double> du, std::span<const double> in,
                       std::span<double> dw);
void conv_forward(const ConvGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x);
void conv_backward_input(const ConvGeometry& g, std::span<const double> w, std::span<const double> du,
                         std::span<double> d_in);
void conv_weight_grad(const ConvGeometry& g, std::span<const double> du, std::span<const double> in,
                      std::span<double> dw, std::span<double> db);
void avgpool_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out);
void avgpool_backward(const PoolGeometry& g, std::span<const double> d_out, std::span<double> d_in);

}  // namespace reference
}  // namespace stbp::kernels
