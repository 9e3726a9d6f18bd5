#include "stbp/kernels.hpp"

#include <algorithm>
#include <vector>

namespace stbp::kernels {
namespace {

// Indices of the nonzero entries. Spike frames and surrogate-gated errors
// are mostly zero, so every kernel below iterates over these only.
void nonzero_indices(std::span<const double> v, std::vector<std::size_t>& idx) {
  idx.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) idx.push_back(i);
  }
}

struct Scratch {
  std::vector<std::size_t> active;
  std::vector<std::size_t> active_out;
  std::vector<double> packed;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

void dense_forward(const DenseGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x) {
  auto& active = scratch().active;
  nonzero_indices(in, active);
  if (active.size() * 2 > g.in) {
    for (std::size_t i = 0; i < g.out; ++i) {
      const double* row = w.data() + i * g.in;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < g.in; ++j) acc += row[j] * in[j];
      x[i] = acc;
    }
    return;
  }
  for (std::size_t i = 0; i < g.out; ++i) {
    const double* row = w.data() + i * g.in;
    double acc = 0.0;
    for (std::size_t j : active) acc += row[j] * in[j];
    x[i] = acc;
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> w, std::span<const double> du,
                          std::span<double> d_in) {
  std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t i = 0; i < g.out; ++i) {
    const double d = du[i];
    if (d == 0.0) continue;
    const double* row = w.data() + i * g.in;
    double* dst = d_in.data();
#pragma omp simd
    for (std::size_t j = 0; j < g.in; ++j) dst[j] += d * row[j];
  }
}

void dense_weight_grad(const DenseGeometry& g, std::span<const double> du, std::span<const double> in,
                       std::span<double> dw) {
  auto& active = scratch().active;
  nonzero_indices(in, active);
  for (std::size_t i = 0; i < g.out; ++i) {
    const double d = du[i];
    if (d == 0.0) continue;
    double* row = dw.data() + i * g.in;
    for (std::size_t j : active) row[j] += d * in[j];
  }
}

void conv_forward(const ConvGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x) {
  const Shape3 out = g.out();
  const std::size_t ic_n = g.in.channels;
  const std::size_t oc_n = g.out_channels;
  const std::size_t kh = g.kernel_h;
  const std::size_t kw = g.kernel_w;

  // Repack to [ic][ky][kx][oc] so the innermost loop runs over contiguous
  // output channels.
  auto& packed = scratch().packed;
  packed.resize(g.weight_count());
  for (std::size_t oc = 0; oc < oc_n; ++oc)
    for (std::size_t ic = 0; ic < ic_n; ++ic)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx)
          packed[((ic * kh + ky) * kw + kx) * oc_n + oc] = w[((oc * ic_n + ic) * kh + ky) * kw + kx];

  std::fill(x.begin(), x.end(), 0.0);
  auto& active = scratch().active;
  nonzero_indices(in, active);
  for (std::size_t idx : active) {
    const double v = in[idx];
    const std::size_t ic = idx % ic_n;
    const std::size_t pix = idx / ic_n;
    const std::size_t iy = pix / g.in.width;
    const std::size_t ix = pix % g.in.width;
    for (std::size_t ky = 0; ky < kh && ky <= iy; ++ky) {
      const std::size_t ry = iy - ky;
      if (ry % g.stride != 0) continue;
      const std::size_t oy = ry / g.stride;
      if (oy >= out.height) continue;
      for (std::size_t kx = 0; kx < kw && kx <= ix; ++kx) {
        const std::size_t rx = ix - kx;
        if (rx % g.stride != 0) continue;
        const std::size_t ox = rx / g.stride;
        if (ox >= out.width) continue;
        const double* src = packed.data() + ((ic * kh + ky) * kw + kx) * oc_n;
        double* dst = x.data() + (oy * out.width + ox) * oc_n;
#pragma omp simd
        for (std::size_t oc = 0; oc < oc_n; ++oc) dst[oc] += v * src[oc];
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> w, std::span<const double> du,
                         std::span<double> d_in) {
  const Shape3 out = g.out();
  const std::size_t ic_n = g.in.channels;
  const std::size_t oc_n = g.out_channels;
  const std::size_t kh = g.kernel_h;
  const std::size_t kw = g.kernel_w;

  // [oc][ky][kx][ic]
  auto& packed = scratch().packed;
  packed.resize(g.weight_count());
  for (std::size_t oc = 0; oc < oc_n; ++oc)
    for (std::size_t ic = 0; ic < ic_n; ++ic)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx)
          packed[((oc * kh + ky) * kw + kx) * ic_n + ic] = w[((oc * ic_n + ic) * kh + ky) * kw + kx];

  std::fill(d_in.begin(), d_in.end(), 0.0);
  auto& active = scratch().active_out;
  nonzero_indices(du, active);
  for (std::size_t idx : active) {
    const double d = du[idx];
    const std::size_t oc = idx % oc_n;
    const std::size_t pix = idx / oc_n;
    const std::size_t oy = pix / out.width;
    const std::size_t ox = pix % out.width;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double* src = packed.data() + ((oc * kh + ky) * kw + kx) * ic_n;
        double* dst = d_in.data() + g.in.index(oy * g.stride + ky, ox * g.stride + kx, 0);
#pragma omp simd
        for (std::size_t ic = 0; ic < ic_n; ++ic) dst[ic] += d * src[ic];
      }
    }
  }
}

void conv_weight_grad(const ConvGeometry& g, std::span<const double> du, std::span<const double> in,
                      std::span<double> dw, std::span<double> db) {
  const Shape3 out = g.out();
  const std::size_t ic_n = g.in.channels;
  const std::size_t oc_n = g.out_channels;
  const std::size_t kh = g.kernel_h;
  const std::size_t kw = g.kernel_w;

  // Accumulate into [oc][ky][kx][ic] and scatter back once.
  auto& packed = scratch().packed;
  packed.assign(g.weight_count(), 0.0);
  auto& active = scratch().active_out;
  nonzero_indices(du, active);
  for (std::size_t idx : active) {
    const double d = du[idx];
    const std::size_t oc = idx % oc_n;
    const std::size_t pix = idx / oc_n;
    const std::size_t oy = pix / out.width;
    const std::size_t ox = pix % out.width;
    db[oc] += d;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double* src = in.data() + g.in.index(oy * g.stride + ky, ox * g.stride + kx, 0);
        double* dst = packed.data() + ((oc * kh + ky) * kw + kx) * ic_n;
#pragma omp simd
        for (std::size_t ic = 0; ic < ic_n; ++ic) dst[ic] += d * src[ic];
      }
    }
  }
  if (active.empty()) return;
  for (std::size_t oc = 0; oc < oc_n; ++oc)
    for (std::size_t ic = 0; ic < ic_n; ++ic)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx)
          dw[((oc * ic_n + ic) * kh + ky) * kw + kx] += packed[((oc * kh + ky) * kw + kx) * ic_n + ic];
}

void avgpool_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out) {
  const Shape3 os = g.out();
  const std::size_t c_n = os.channels;
  const double scale = 1.0 / static_cast<double>(g.window * g.window);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t oy = 0; oy < os.height; ++oy) {
    for (std::size_t dy = 0; dy < g.window; ++dy) {
      const std::size_t iy = oy * g.window + dy;
      for (std::size_t ox = 0; ox < os.width; ++ox) {
        double* dst = out.data() + (oy * os.width + ox) * c_n;
        for (std::size_t dx = 0; dx < g.window; ++dx) {
          const double* src = in.data() + g.in.index(iy, ox * g.window + dx, 0);
          for (std::size_t c = 0; c < c_n; ++c) dst[c] += src[c];
        }
      }
    }
  }
  for (double& v : out) v *= scale;
}

void avgpool_backward(const PoolGeometry& g, std::span<const double> d_out, std::span<double> d_in) {
  const Shape3 os = g.out();
  const std::size_t c_n = os.channels;
  const double scale = 1.0 / static_cast<double>(g.window * g.window);
  // Rows/columns beyond the last full window receive nothing.
  std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t oy = 0; oy < os.height; ++oy) {
    for (std::size_t dy = 0; dy < g.window; ++dy) {
      const std::size_t iy = oy * g.window + dy;
      for (std::size_t ox = 0; ox < os.width; ++ox) {
        const double* src = d_out.data() + (oy * os.width + ox) * c_n;
        for (std::size_t dx = 0; dx < g.window; ++dx) {
          double* dst = d_in.data() + g.in.index(iy, ox * g.window + dx, 0);
          for (std::size_t c = 0; c < c_n; ++c) dst[c] = src[c] * scale;
        }
      }
    }
  }
}

}  // namespace stbp::kernels
