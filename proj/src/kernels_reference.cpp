#include <algorithm>

#include "stbp/kernels.hpp"

namespace stbp::kernels::reference {

void dense_forward(const DenseGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x) {
  for (std::size_t i = 0; i < g.out; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < g.in; ++j) acc += w[i * g.in + j] * in[j];
    x[i] = acc;
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> w, std::span<const double> du,
                          std::span<double> d_in) {
  for (std::size_t j = 0; j < g.in; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.out; ++i) acc += w[i * g.in + j] * du[i];
    d_in[j] = acc;
  }
}

void dense_weight_grad(const DenseGeometry& g, std::span<const double> du, std::span<const double> in,
                       std::span<double> dw) {
  for (std::size_t i = 0; i < g.out; ++i) {
    for (std::size_t j = 0; j < g.in; ++j) dw[i * g.in + j] += du[i] * in[j];
  }
}

void conv_forward(const ConvGeometry& g, std::span<const double> w, std::span<const double> in, std::span<double> x) {
  const Shape3 out = g.out();
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        double acc = 0.0;
        for (std::size_t ic = 0; ic < g.in.channels; ++ic) {
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const std::size_t wi = ((oc * g.in.channels + ic) * g.kernel_h + ky) * g.kernel_w + kx;
              acc += w[wi] * in[g.in.index(oy * g.stride + ky, ox * g.stride + kx, ic)];
            }
          }
        }
        x[out.index(oy, ox, oc)] = acc;
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> w, std::span<const double> du,
                         std::span<double> d_in) {
  const Shape3 out = g.out();
  std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const double d = du[out.index(oy, ox, oc)];
        for (std::size_t ic = 0; ic < g.in.channels; ++ic) {
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const std::size_t wi = ((oc * g.in.channels + ic) * g.kernel_h + ky) * g.kernel_w + kx;
              d_in[g.in.index(oy * g.stride + ky, ox * g.stride + kx, ic)] += w[wi] * d;
            }
          }
        }
      }
    }
  }
}

void conv_weight_grad(const ConvGeometry& g, std::span<const double> du, std::span<const double> in,
                      std::span<double> dw, std::span<double> db) {
  const Shape3 out = g.out();
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const double d = du[out.index(oy, ox, oc)];
        db[oc] += d;
        for (std::size_t ic = 0; ic < g.in.channels; ++ic) {
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const std::size_t wi = ((oc * g.in.channels + ic) * g.kernel_h + ky) * g.kernel_w + kx;
              dw[wi] += d * in[g.in.index(oy * g.stride + ky, ox * g.stride + kx, ic)];
            }
          }
        }
      }
    }
  }
}

void avgpool_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out) {
  const Shape3 os = g.out();
  const double scale = 1.0 / static_cast<double>(g.window * g.window);
  for (std::size_t oy = 0; oy < os.height; ++oy) {
    for (std::size_t ox = 0; ox < os.width; ++ox) {
      for (std::size_t c = 0; c < os.channels; ++c) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < g.window; ++dy) {
          for (std::size_t dx = 0; dx < g.window; ++dx) acc += in[g.in.index(oy * g.window + dy, ox * g.window + dx, c)];
        }
        out[os.index(oy, ox, c)] = acc * scale;
      }
    }
  }
}

void avgpool_backward(const PoolGeometry& g, std::span<const double> d_out, std::span<double> d_in) {
  const Shape3 os = g.out();
  const double scale = 1.0 / static_cast<double>(g.window * g.window);
  std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t oy = 0; oy < os.height; ++oy) {
    for (std::size_t ox = 0; ox < os.width; ++ox) {
      for (std::size_t c = 0; c < os.channels; ++c) {
        for (std::size_t dy = 0; dy < g.window; ++dy) {
          for (std::size_t dx = 0; dx < g.window; ++dx) {
            d_in[g.in.index(oy * g.window + dy, ox * g.window + dx, c)] = d_out[os.index(oy, ox, c)] * scale;
          }
        }
      }
    }
  }
}

}  // namespace stbp::kernels::reference
