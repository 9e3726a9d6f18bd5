#include "stbp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stbp/error.hpp"

namespace stbp {

BackpropMode parse_backprop_mode(std::string_view name) {
  if (name == "stbp") return BackpropMode::Stbp;
  if (name == "sdbp") return BackpropMode::Sdbp;
  if (name == "smooth-oracle") return BackpropMode::SmoothOracle;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected stbp, sdbp or smooth-oracle)");
}

std::string to_string(BackpropMode mode) {
  switch (mode) {
    case BackpropMode::Stbp: return "stbp";
    case BackpropMode::Sdbp: return "sdbp";
    case BackpropMode::SmoothOracle: return "smooth-oracle";
  }
  return "unknown";
}

GradientSet GradientSet::zeros_like(const Network& net) {
  GradientSet g;
  g.layers.resize(net.layers.size());
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    if (const auto* d = std::get_if<DenseLayer>(&net.layers[n])) {
      g.layers[n].w.assign(d->w.size(), 0.0);
      g.layers[n].b.assign(d->b.size(), 0.0);
    } else if (const auto* c = std::get_if<ConvLayer>(&net.layers[n])) {
      g.layers[n].w.assign(c->w.size(), 0.0);
      g.layers[n].b.assign(c->b.size(), 0.0);
    }
  }
  return g;
}

void GradientSet::set_zero() {
  for (auto& l : layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

void GradientSet::add(const GradientSet& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("GradientSet::add: layer count mismatch");
  for (std::size_t n = 0; n < layers.size(); ++n) {
    auto& dst = layers[n];
    const auto& src = other.layers[n];
    if (dst.w.size() != src.w.size() || dst.b.size() != src.b.size()) {
      throw ShapeError("GradientSet::add: shape mismatch at layer " + std::to_string(n));
    }
    for (std::size_t i = 0; i < dst.w.size(); ++i) dst.w[i] += src.w[i];
    for (std::size_t i = 0; i < dst.b.size(); ++i) dst.b[i] += src.b[i];
  }
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers) {
    for (double v : l.w) m = std::max(m, std::abs(v));
    for (double v : l.b) m = std::max(m, std::abs(v));
  }
  return m;
}

void check_finite(const GradientSet& grads) {
  for (std::size_t n = 0; n < grads.layers.size(); ++n) {
    for (const auto* v : {&grads.layers[n].w, &grads.layers[n].b}) {
      for (double x : *v) {
        if (!std::isfinite(x)) throw NumericalError("non-finite gradient in layer " + std::to_string(n));
      }
    }
  }
}

std::vector<double> one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) {
    throw ShapeError("label " + std::to_string(label) + " out of range for " + std::to_string(classes) + " classes");
  }
  std::vector<double> y(classes, 0.0);
  y[label] = 1.0;
  return y;
}

double sample_loss(std::span<const double> rates, std::size_t label, std::size_t batch_size) {
  const auto y = one_hot(label, rates.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) sq += (y[i] - rates[i]) * (y[i] - rates[i]);
  return 0.5 * sq / static_cast<double>(batch_size);
}

double loss(std::span<const SpikeTensor> outputs, std::span<const std::size_t> labels) {
  if (outputs.size() != labels.size()) {
    throw ShapeError("loss: " + std::to_string(outputs.size()) + " outputs but " + std::to_string(labels.size()) +
                     " labels");
  }
  if (outputs.empty()) throw ShapeError("loss: empty batch");
  double total = 0.0;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    if (outputs[s].steps == 0) throw ShapeError("loss: output with zero time steps");
    total += sample_loss(outputs[s].mean_rate(), labels[s], outputs.size());
  }
  return total;
}

std::vector<double> output_direct_grad(std::span<const double> rates, std::span<const double> target, std::size_t steps,
                                       std::size_t batch_size) {
  if (rates.size() != target.size()) throw ShapeError("output_direct_grad: rate/target size mismatch");
  const double scale = -1.0 / (static_cast<double>(steps) * static_cast<double>(batch_size));
  std::vector<double> g(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) g[i] = scale * (target[i] - rates[i]);
  return g;
}

namespace {

struct LayerView {
  const LifParams* lif = nullptr;  // null for stateless pools
  const DenseLayer* dense = nullptr;
  const ConvLayer* conv = nullptr;
  const AvgPoolLayer* pool = nullptr;
};

LayerView view_of(const Layer& layer) {
  LayerView v;
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    v.dense = d;
    v.lif = &d->lif;
  } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
    v.conv = c;
    v.lif = &c->lif;
  } else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
    v.pool = p;
    if (p->spiking) v.lif = &p->lif;
  }
  return v;
}

// Propagates dL/dx of a layer back to dL/d(input frame).
void input_grad(const LayerView& v, bool fast, std::span<const double> dx, std::span<double> d_in) {
  if (v.dense) {
    fast ? kernels::dense_backward_input(v.dense->geom, v.dense->w, dx, d_in)
         : kernels::reference::dense_backward_input(v.dense->geom, v.dense->w, dx, d_in);
  } else if (v.conv) {
    fast ? kernels::conv_backward_input(v.conv->geom, v.conv->w, dx, d_in)
         : kernels::reference::conv_backward_input(v.conv->geom, v.conv->w, dx, d_in);
  } else {
    fast ? kernels::avgpool_backward(v.pool->geom, dx, d_in) : kernels::reference::avgpool_backward(v.pool->geom, dx, d_in);
  }
}

void param_grad(const LayerView& v, bool fast, std::span<const double> du, std::span<const double> in, ParamGrad& g) {
  if (v.dense) {
    fast ? kernels::dense_weight_grad(v.dense->geom, du, in, g.w)
         : kernels::reference::dense_weight_grad(v.dense->geom, du, in, g.w);
    for (std::size_t i = 0; i < du.size(); ++i) g.b[i] += du[i];
  } else if (v.conv) {
    fast ? kernels::conv_weight_grad(v.conv->geom, du, in, g.w, g.b)
         : kernels::reference::conv_weight_grad(v.conv->geom, du, in, g.w, g.b);
  }
}

}  // namespace

void backward(const Trace& trace, std::size_t label, const Network& net, const BackwardOptions& options,
              GradientSet& grads, BackwardState* state) {
  const std::size_t n_layers = net.layers.size();
  const std::size_t steps = trace.steps;
  if (trace.layers.size() != n_layers) throw ShapeError("backward: trace does not match network depth");
  if (grads.layers.size() != n_layers) throw ShapeError("backward: gradient set does not match network depth");
  if (steps == 0) throw ShapeError("backward: empty trace");
  if (options.batch_size == 0) throw ShapeError("backward: batch size must be positive");

  const bool temporal = options.mode != BackpropMode::Sdbp;
  const bool fast = options.backend == kernels::Backend::Fast;

  const auto rates = trace.output().mean_rate();
  const auto direct = output_direct_grad(rates, one_hot(label, rates.size()), steps, options.batch_size);

  if (state) {
    state->delta_o.assign(n_layers, {});
    state->delta_u.assign(n_layers, {});
  }

  // dL/do of the current layer coming from the layer above, all steps.
  std::vector<double> d_out(steps * trace.layers.back().shape.size(), 0.0);
  std::vector<double> d_in;
  std::vector<double> d_o;
  std::vector<double> du;
  std::vector<double> carry;

  for (std::size_t n = n_layers; n-- > 0;) {
    const LayerView v = view_of(net.layers[n]);
    const LayerTrace& lt = trace.layers[n];
    const std::size_t size = lt.shape.size();
    const bool is_output = n + 1 == n_layers;
    const Shape3 in_shape = input_shape_of(net.layers[n]);
    const std::size_t in_size = in_shape.size();
    if (n > 0) d_in.assign(steps * in_size, 0.0);
    if (state) {
      state->delta_o[n].assign(steps * size, 0.0);
      if (v.lif) state->delta_u[n].assign(steps * size, 0.0);
    }

    auto input_at = [&](std::size_t t) -> std::span<const double> {
      return n == 0 ? trace.input.step(t) : trace.layers[n - 1].o_at(t);
    };

    if (!v.lif) {
      // Stateless pool: o = x = avg(in).
      for (std::size_t t = 0; t < steps; ++t) {
        std::span<const double> dx(d_out.data() + t * size, size);
        if (state) std::copy(dx.begin(), dx.end(), state->delta_o[n].begin() + t * size);
        if (n > 0) input_grad(v, fast, dx, std::span<double>(d_in.data() + t * in_size, in_size));
      }
    } else {
      SurrogateSpec spec = options.surrogate;
      spec.v_th = v.lif->v_th;
      const double tau = v.lif->tau;
      carry.assign(size, 0.0);
      d_o.resize(size);
      du.resize(size);
      ParamGrad* pg = (v.dense || v.conv) ? &grads.layers[n] : nullptr;

      for (std::size_t t = steps; t-- > 0;) {
        const auto u = lt.u_at(t);
        const auto o = lt.o_at(t);
        const bool has_future = temporal && t + 1 < steps;
        const double* spatial = d_out.data() + t * size;
        for (std::size_t i = 0; i < size; ++i) {
          double d = spatial[i];
          if (is_output) d += direct[i];
          // u^{t+1} = u^t f(o^t) + ...: o^t reaches the future through f.
          if (has_future && carry[i] != 0.0) {
            d += carry[i] * u[i] * forget_gate_derivative(o[i], tau) * options.forget_derivative_scale;
          }
          d_o[i] = d;
          double g = d != 0.0 ? d * surrogate_value(spec, u[i]) : 0.0;
          if (has_future && carry[i] != 0.0) g += carry[i] * forget_gate(o[i], tau);
          du[i] = g;
          if (!std::isfinite(g)) {
            throw NumericalError("non-finite gradient at layer " + std::to_string(n) + " step " + std::to_string(t));
          }
        }
        if (state) {
          std::copy(d_o.begin(), d_o.end(), state->delta_o[n].begin() + t * size);
          std::copy(du.begin(), du.end(), state->delta_u[n].begin() + t * size);
        }
        if (pg) param_grad(v, fast, du, input_at(t), *pg);
        if (n > 0) input_grad(v, fast, du, std::span<double>(d_in.data() + t * in_size, in_size));
        carry.swap(du);
      }
    }
    d_out.swap(d_in);
  }
}

BackwardResult backward(const Trace& trace, std::size_t label, const Network& net, const BackwardOptions& options) {
  BackwardResult r;
  r.grads = GradientSet::zeros_like(net);
  backward(trace, label, net, options, r.grads, &r.state);
  return r;
}

}  // namespace stbp
