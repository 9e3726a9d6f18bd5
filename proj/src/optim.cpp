#include "stbp/optim.hpp"

#include <cmath>

#include "stbp/error.hpp"

namespace stbp {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

void OptimizerConfig::validate() const {
  if (!(std::isfinite(lr) && lr >= 0.0)) throw ConfigError("optim.lr must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optim.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optim.beta2 must lie in [0, 1)");
  if (!(std::isfinite(epsilon) && epsilon > 0.0)) throw ConfigError("optim.epsilon must be positive");
}

void sgd_update(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("sgd_update: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void adam_update(const OptimizerConfig& config, std::uint64_t step, AdamMoments& moments, std::span<double> params,
                 std::span<const double> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_update: parameter/gradient size mismatch");
  if (moments.m.size() != params.size()) moments.m.assign(params.size(), 0.0);
  if (moments.v.size() != params.size()) moments.v.assign(params.size(), 0.0);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.m[i] = b1 * moments.m[i] + (1.0 - b1) * g;
    moments.v[i] = b2 * moments.v[i] + (1.0 - b2) * g * g;
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

Optimizer::Optimizer(OptimizerConfig config, const Network& net) : config_(config) {
  config_.validate();
  w_moments_.resize(net.layers.size());
  b_moments_.resize(net.layers.size());
}

void Optimizer::apply(Network& net, const GradientSet& grads) {
  if (grads.layers.size() != net.layers.size()) throw ShapeError("optimizer: gradient/network depth mismatch");
  ++step_;
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    std::vector<double>* w = nullptr;
    std::vector<double>* b = nullptr;
    if (auto* d = std::get_if<DenseLayer>(&net.layers[n])) {
      w = &d->w;
      b = &d->b;
    } else if (auto* c = std::get_if<ConvLayer>(&net.layers[n])) {
      w = &c->w;
      b = &c->b;
    } else {
      continue;
    }
    if (config_.kind == OptimizerKind::Sgd) {
      sgd_update(*w, grads.layers[n].w, config_.lr);
      sgd_update(*b, grads.layers[n].b, config_.lr);
    } else {
      adam_update(config_, step_, w_moments_[n], *w, grads.layers[n].w);
      adam_update(config_, step_, b_moments_[n], *b, grads.layers[n].b);
    }
  }
}

}  // namespace stbp
