#include "stbp/lif.hpp"

#include <cmath>
#include <string>

#include "stbp/error.hpp"

namespace stbp {

void LifParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(tau)) throw ConfigError("lif.tau must be positive, got " + std::to_string(tau));
  if (!positive(v_th)) throw ConfigError("lif.v_th must be positive, got " + std::to_string(v_th));
  if (!positive(dt)) throw ConfigError("encode.dt must be positive, got " + std::to_string(dt));
}

double forget_gate(double o, double tau) { return tau * std::exp(-o / tau); }

double forget_gate_derivative(double o, double tau) { return -std::exp(-o / tau); }

std::vector<double> lif_step(PotentialState& state, std::span<const double> x, std::span<const double> b,
                             const LifParams& params) {
  const std::size_t n = state.u.size();
  if (state.o_prev.size() != n || x.size() != n || b.size() != n) {
    throw ShapeError("lif_step: state has " + std::to_string(n) + " neurons, input " + std::to_string(x.size()) +
                     ", bias " + std::to_string(b.size()));
  }
  std::vector<double> spikes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = state.u[i] * forget_gate(state.o_prev[i], params.tau) + x[i] + b[i];
    state.u[i] = u;
    spikes[i] = spike_gate(u, params.v_th);
  }
  state.o_prev = spikes;
  return spikes;
}

}  // namespace stbp
