#pragma once

#include <span>
#include <vector>

namespace stbp {

/// Iterative leaky integrate-and-fire parameters.
///
/// `tau` is used directly as the per-step decay factor of the forget gate,
/// i.e. a silent neuron keeps `tau` of its potential from one step to the
/// next. `dt` is the simulation step in milliseconds and only matters for
/// converting event timestamps into steps.
struct LifParams {
  double tau = 0.1;
  double v_th = 1.5;
  double dt = 1.0;

  /// Throws ConfigError unless tau, v_th and dt are all positive and finite.
  void validate() const;
};

/// tau * exp(-o / tau). Strictly positive, decreasing in o.
double forget_gate(double o, double tau);

/// d/do of forget_gate: -exp(-o / tau).
double forget_gate_derivative(double o, double tau);

/// Hard threshold; fires on u >= v_th.
inline double spike_gate(double u, double v_th) { return u >= v_th ? 1.0 : 0.0; }

struct PotentialState {
  std::vector<double> u;
  std::vector<double> o_prev;

  static PotentialState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
};

/// One step of the potential recursion
///   u' = u * f(o_prev) + x + b,  o' = [u' >= v_th]
/// Returns the new spikes; `state` is advanced in place to (u', o').
std::vector<double> lif_step(PotentialState& state, std::span<const double> x, std::span<const double> b,
                             const LifParams& params);

}  // namespace stbp
