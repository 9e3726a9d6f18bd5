#pragma once

#include <string>
#include <string_view>

namespace stbp {

/// The four pseudo-derivative curves substituted for d(spike)/du.
enum class SurrogateKind { Rectangular, Triangular, Sigmoid, Gaussian };

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::Rectangular;
  double a = 1.0;     // width / shape parameter
  double v_th = 1.5;  // center of the curve

  void validate() const;
};

/// Accepts "rectangular", "triangular", "sigmoid", "gaussian" and the
/// short aliases "h1".."h4".
SurrogateKind parse_surrogate_kind(std::string_view name);
std::string to_string(SurrogateKind kind);

/// h(u) for the given curve; nonnegative, symmetric about v_th, unit mass.
double surrogate_value(const SurrogateSpec& spec, double u);

/// Closed-form antiderivative of surrogate_value: monotone from 0 to 1,
/// equal to 1/2 at v_th. Used as a differentiable stand-in for the spike
/// gate when certifying gradients.
double smooth_gate(const SurrogateSpec& spec, double u);

/// Composite Gauss-Legendre quadrature of surrogate_value over [lo, hi].
/// The interval is split at the curve's kinks (rectangular and triangular
/// supports) so every panel integrates a smooth piece; `n` is the total
/// number of panels and must be at least 1000.
double surrogate_integral(const SurrogateSpec& spec, double lo, double hi, int n = 1000);

}  // namespace stbp
