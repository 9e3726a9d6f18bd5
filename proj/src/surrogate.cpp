#include "stbp/surrogate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "stbp/error.hpp"

namespace stbp {

void SurrogateSpec::validate() const {
  if (!(std::isfinite(a) && a > 0.0)) throw ConfigError("surrogate.a must be positive, got " + std::to_string(a));
  if (!std::isfinite(v_th)) throw ConfigError("surrogate threshold must be finite");
}

SurrogateKind parse_surrogate_kind(std::string_view name) {
  if (name == "rectangular" || name == "rect" || name == "h1") return SurrogateKind::Rectangular;
  if (name == "triangular" || name == "polynomial" || name == "h2") return SurrogateKind::Triangular;
  if (name == "sigmoid" || name == "sigmoid-derivative" || name == "h3") return SurrogateKind::Sigmoid;
  if (name == "gaussian" || name == "h4") return SurrogateKind::Gaussian;
  throw ConfigError("unknown surrogate kind '" + std::string(name) + "'");
}

std::string to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::Rectangular: return "rectangular";
    case SurrogateKind::Triangular: return "triangular";
    case SurrogateKind::Sigmoid: return "sigmoid";
    case SurrogateKind::Gaussian: return "gaussian";
  }
  return "unknown";
}

double surrogate_value(const SurrogateSpec& spec, double u) {
  const double d = u - spec.v_th;
  const double ad = std::abs(d);
  const double a = spec.a;
  switch (spec.kind) {
    case SurrogateKind::Rectangular:
      return ad < 0.5 * a ? 1.0 / a : 0.0;
    case SurrogateKind::Triangular: {
      const double root = std::sqrt(a);
      if (ad >= 2.0 / root) return 0.0;
      return std::max(0.0, 0.5 * root - 0.25 * a * ad);
    }
    case SurrogateKind::Sigmoid: {
      // e^{-|d|/a} / (1 + e^{-|d|/a})^2 is the same curve and never overflows.
      const double e = std::exp(-ad / a);
      return e / (a * (1.0 + e) * (1.0 + e));
    }
    case SurrogateKind::Gaussian:
      return std::exp(-d * d / (2.0 * a)) / std::sqrt(2.0 * std::numbers::pi * a);
  }
  return 0.0;
}

double smooth_gate(const SurrogateSpec& spec, double u) {
  const double d = u - spec.v_th;
  const double a = spec.a;
  switch (spec.kind) {
    case SurrogateKind::Rectangular:
      return std::clamp(d / a + 0.5, 0.0, 1.0);
    case SurrogateKind::Triangular: {
      const double root = std::sqrt(a);
      const double c = 2.0 / root;
      const double s = std::min(std::abs(d), c);
      // Mass of the triangle on [-c, -s].
      const double left = 0.5 * root * (c - s) + 0.125 * a * (s * s - c * c);
      return d < 0.0 ? left : 1.0 - left;
    }
    case SurrogateKind::Sigmoid: {
      const double z = d / a;
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      const double e = std::exp(z);
      return e / (1.0 + e);
    }
    case SurrogateKind::Gaussian:
      return 0.5 * (1.0 + std::erf(d / std::sqrt(2.0 * a)));
  }
  return 0.0;
}

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 5> kNodes = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                          0.9061798459386640};
constexpr std::array<double, 5> kWeights = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                            0.2369268850561891, 0.2369268850561891};

double gauss_panel(const SurrogateSpec& spec, double lo, double hi) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (std::size_t k = 0; k < kNodes.size(); ++k) sum += kWeights[k] * surrogate_value(spec, mid + half * kNodes[k]);
  return half * sum;
}

}  // namespace

double surrogate_integral(const SurrogateSpec& spec, double lo, double hi, int n) {
  if (!(lo < hi)) throw ConfigError("surrogate_integral: need lo < hi");
  if (n < 1000) throw ConfigError("surrogate_integral: grid size must be >= 1000");

  std::vector<double> cuts{lo, hi};
  double half_support = 0.0;
  if (spec.kind == SurrogateKind::Rectangular) half_support = 0.5 * spec.a;
  if (spec.kind == SurrogateKind::Triangular) half_support = 2.0 / std::sqrt(spec.a);
  if (half_support > 0.0) {
    for (double c : {spec.v_th - half_support, spec.v_th, spec.v_th + half_support}) {
      if (c > lo && c < hi) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());

  // Distribute panels proportionally to piece length, at least one each.
  const double span = hi - lo;
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p];
    const double b = cuts[p + 1];
    const int panels = std::max(1, static_cast<int>(std::lround(n * (b - a) / span)));
    const double h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) total += gauss_panel(spec, a + k * h, a + (k + 1) * h);
  }
  return total;
}

}  // namespace stbp
