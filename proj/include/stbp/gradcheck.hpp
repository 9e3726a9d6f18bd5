#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stbp/engine.hpp"

namespace stbp {

/// (f(x + h) - f(x - h)) / 2h
double central_difference(const std::function<double(double)>& f, double x, double h);

/// |a - f| / max(|a|, |f|, 1e-8)
double relative_error(double analytic, double numeric);

/// Batch loss of `net` over `inputs` with the smooth forward.
double smooth_loss(const Network& net, std::span<const SpikeTensor> inputs, std::span<const std::size_t> labels,
                   const SurrogateSpec& surrogate);

/// Central differences of smooth_loss with respect to every weight and bias.
GradientSet finite_diff_grad(const Network& net, std::span<const SpikeTensor> inputs,
                             std::span<const std::size_t> labels, const SurrogateSpec& surrogate, double h);

/// Backward-pass gradient summed over the batch, traces taken with the
/// forward gate that matches `options.mode`.
GradientSet analytic_grad(const Network& net, std::span<const SpikeTensor> inputs,
                          std::span<const std::size_t> labels, const BackwardOptions& options);

/// Everything needed to rebuild one check exactly. Serializes to a single
/// "key=value ..." line that the CLI accepts back through --replay.
struct GradCheckConfig {
  std::string architecture = "6-8-4";
  std::size_t steps = 5;
  SurrogateKind kind = SurrogateKind::Gaussian;
  double a = 1.0;
  double v_th = 0.5;
  double tau = 0.3;
  std::uint64_t seed = 1;       // weights and biases
  std::uint64_t data_seed = 1;  // inputs and labels
  std::size_t batch = 2;
  double h = 1e-4;
  double threshold = 1e-4;
  double forget_derivative_scale = 1.0;

  std::string to_string() const;
  static GradCheckConfig parse(std::string_view line);
};

struct ParamCheck {
  std::size_t layer = 0;
  bool bias = false;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  GradCheckConfig config;
  std::size_t checked = 0;
  ParamCheck worst;
  // Closest any pre-activation came to a point where the surrogate is not
  // smooth; central differences are unreliable within about h of one.
  double kink_distance = 0.0;
  bool pass = false;

  std::string to_text() const;
};

struct GradCheckProblem {
  Network net;
  std::vector<SpikeTensor> inputs;
  std::vector<std::size_t> labels;
};

/// Builds the network, parameters and inputs described by `config`.
GradCheckProblem make_problem(const GradCheckConfig& config);

GradCheckReport check_gradients(const GradCheckConfig& config);

/// Samples `trials` random small problems (dense and conv, all surrogate
/// kinds, up to three hidden layers of width <= 10, T in {1, 2, 5, 6}).
/// Data seeds that put a potential within `margin` of a surrogate kink are
/// redrawn.
std::vector<GradCheckConfig> sample_configs(std::size_t trials, std::uint64_t seed, double margin = 2e-3);

}  // namespace stbp
