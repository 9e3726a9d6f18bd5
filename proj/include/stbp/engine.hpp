#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stbp/surrogate.hpp"
#include "stbp/topology.hpp"

namespace stbp {

/// STBP propagates errors along layers and through time; SDBP keeps only
/// the within-step spatial path. SmoothOracle is STBP over a trace produced
/// with GateMode::Smooth, using the exact derivative of the smooth gate.
enum class BackpropMode { Stbp, Sdbp, SmoothOracle };

BackpropMode parse_backprop_mode(std::string_view name);
std::string to_string(BackpropMode mode);

struct ParamGrad {
  std::vector<double> w;
  std::vector<double> b;
};

/// dL/dW and dL/db for every layer, shaped like the parameters (empty for pools).
struct GradientSet {
  std::vector<ParamGrad> layers;

  static GradientSet zeros_like(const Network& net);
  void set_zero();
  void add(const GradientSet& other);
  double max_abs() const;
};

/// dL/do and dL/du for every layer and step (steps * layer size).
struct BackwardState {
  std::vector<std::vector<double>> delta_o;
  std::vector<std::vector<double>> delta_u;
};

struct BackwardOptions {
  BackpropMode mode = BackpropMode::Stbp;
  SurrogateSpec surrogate;  // kind and width; centered on each layer's v_th
  std::size_t batch_size = 1;  // S in the 1/S of the loss
  kernels::Backend backend = kernels::Backend::Fast;
  // Multiplies the dF/do term of the temporal path. Only the gradient-check
  // mutation tests set this to anything other than 1.
  double forget_derivative_scale = 1.0;
};

/// L = 1/(2S) sum_s || y_s - rate_s ||^2 with one-hot targets.
double loss(std::span<const SpikeTensor> outputs, std::span<const std::size_t> labels);
/// Contribution of a single sample to the batch loss.
double sample_loss(std::span<const double> rates, std::size_t label, std::size_t batch_size);

std::vector<double> one_hot(std::size_t label, std::size_t classes);

/// -(1 / (T S)) (y - rate): dL/do at each output step.
std::vector<double> output_direct_grad(std::span<const double> rates, std::span<const double> target, std::size_t steps,
                                       std::size_t batch_size);

/// Reverse-mode pass over one sample's trace. Gradients are added to
/// `grads`; per-step deltas are stored in `state` when it is non-null.
/// Throws NumericalError naming the layer and step of the first non-finite
/// delta.
void backward(const Trace& trace, std::size_t label, const Network& net, const BackwardOptions& options,
              GradientSet& grads, BackwardState* state = nullptr);

struct BackwardResult {
  BackwardState state;
  GradientSet grads;
};
BackwardResult backward(const Trace& trace, std::size_t label, const Network& net, const BackwardOptions& options);

/// Throws NumericalError if any gradient entry is NaN/Inf.
void check_finite(const GradientSet& grads);

}  // namespace stbp
