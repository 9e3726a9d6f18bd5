#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stbp/engine.hpp"
#include "stbp/topology.hpp"

namespace stbp {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// p <- p - lr * g
void sgd_update(std::span<double> params, std::span<const double> grads, double lr);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam step for a single tensor. `step` is the 1-based
/// index of this update.
void adam_update(const OptimizerConfig& config, std::uint64_t step, AdamMoments& moments, std::span<double> params,
                 std::span<const double> grads);

/// Optimizer state for a whole network; moments are laid out like GradientSet.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const Network& net);

  void apply(Network& net, const GradientSet& grads);

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return step_; }

 private:
  OptimizerConfig config_;
  std::uint64_t step_ = 0;
  std::vector<AdamMoments> w_moments_;
  std::vector<AdamMoments> b_moments_;
};

}  // namespace stbp
