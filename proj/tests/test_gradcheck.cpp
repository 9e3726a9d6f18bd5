#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "stbp/error.hpp"
#include "stbp/gradcheck.hpp"

using namespace stbp;

TEST(CentralDifference, QuadraticExample) {
  const double d = central_difference([](double w) { return w * w; }, 3.0, 1e-4);
  EXPECT_NEAR(d, 6.0, 1e-7);
}

TEST(RelativeError, FloorsTheDenominator) {
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_NEAR(relative_error(1e-12, 0.0), 1e-4, 1e-18);
}

TEST(GradCheck, ZeroInputGivesMatchingGradients) {
  GradCheckConfig config;
  auto problem = make_problem(config);
  for (auto& in : problem.inputs) std::fill(in.data.begin(), in.data.end(), 0.0);
  const SurrogateSpec s{config.kind, config.a};
  BackwardOptions opt;
  opt.mode = BackpropMode::SmoothOracle;
  opt.surrogate = s;
  opt.batch_size = problem.inputs.size();
  const auto numeric = finite_diff_grad(problem.net, problem.inputs, problem.labels, s, 1e-4);
  const auto analytic = analytic_grad(problem.net, problem.inputs, problem.labels, opt);
  const auto& first = std::get<DenseLayer>(problem.net.layers[0]);
  for (std::size_t l = 0; l < analytic.layers.size(); ++l) {
    for (std::size_t i = 0; i < analytic.layers[l].w.size(); ++i) {
      const double a = analytic.layers[l].w[i], n = numeric.layers[l].w[i];
      EXPECT_LE(relative_error(a, n), 1e-4) << "layer " << l << " w " << i;
      if (l == 0) EXPECT_EQ(a, 0.0);  // no presynaptic activity
    }
  }
  EXPECT_EQ(first.w.size(), 48u);
}

TEST(GradCheck, SigmoidMlpPasses) {
  GradCheckConfig config;
  config.kind = SurrogateKind::Sigmoid;
  const auto report = check_gradients(config);
  EXPECT_TRUE(report.pass) << report.to_text();
  EXPECT_EQ(report.checked, 6u * 8 + 8 + 8 * 4 + 4);
}

TEST(GradCheck, SingleStepPassesForBothModes) {
  GradCheckConfig config;
  config.steps = 1;
  EXPECT_TRUE(check_gradients(config).pass);
  // With one step there is no temporal path, so the spatial-only backward
  // over the same smooth forward is exact as well.
  auto problem = make_problem(config);
  const SurrogateSpec s{config.kind, config.a};
  ForwardOptions fwd;
  fwd.gate = GateMode::Smooth;
  fwd.surrogate = s;
  BackwardOptions full{BackpropMode::SmoothOracle, s, problem.inputs.size()};
  BackwardOptions spatial = full;
  spatial.mode = BackpropMode::Sdbp;
  const auto numeric = finite_diff_grad(problem.net, problem.inputs, problem.labels, s, config.h);
  auto a = GradientSet::zeros_like(problem.net), b = a;
  for (std::size_t k = 0; k < problem.inputs.size(); ++k) {
    const Trace trace = forward_unroll(problem.net, problem.inputs[k], fwd);
    backward(trace, problem.labels[k], problem.net, full, a);
    backward(trace, problem.labels[k], problem.net, spatial, b);
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_EQ(a.layers[l].w, b.layers[l].w);
    for (std::size_t i = 0; i < a.layers[l].w.size(); ++i)
      EXPECT_LE(relative_error(b.layers[l].w[i], numeric.layers[l].w[i]), config.threshold);
  }
}

TEST(GradCheck, ConvolutionPasses) {
  GradCheckConfig config;
  config.architecture = "6x6x1-3C3-4";
  config.steps = 3;
  const auto report = check_gradients(config);
  EXPECT_TRUE(report.pass) << report.to_text();
}

// Flipping the sign of the reset term of the temporal path must be caught
// whenever that term is active. Surrogates with unbounded support keep it
// active in every multi-step problem.
TEST(GradCheck, SignFlipMutantFails) {
  std::size_t checked = 0;
  for (const auto& base : sample_configs(16, 11)) {
    auto config = base;
    if (config.steps < 2 || config.kind == SurrogateKind::Rectangular || config.kind == SurrogateKind::Triangular)
      continue;
    config.forget_derivative_scale = -1.0;
    const auto report = check_gradients(config);
    EXPECT_FALSE(report.pass) << config.to_string();
    EXPECT_GT(report.worst.rel_error, 1e-2);
    ++checked;
  }
  EXPECT_GE(checked, 3u);
  GradCheckConfig fixed;
  fixed.forget_derivative_scale = -1.0;
  EXPECT_GT(check_gradients(fixed).worst.rel_error, 1e-2);
}

TEST(GradCheck, ReplayLineRoundTrips) {
  for (const auto& config : sample_configs(12, 5)) {
    const auto back = GradCheckConfig::parse(config.to_string());
    EXPECT_EQ(back.to_string(), config.to_string());
    EXPECT_EQ(check_gradients(back).worst.rel_error, check_gradients(config).worst.rel_error);
  }
  EXPECT_THROW(GradCheckConfig::parse("arch=6-8-4 bogus=1"), ConfigError);
}

TEST(GradCheck, SampledConfigsCoverTheSpace) {
  const auto configs = sample_configs(24, 2);
  std::set<SurrogateKind> kinds;
  std::set<std::size_t> steps;
  bool conv = false;
  for (const auto& c : configs) {
    kinds.insert(c.kind);
    steps.insert(c.steps);
    conv = conv || c.architecture.find('C') != std::string::npos;
    EXPECT_GT(check_gradients(c).kink_distance, 2e-3);
  }
  EXPECT_EQ(kinds.size(), 4u);
  EXPECT_EQ(steps, (std::set<std::size_t>{1, 2, 5, 6}));
  EXPECT_TRUE(conv);
}
