#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "stbp/error.hpp"
#include "stbp/lif.hpp"

using namespace stbp;

TEST(ForgetGate, SilentNeuronKeepsTau) {
  EXPECT_DOUBLE_EQ(forget_gate(0.0, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(forget_gate(0.0, 0.2), 0.2);
}

TEST(ForgetGate, SpikeNearlyClearsPotential) {
  // 0.1 * e^-10 = 4.5399929762484854e-06
  EXPECT_NEAR(forget_gate(1.0, 0.1), 4.5399929762484854e-06, 1e-18);
}

TEST(ForgetGate, DerivativeMatchesCentralDifference) {
  for (double tau : {0.1, 0.15, 0.2, 0.5}) {
    for (double o : {0.0, 0.3, 1.0}) {
      const double h = 1e-6;
      const double fd = (forget_gate(o + h, tau) - forget_gate(o - h, tau)) / (2 * h);
      EXPECT_NEAR(forget_gate_derivative(o, tau), fd, 1e-8 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(SpikeGate, FiresAtAndAboveThreshold) {
  EXPECT_EQ(spike_gate(2.0, 1.5), 1.0);
  EXPECT_EQ(spike_gate(1.5, 1.5), 1.0);
  EXPECT_EQ(spike_gate(0.0, 1.5), 0.0);
}

TEST(LifStep, DecaysWithoutSpike) {
  PotentialState s{{1.0}, {0.0}};
  const std::vector<double> x{0.5}, b{0.0};
  const auto o = lif_step(s, x, b, LifParams{0.1, 1.5, 1.0});
  EXPECT_NEAR(s.u[0], 0.6, 1e-15);
  EXPECT_EQ(o[0], 0.0);
}

TEST(LifStep, SpikeResetsThroughForgetGate) {
  PotentialState s{{1.2}, {1.0}};
  const std::vector<double> x{0.4}, b{0.0};
  const auto o = lif_step(s, x, b, LifParams{0.1, 1.5, 1.0});
  EXPECT_NEAR(s.u[0], 1.2 * 0.1 * std::exp(-10.0) + 0.4, 1e-15);
  EXPECT_NEAR(s.u[0], 0.400005, 1e-6);
  EXPECT_EQ(o[0], 0.0);
}

TEST(LifStep, InputAloneCrossesThreshold) {
  PotentialState s = PotentialState::zeros(1);
  const std::vector<double> x{2.0}, b{0.0};
  const auto o = lif_step(s, x, b, LifParams{0.1, 1.5, 1.0});
  EXPECT_EQ(s.u[0], 2.0);
  EXPECT_EQ(o[0], 1.0);
  EXPECT_EQ(s.o_prev[0], 1.0);
}

TEST(LifStep, StartsFromRest) {
  const auto s = PotentialState::zeros(4);
  for (double u : s.u) EXPECT_EQ(u, 0.0);
  for (double o : s.o_prev) EXPECT_EQ(o, 0.0);
}

TEST(LifStep, RejectsMismatchedSizes) {
  PotentialState s = PotentialState::zeros(2);
  const std::vector<double> x{1.0}, b{0.0, 0.0};
  EXPECT_THROW(lif_step(s, x, b, LifParams{}), ShapeError);
}

TEST(LifParams, Validation) {
  EXPECT_NO_THROW((LifParams{0.1, 1.5, 1.0}.validate()));
  EXPECT_THROW((LifParams{0.0, 1.5, 1.0}.validate()), ConfigError);
  EXPECT_THROW((LifParams{0.1, -1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((LifParams{0.1, 1.5, NAN}.validate()), ConfigError);
}

// Scalar recursion written out independently of lif_step.
TEST(LifStepProperty, AgreesWithScalarRecursionAndEmitsBinarySpikes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cur(-1.0, 3.0), tau_d(0.05, 0.9), vth_d(0.1, 2.5);
  for (int trial = 0; trial < 200; ++trial) {
    const LifParams p{tau_d(rng), vth_d(rng), 1.0};
    const std::size_t n = 5;
    PotentialState s = PotentialState::zeros(n);
    std::vector<double> u(n, 0.0), o(n, 0.0), b(n);
    for (auto& v : b) v = cur(rng) * 0.1;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(n);
      for (auto& v : x) v = cur(rng);
      const auto spikes = lif_step(s, x, b, p);
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = u[i] * p.tau * std::exp(-o[i] / p.tau) + x[i] + b[i];
        ASSERT_NEAR(s.u[i], u[i], 1e-12 * std::max(1.0, std::abs(u[i])));
        // Follow the unit under test across the threshold so rounding in
        // the last bit cannot make the two recursions diverge.
        o[i] = spikes[i];
        if (std::abs(u[i] - p.v_th) > 1e-9) ASSERT_EQ(spikes[i], u[i] >= p.v_th ? 1.0 : 0.0);
        u[i] = s.u[i];
        ASSERT_TRUE(spikes[i] == 0.0 || spikes[i] == 1.0);
        ASSERT_TRUE(std::isfinite(s.u[i]));
      }
    }
  }
}
