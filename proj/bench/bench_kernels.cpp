// Sparse-aware kernels and the OpenMP batch engine against the serial
// reference code they replace.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "stbp/kernels.hpp"
#include "stbp/topology.hpp"
#include "stbp/trainer.hpp"

using namespace stbp;
using namespace stbp::kernels;

namespace {

std::vector<double> values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Binary frame with the given firing probability.
std::vector<double> spikes(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution d(p);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng) ? 1.0 : 0.0;
  return v;
}

template <bool Fast>
void dense_forward_bench(benchmark::State& state) {
  const DenseGeometry g{784, 400};
  const auto w = values(g.in * g.out, 1);
  const auto in = spikes(g.in, state.range(0) / 100.0, 2);
  std::vector<double> x(g.out);
  for (auto _ : state) {
    if constexpr (Fast) dense_forward(g, w, in, x);
    else reference::dense_forward(g, w, in, x);
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Fast>
void dense_weight_grad_bench(benchmark::State& state) {
  const DenseGeometry g{784, 400};
  const auto in = spikes(g.in, state.range(0) / 100.0, 3);
  // Surrogate-gated errors: most entries are exactly zero.
  auto du = values(g.out, 4);
  const auto gate = spikes(g.out, 0.2, 5);
  for (std::size_t i = 0; i < du.size(); ++i) du[i] *= gate[i];
  std::vector<double> dw(g.in * g.out);
  for (auto _ : state) {
    if constexpr (Fast) dense_weight_grad(g, du, in, dw);
    else reference::dense_weight_grad(g, du, in, dw);
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Fast>
void conv_forward_bench(benchmark::State& state) {
  const ConvGeometry g{{28, 28, 1}, 15, 5, 5, 1};
  const auto w = values(g.weight_count(), 6);
  const auto in = spikes(g.in.size(), state.range(0) / 100.0, 7);
  std::vector<double> x(g.out().size());
  for (auto _ : state) {
    if constexpr (Fast) conv_forward(g, w, in, x);
    else reference::conv_forward(g, w, in, x);
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Fast>
void conv_weight_grad_bench(benchmark::State& state) {
  const ConvGeometry g{{12, 12, 15}, 40, 5, 5, 1};
  const auto in = values(g.in.size(), 8);
  auto du = values(g.out().size(), 9);
  const auto gate = spikes(du.size(), 0.2, 10);
  for (std::size_t i = 0; i < du.size(); ++i) du[i] *= gate[i];
  std::vector<double> dw(g.weight_count()), db(g.out_channels);
  for (auto _ : state) {
    if constexpr (Fast) conv_weight_grad(g, du, in, dw, db);
    else reference::conv_weight_grad(g, du, in, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
}

struct BatchFixture {
  Network net;
  std::vector<SpikeTensor> inputs;
  std::vector<std::size_t> labels;

  BatchFixture() {
    NetworkOptions o;
    o.lif = {0.1, 1.5};
    o.time_steps = 15;
    net = build_network("784-400-10", o);
    init_params(net, 1, 3.0);
    for (std::size_t k = 0; k < 100; ++k) {
      SpikeTensor t(15, net.input_shape);
      t.data = spikes(t.data.size(), 0.15, 100 + k);
      inputs.push_back(std::move(t));
      labels.push_back(k % 10);
    }
  }
};

// One training batch of 100 samples: the OpenMP engine with `range(0)`
// workers against the plain serial loop on the reference kernels.
void batch_parallel(benchmark::State& state) {
  static const BatchFixture f;
  BatchEngine engine(f.net);
  GradientSet grads;
  StepConfig config;
  config.workers = static_cast<int>(state.range(0));
  const SampleEncoder encode = [&](std::size_t k) { return f.inputs[k]; };
  for (auto _ : state) benchmark::DoNotOptimize(engine.accumulate(f.net, f.labels, encode, config, grads).loss);
}

void batch_serial_reference(benchmark::State& state) {
  static const BatchFixture f;
  GradientSet grads;
  StepConfig config;
  config.backend = Backend::Reference;
  const SampleEncoder encode = [&](std::size_t k) { return f.inputs[k]; };
  for (auto _ : state) benchmark::DoNotOptimize(reference_batch_gradients(f.net, f.labels, encode, config, grads).loss);
}

}  // namespace

// Argument: input firing probability in percent.
BENCHMARK(dense_forward_bench<true>)->Arg(5)->Arg(20)->Arg(60);
BENCHMARK(dense_forward_bench<false>)->Arg(5)->Arg(20)->Arg(60);
BENCHMARK(dense_weight_grad_bench<true>)->Arg(5)->Arg(20);
BENCHMARK(dense_weight_grad_bench<false>)->Arg(5)->Arg(20);
BENCHMARK(conv_forward_bench<true>)->Arg(5)->Arg(20);
BENCHMARK(conv_forward_bench<false>)->Arg(5)->Arg(20);
BENCHMARK(conv_weight_grad_bench<true>);
BENCHMARK(conv_weight_grad_bench<false>);
BENCHMARK(batch_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(batch_serial_reference)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
