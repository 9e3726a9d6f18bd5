#include <gtest/gtest.h>

#include <random>

#include "stbp/encode.hpp"
#include "stbp/trainer.hpp"

using namespace stbp;

namespace {

struct Fixture {
  Network net;
  std::vector<SpikeTensor> inputs;
  std::vector<std::size_t> labels;
};

Fixture make_fixture(const std::string& arch, std::size_t batch, std::uint64_t seed) {
  NetworkOptions opt;
  opt.lif = {0.5, 0.3};
  opt.time_steps = 4;
  Fixture f{build_network(arch, opt), {}, {}};
  init_params(f.net, seed, 2.0);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < batch; ++k) {
    SpikeTensor in(4, f.net.input_shape);
    for (auto& v : in.data) v = static_cast<double>(rng() % 2);
    f.inputs.push_back(in);
    f.labels.push_back(rng() % f.net.num_classes());
  }
  return f;
}

SampleEncoder encoder(const Fixture& f) {
  return [&f](std::size_t k) { return f.inputs[k]; };
}

}  // namespace

TEST(BatchEngine, BitIdenticalAcrossWorkerCounts) {
  for (const char* arch : {"12-9-5", "6x6x2-3C3-P2-4"}) {
    const auto f = make_fixture(arch, 23, 7);
    BatchEngine engine(f.net);
    GradientSet first;
    BatchResult first_result;
    for (int workers : {1, 2, 4, 3}) {
      GradientSet grads;
      const auto r = engine.accumulate(f.net, f.labels, encoder(f), {{}, BackpropMode::Stbp, workers}, grads);
      if (workers == 1) {
        first = grads;
        first_result = r;
        continue;
      }
      EXPECT_EQ(r.loss, first_result.loss);
      EXPECT_EQ(r.correct, first_result.correct);
      for (std::size_t l = 0; l < grads.layers.size(); ++l) {
        EXPECT_EQ(grads.layers[l].w, first.layers[l].w) << arch << " workers " << workers;
        EXPECT_EQ(grads.layers[l].b, first.layers[l].b);
      }
    }
  }
}

TEST(BatchEngine, MatchesSerialReference) {
  const auto f = make_fixture("12-9-5", 17, 3);
  BatchEngine engine(f.net);
  GradientSet fast, ref;
  StepConfig config;
  const auto a = engine.accumulate(f.net, f.labels, encoder(f), config, fast);
  config.backend = kernels::Backend::Reference;
  const auto b = reference_batch_gradients(f.net, f.labels, encoder(f), config, ref);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  EXPECT_EQ(a.correct, b.correct);
  EXPECT_EQ(a.count, 17u);
  double scale = std::max(1.0, ref.max_abs());
  for (std::size_t l = 0; l < ref.layers.size(); ++l)
    for (std::size_t i = 0; i < ref.layers[l].w.size(); ++i)
      EXPECT_NEAR(fast.layers[l].w[i], ref.layers[l].w[i], 1e-12 * scale);
}

TEST(BatchEngine, ReusedEngineOverwritesGradients) {
  const auto f = make_fixture("12-9-5", 9, 4);
  BatchEngine engine(f.net);
  GradientSet a, b;
  engine.accumulate(f.net, f.labels, encoder(f), {}, a);
  b = a;
  engine.accumulate(f.net, f.labels, encoder(f), {}, b);
  for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].w, b.layers[l].w);
}

TEST(BatchEngine, EncoderErrorsPropagate) {
  const auto f = make_fixture("12-9-5", 9, 4);
  BatchEngine engine(f.net);
  GradientSet g;
  const SampleEncoder bad = [&](std::size_t k) -> SpikeTensor {
    if (k == 5) throw std::runtime_error("bad sample");
    return f.inputs[k];
  };
  EXPECT_THROW(engine.accumulate(f.net, f.labels, bad, {}, g), std::runtime_error);
}

TEST(TrainStep, LowersBatchLoss) {
  auto f = make_fixture("12-9-5", 16, 8);
  Optimizer opt({OptimizerKind::Sgd, 0.5}, f.net);
  BatchEngine engine(f.net);
  const double before = train_step(f.net, opt, engine, f.labels, encoder(f), {}).loss;
  double after = before;
  for (int i = 0; i < 30; ++i) after = train_step(f.net, opt, engine, f.labels, encoder(f), {}).loss;
  EXPECT_LT(after, before);
  EXPECT_EQ(opt.steps(), 31u);
}

TEST(CountCorrect, MatchesSerialPredictions) {
  const auto f = make_fixture("12-9-5", 31, 6);
  std::size_t expected = 0;
  for (std::size_t k = 0; k < f.inputs.size(); ++k) expected += predict(forward_unroll(f.net, f.inputs[k])) == f.labels[k];
  for (int workers : {1, 3}) EXPECT_EQ(count_correct(f.net, f.labels, encoder(f), workers), expected);
}
