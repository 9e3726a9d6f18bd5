#include "stbp/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "stbp/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stbp {

namespace {

int resolve_workers(int workers) {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

ForwardOptions forward_options(const StepConfig& config) {
  ForwardOptions f;
  f.gate = config.mode == BackpropMode::SmoothOracle ? GateMode::Smooth : GateMode::Hard;
  f.surrogate = config.surrogate;
  f.backend = config.backend;
  return f;
}

BackwardOptions backward_options(const StepConfig& config, std::size_t batch_size) {
  BackwardOptions b;
  b.mode = config.mode;
  b.surrogate = config.surrogate;
  b.batch_size = batch_size;
  b.backend = config.backend;
  return b;
}

bool params_finite(const Network& net) {
  const auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer); d && !(finite(d->w) && finite(d->b))) return false;
    if (const auto* c = std::get_if<ConvLayer>(&layer); c && !(finite(c->w) && finite(c->b))) return false;
  }
  return true;
}

}  // namespace

BatchEngine::BatchEngine(const Network& net) : slices_(kReductionSlices) {
  for (auto& s : slices_) s.grads = GradientSet::zeros_like(net);
}

BatchResult BatchEngine::accumulate(const Network& net, std::span<const std::size_t> labels,
                                    const SampleEncoder& encode, const StepConfig& config, GradientSet& grads) {
  const std::size_t batch = labels.size();
  if (batch == 0) throw ShapeError("empty batch");
  const std::size_t n_slices = std::min(kReductionSlices, batch);
  const ForwardOptions fwd = forward_options(config);
  const BackwardOptions bwd = backward_options(config, batch);
  const int workers = resolve_workers(config.workers);

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::size_t s = 0; s < n_slices; ++s) {
    Slice& slice = slices_[s];
    slice.grads.set_zero();
    slice.loss = 0.0;
    slice.correct = 0;
    slice.error = nullptr;
    try {
      const std::size_t begin = s * batch / n_slices;
      const std::size_t end = (s + 1) * batch / n_slices;
      for (std::size_t k = begin; k < end; ++k) {
        forward_unroll(net, encode(k), fwd, slice.trace);
        const auto rates = slice.trace.output().mean_rate();
        slice.loss += sample_loss(rates, labels[k], batch);
        if (argmax_rate(rates) == labels[k]) ++slice.correct;
        backward(slice.trace, labels[k], net, bwd, slice.grads);
      }
    } catch (...) {
      slice.error = std::current_exception();
    }
  }

  BatchResult result;
  result.count = batch;
  grads = GradientSet::zeros_like(net);
  for (std::size_t s = 0; s < n_slices; ++s) {
    if (slices_[s].error) std::rethrow_exception(slices_[s].error);
    grads.add(slices_[s].grads);
    result.loss += slices_[s].loss;
    result.correct += slices_[s].correct;
  }
  return result;
}

BatchResult reference_batch_gradients(const Network& net, std::span<const std::size_t> labels,
                                      const SampleEncoder& encode, const StepConfig& config, GradientSet& grads) {
  const std::size_t batch = labels.size();
  if (batch == 0) throw ShapeError("empty batch");
  const ForwardOptions fwd = forward_options(config);
  const BackwardOptions bwd = backward_options(config, batch);
  BatchResult result;
  result.count = batch;
  grads = GradientSet::zeros_like(net);
  for (std::size_t k = 0; k < batch; ++k) {
    const Trace trace = forward_unroll(net, encode(k), fwd);
    const auto rates = trace.output().mean_rate();
    result.loss += sample_loss(rates, labels[k], batch);
    if (argmax_rate(rates) == labels[k]) ++result.correct;
    backward(trace, labels[k], net, bwd, grads);
  }
  return result;
}

BatchResult train_step(Network& net, Optimizer& optimizer, BatchEngine& engine, std::span<const std::size_t> labels,
                       const SampleEncoder& encode, const StepConfig& config) {
  GradientSet grads = GradientSet::zeros_like(net);
  const BatchResult r = engine.accumulate(net, labels, encode, config, grads);
  check_finite(grads);
  // Kept so an update that overflows leaves the network as it was.
  const Network before = net;
  optimizer.apply(net, grads);
  if (!params_finite(net)) {
    net = before;
    throw NumericalError("parameter update overflowed to a non-finite value");
  }
  return r;
}

std::size_t count_correct(const Network& net, std::span<const std::size_t> labels, const SampleEncoder& encode,
                          int workers, GateMode gate, const SurrogateSpec& surrogate) {
  ForwardOptions fwd;
  fwd.gate = gate;
  fwd.surrogate = surrogate;
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
  std::size_t correct = 0;
  std::exception_ptr error;
#pragma omp parallel num_threads(resolve_workers(workers))
  {
    Trace trace;
#pragma omp for schedule(dynamic, 16) reduction(+ : correct)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        forward_unroll(net, encode(static_cast<std::size_t>(i)), fwd, trace);
        if (predict(trace) == labels[static_cast<std::size_t>(i)]) ++correct;
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return correct;
}

}  // namespace stbp
