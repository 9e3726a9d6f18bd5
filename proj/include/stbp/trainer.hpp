#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

#include "stbp/engine.hpp"
#include "stbp/optim.hpp"
#include "stbp/topology.hpp"

namespace stbp {

/// Produces the input spikes of the k-th sample of a batch.
using SampleEncoder = std::function<SpikeTensor(std::size_t k)>;

struct StepConfig {
  SurrogateSpec surrogate;
  BackpropMode mode = BackpropMode::Stbp;
  int workers = 0;  // 0: OpenMP default
  kernels::Backend backend = kernels::Backend::Fast;
};

struct BatchResult {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

/// A batch is split into this many contiguous slices, each accumulated in
/// sample order into its own buffer; the slices are then summed in order.
/// The slicing depends only on the batch size, never on the thread count,
/// so results are bit-identical for any number of workers.
inline constexpr std::size_t kReductionSlices = 8;

/// Forward + backward over a batch with OpenMP workers. Owns the per-slice
/// buffers so repeated calls do not reallocate.
class BatchEngine {
 public:
  explicit BatchEngine(const Network& net);

  /// Overwrites `grads` with the batch gradient (already carrying the 1/S
  /// of the loss) and returns batch loss and accuracy.
  BatchResult accumulate(const Network& net, std::span<const std::size_t> labels, const SampleEncoder& encode,
                         const StepConfig& config, GradientSet& grads);

 private:
  struct Slice {
    GradientSet grads;
    Trace trace;
    double loss = 0.0;
    std::size_t correct = 0;
    std::exception_ptr error;
  };
  std::vector<Slice> slices_;
};

/// Plain serial loop over samples into a single accumulator; the
/// reference the parallel engine is tested and benchmarked against.
BatchResult reference_batch_gradients(const Network& net, std::span<const std::size_t> labels,
                                      const SampleEncoder& encode, const StepConfig& config, GradientSet& grads);

/// One optimizer update from one batch. Throws NumericalError, leaving the
/// parameters as they were, if the gradient or the updated parameters are
/// not finite.
BatchResult train_step(Network& net, Optimizer& optimizer, BatchEngine& engine, std::span<const std::size_t> labels,
                       const SampleEncoder& encode, const StepConfig& config);

/// Number of correctly classified samples among `labels.size()` encoded
/// inputs, evaluated in parallel.
std::size_t count_correct(const Network& net, std::span<const std::size_t> labels, const SampleEncoder& encode,
                          int workers = 0, GateMode gate = GateMode::Hard, const SurrogateSpec& surrogate = {});

}  // namespace stbp
