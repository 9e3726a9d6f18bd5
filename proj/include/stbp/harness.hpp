#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stbp/config.hpp"
#include "stbp/datasets.hpp"
#include "stbp/gradcheck.hpp"
#include "stbp/topology.hpp"

namespace stbp {

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double seconds = 0.0;  // goes to timing.csv only
};

struct TrainSummary {
  double final_test_accuracy = 0.0;
  double best_test_accuracy = 0.0;
  std::size_t best_epoch = 0;
  // Over the last min(10, epochs) epochs.
  double trailing_mean = 0.0;
  double trailing_min = 0.0;
  double trailing_max = 0.0;
};

TrainSummary summarize(const std::vector<MetricsRow>& rows);

struct TrainResult {
  std::vector<MetricsRow> rows;
  TrainSummary summary;
  Network network;
  std::filesystem::path dir;
};

/// Builds the configured network with initialized parameters.
Network make_network(const RunConfig& config);

/// Encodes sample `i` of `data` for `net`, reshaping to the network's input
/// shape when only the layout differs (e.g. 28x28x1 images into "784").
SpikeTensor encode_for(const Network& net, const Dataset& data, std::size_t i, std::uint64_t seed);

/// Seed of the test-set encoding; fixed per run seed so eval reproduces it.
std::uint64_t test_encode_seed(std::uint64_t run_seed, std::size_t index);

/// Test accuracy; an empty split raises FormatError.
double evaluate(const Network& net, const Dataset& data, std::uint64_t run_seed, int workers = 0);

/// Trains per `config`, writing into config.output_dir:
///   metrics.csv      epoch,train_loss,train_accuracy,test_accuracy
///   summary.csv      final/best/trailing-window test accuracy
///   timing.csv       wall-clock seconds per epoch (kept apart so metrics
///                    stay byte-identical between runs)
///   config.txt       resolved configuration
///   checkpoint_final.txt, checkpoint_best.txt
/// On a non-finite gradient the parameters from before the failing step are
/// saved as failed_state.txt and the NumericalError is rethrown.
TrainResult cmd_train(const RunConfig& config, std::ostream* log = nullptr);

/// Test accuracy of a saved checkpoint on the configured test split.
double cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& config);

struct SweepEntry {
  SurrogateKind kind;
  double a;
  TrainSummary summary;
  std::vector<MetricsRow> rows;
  std::string error;  // non-empty if this cell failed
};

/// One training run per (kind, a), each in its own subdirectory. Writes
/// <output.dir>/sweep.csv (one summary row per cell) and sweep_curves.csv
/// (test accuracy per epoch per cell). A failing cell is recorded and the
/// sweep moves on.
std::vector<SweepEntry> cmd_sweep_surrogate(const RunConfig& config, const std::vector<SurrogateKind>& kinds,
                                            const std::vector<double>& widths, std::ostream* log = nullptr);

struct AblationResult {
  TrainResult stbp;
  TrainResult sdbp;
};

/// Paired STBP / SDBP runs from identical seeds. Writes ablation.csv
/// (summary per mode) and ablation_curves.csv (both test accuracies per
/// epoch) into output.dir.
AblationResult cmd_ablate_td(const RunConfig& config, std::ostream* log = nullptr);

struct Raster {
  std::size_t sample = 0;
  std::size_t label = 0;
  std::size_t layer = 0;
  std::size_t steps = 0;
  std::size_t neurons = 0;
  std::vector<std::pair<std::size_t, std::size_t>> spikes;  // (neuron, step)
  std::vector<std::size_t> counts;                          // per neuron

  std::string to_text(const std::string& config_hash) const;
};

/// Spike raster of one test sample. `layer` defaults to the output layer;
/// an out-of-range id raises ConfigError.
Raster cmd_raster(const Network& net, const RunConfig& config, std::size_t sample,
                  std::optional<std::size_t> layer = std::nullopt);

/// Encoded input of one training sample as "t,y,x,c,value" lines (nonzero
/// entries only) after a shape header.
std::string cmd_encode_dump(const RunConfig& config, std::size_t sample, bool test_split = false);

struct GradcheckSummary {
  std::vector<GradCheckReport> reports;
  double max_rel_error = 0.0;
  bool pass = false;

  std::string to_text() const;
};

GradcheckSummary cmd_gradcheck(std::size_t trials, std::uint64_t seed);

}  // namespace stbp
