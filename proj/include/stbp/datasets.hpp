#pragma once

#include <cstdint>
#include <memory>

#include "stbp/config.hpp"
#include "stbp/data_io.hpp"

namespace stbp {

/// A labelled split that can turn any sample into input spikes.
class Dataset {
 public:
  virtual ~Dataset() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t label(std::size_t i) const = 0;
  virtual std::size_t num_classes() const = 0;
  /// Per-step shape of encode()'s output.
  virtual Shape3 sample_shape() const = 0;
  /// `seed` drives any stochastic encoding; deterministic datasets ignore it.
  virtual SpikeTensor encode(std::size_t i, std::size_t steps, std::uint64_t seed) const = 0;
};

/// Static images, Bernoulli rate-coded.
std::unique_ptr<Dataset> make_image_dataset(LabeledImageSet set, std::size_t classes);

/// Recorded event streams, time-binned.
std::unique_ptr<Dataset> make_event_dataset(LabeledEventSet set, double dt_ms, double offset_ms, BinMode mode);

/// Event streams simulated on the fly from static images (see
/// simulate_saccades); each sample's stream is fixed by `seed` and its index.
std::unique_ptr<Dataset> make_simulated_event_dataset(LabeledImageSet set, std::uint64_t seed, double dt_ms,
                                                      double offset_ms, BinMode mode);

struct DataSplit {
  std::unique_ptr<Dataset> train;
  std::unique_ptr<Dataset> test;
};

/// Loads the train and test splits named by `config.dataset`, truncated to
/// train_limit / test_limit. File layout under the data root:
///   mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
///   nmnist/{Train,Test}/<label>/*.bin
/// The synthetic set is generated, nmnist-sim is simulated from mnist/.
DataSplit load_split(const RunConfig& config);

}  // namespace stbp
