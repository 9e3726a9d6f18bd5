#include "stbp/datasets.hpp"

#include <algorithm>
#include <cmath>

#include "stbp/error.hpp"

namespace stbp {

namespace {

class ImageDataset final : public Dataset {
 public:
  ImageDataset(LabeledImageSet set, std::size_t classes) : set_(std::move(set)), classes_(classes) {}

  std::size_t size() const override { return set_.size(); }
  std::size_t label(std::size_t i) const override { return set_.labels.at(i); }
  std::size_t num_classes() const override { return classes_; }
  Shape3 sample_shape() const override { return {set_.rows, set_.cols, 1}; }
  SpikeTensor encode(std::size_t i, std::size_t steps, std::uint64_t seed) const override {
    return bernoulli_encode(set_.image(i), sample_shape(), steps, seed);
  }

 private:
  LabeledImageSet set_;
  std::size_t classes_;
};

class EventDataset final : public Dataset {
 public:
  EventDataset(LabeledEventSet set, double dt_ms, double offset_ms, BinMode mode)
      : set_(std::move(set)), dt_ms_(dt_ms), offset_ms_(offset_ms), mode_(mode) {}

  std::size_t size() const override { return set_.size(); }
  std::size_t label(std::size_t i) const override { return set_.labels.at(i); }
  std::size_t num_classes() const override { return 10; }
  Shape3 sample_shape() const override { return {34, 34, 2}; }
  SpikeTensor encode(std::size_t i, std::size_t steps, std::uint64_t) const override {
    return bin_events(set_.streams.at(i), steps, dt_ms_, offset_ms_, mode_);
  }

 private:
  LabeledEventSet set_;
  double dt_ms_;
  double offset_ms_;
  BinMode mode_;
};

class SimulatedEventDataset final : public Dataset {
 public:
  SimulatedEventDataset(LabeledImageSet set, std::uint64_t seed, double dt_ms, double offset_ms, BinMode mode)
      : set_(std::move(set)), seed_(seed), dt_ms_(dt_ms), offset_ms_(offset_ms), mode_(mode) {}

  std::size_t size() const override { return set_.size(); }
  std::size_t label(std::size_t i) const override { return set_.labels.at(i); }
  std::size_t num_classes() const override { return 10; }
  Shape3 sample_shape() const override { return {34, 34, 2}; }
  SpikeTensor encode(std::size_t i, std::size_t steps, std::uint64_t) const override {
    const double end_ms = offset_ms_ + static_cast<double>(steps) * dt_ms_;
    const int duration = static_cast<int>(std::min(300.0, std::ceil(end_ms)));
    return bin_events(simulate_saccades(set_.image(i), derive_seed(seed_, i), duration), steps, dt_ms_, offset_ms_,
                      mode_);
  }

 private:
  LabeledImageSet set_;
  std::uint64_t seed_;
  double dt_ms_;
  double offset_ms_;
  BinMode mode_;
};

void truncate(LabeledImageSet& set, std::size_t limit) {
  if (limit == 0 || limit >= set.size()) return;
  set.labels.resize(limit);
  set.pixels.resize(limit * set.rows * set.cols);
}

void truncate(LabeledEventSet& set, std::size_t limit) {
  if (limit == 0 || limit >= set.size()) return;
  set.labels.resize(limit);
  set.streams.resize(limit);
}

// Recordings are stored grouped by label; interleave so that a prefix
// taken by train_limit still covers every class.
LabeledEventSet interleave(LabeledEventSet set) {
  std::vector<std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] >= by_label.size()) by_label.resize(set.labels[i] + 1);
    by_label[set.labels[i]].push_back(i);
  }
  LabeledEventSet out;
  for (std::size_t round = 0; out.size() < set.size(); ++round)
    for (const auto& ids : by_label)
      if (round < ids.size()) {
        out.streams.push_back(std::move(set.streams[ids[round]]));
        out.labels.push_back(set.labels[ids[round]]);
      }
  return out;
}

struct MnistFiles {
  LabeledImageSet train;
  LabeledImageSet test;
};

MnistFiles load_mnist(const std::filesystem::path& root) {
  const auto dir = root / "mnist";
  return {load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"),
          load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte")};
}

}  // namespace

std::unique_ptr<Dataset> make_image_dataset(LabeledImageSet set, std::size_t classes) {
  return std::make_unique<ImageDataset>(std::move(set), classes);
}

std::unique_ptr<Dataset> make_event_dataset(LabeledEventSet set, double dt_ms, double offset_ms, BinMode mode) {
  return std::make_unique<EventDataset>(std::move(set), dt_ms, offset_ms, mode);
}

std::unique_ptr<Dataset> make_simulated_event_dataset(LabeledImageSet set, std::uint64_t seed, double dt_ms,
                                                      double offset_ms, BinMode mode) {
  return std::make_unique<SimulatedEventDataset>(std::move(set), seed, dt_ms, offset_ms, mode);
}

DataSplit load_split(const RunConfig& config) {
  const auto root = config.resolved_data_root();
  DataSplit split;
  if (config.dataset == "mnist") {
    auto files = load_mnist(root);
    truncate(files.train, config.train_limit);
    truncate(files.test, config.test_limit);
    split.train = make_image_dataset(std::move(files.train), 10);
    split.test = make_image_dataset(std::move(files.test), 10);
  } else if (config.dataset == "synthetic") {
    // Same split sizes as the pedestrian set it stands in for.
    auto train = gen_synthetic_detection(1509, 0x5eed0001);
    auto test = gen_synthetic_detection(631, 0x5eed0002);
    truncate(train, config.train_limit);
    truncate(test, config.test_limit);
    split.train = make_image_dataset(std::move(train), 2);
    split.test = make_image_dataset(std::move(test), 2);
  } else if (config.dataset == "nmnist") {
    auto train = interleave(load_nmnist_dir(root / "nmnist" / "Train"));
    auto test = interleave(load_nmnist_dir(root / "nmnist" / "Test"));
    truncate(train, config.train_limit);
    truncate(test, config.test_limit);
    split.train = make_event_dataset(std::move(train), config.dt_ms, config.offset_ms, config.bin_mode);
    split.test = make_event_dataset(std::move(test), config.dt_ms, config.offset_ms, config.bin_mode);
  } else if (config.dataset == "nmnist-sim") {
    auto files = load_mnist(root);
    truncate(files.train, config.train_limit);
    truncate(files.test, config.test_limit);
    split.train = make_simulated_event_dataset(std::move(files.train), 0x51a0001, config.dt_ms, config.offset_ms,
                                               config.bin_mode);
    split.test = make_simulated_event_dataset(std::move(files.test), 0x51a0002, config.dt_ms, config.offset_ms,
                                              config.bin_mode);
  } else {
    throw ConfigError("unknown dataset '" + config.dataset + "'");
  }
  return split;
}

}  // namespace stbp
