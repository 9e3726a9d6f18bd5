#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <vector>

#include "stbp/encode.hpp"

namespace stbp {

/// Grayscale images with class labels, row-major uint8 pixels.
struct LabeledImageSet {
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const { return {pixels.data() + i * rows * cols, rows * cols}; }
};

struct LabeledEventSet {
  std::vector<EventStream> streams;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
};

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

/// Big-endian IDX image + label files. Every failure names the byte
/// offset where the file stopped making sense. `chunk_bytes` bounds the
/// size of each read.
LabeledImageSet load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                               std::size_t chunk_bytes = 1 << 20);
LabeledImageSet read_mnist_idx(std::istream& images, std::istream& labels, std::size_t chunk_bytes = 1 << 20);
void write_mnist_idx(const LabeledImageSet& set, const std::filesystem::path& images,
                     const std::filesystem::path& labels);

/// N-MNIST 5-byte address-event records on a 34x34 sensor:
///   byte0 x, byte1 y, byte2 bit7 polarity (1 = on),
///   byte2 bits 6..0 : byte3 : byte4 = 23-bit timestamp in microseconds.
EventStream decode_nmnist(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_nmnist(const EventStream& stream);
EventStream load_nmnist_bin(const std::filesystem::path& path);
void write_nmnist_bin(const EventStream& stream, const std::filesystem::path& path);

/// Loads <root>/<label>/*.bin (the official Train/ or Test/ layout), files
/// in lexicographic order within each label directory.
LabeledEventSet load_nmnist_dir(const std::filesystem::path& root);

/// Two-class 28x28 stand-in for a detection dataset: class 1 has a bright
/// vertical bar at a random position over textured noise, class 0 is noise
/// only. Classes alternate so every prefix is balanced.
LabeledImageSet gen_synthetic_detection(std::size_t count, std::uint64_t seed);

/// Converts a static 28x28 image into a 34x34 event stream by sliding it
/// along three saccades (100 ms each) and emitting an event whenever a
/// pixel's log intensity moves by more than a contrast threshold. Mimics the
/// N-MNIST recording procedure for pipeline tests; it is not a substitute
/// for the recorded dataset. Only the first `duration_ms` are simulated.
EventStream simulate_saccades(std::span<const std::uint8_t> image, std::uint64_t seed, int duration_ms = 300);

}  // namespace stbp
