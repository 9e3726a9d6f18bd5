#include "stbp/data_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include "stbp/error.hpp"

namespace stbp {

namespace {

constexpr std::uint32_t kMaxIdxItems = 10'000'000;

std::uint32_t read_be32(std::istream& is, std::size_t offset, const char* what) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (is.gcount() != 4) {
    throw FormatError(std::string(what) + ": truncated header at offset " + std::to_string(offset + is.gcount()));
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                 static_cast<char>(v)};
  os.write(b.data(), 4);
}

void read_body(std::istream& is, std::span<std::uint8_t> dst, std::size_t header, std::size_t chunk, const char* what) {
  std::size_t done = 0;
  while (done < dst.size()) {
    const std::size_t want = std::min(chunk, dst.size() - done);
    is.read(reinterpret_cast<char*>(dst.data() + done), static_cast<std::streamsize>(want));
    const auto got = static_cast<std::size_t>(is.gcount());
    done += got;
    if (got < want) {
      throw FormatError(std::string(what) + ": truncated data at offset " + std::to_string(header + done) +
                        ", expected " + std::to_string(header + dst.size()) + " bytes");
    }
  }
}

}  // namespace

LabeledImageSet read_mnist_idx(std::istream& images, std::istream& labels, std::size_t chunk_bytes) {
  if (chunk_bytes == 0) chunk_bytes = 1;
  const std::uint32_t img_magic = read_be32(images, 0, "images");
  if (img_magic != kIdxImageMagic) {
    throw FormatError("images: bad magic " + std::to_string(img_magic) + " at offset 0, expected 2051");
  }
  const std::uint32_t count = read_be32(images, 4, "images");
  const std::uint32_t rows = read_be32(images, 8, "images");
  const std::uint32_t cols = read_be32(images, 12, "images");
  if (rows != 28 || cols != 28) {
    throw FormatError("images: dims " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " at offset 8, expected 28x28");
  }
  const std::uint32_t lbl_magic = read_be32(labels, 0, "labels");
  if (lbl_magic != kIdxLabelMagic) {
    throw FormatError("labels: bad magic " + std::to_string(lbl_magic) + " at offset 0, expected 2049");
  }
  const std::uint32_t lbl_count = read_be32(labels, 4, "labels");
  if (lbl_count != count) {
    throw FormatError("labels: count " + std::to_string(lbl_count) + " at offset 4 does not match " +
                      std::to_string(count) + " images");
  }

  if (count > kMaxIdxItems) {
    throw FormatError("images: count " + std::to_string(count) + " at offset 4 is implausibly large");
  }

  LabeledImageSet set;
  set.rows = rows;
  set.cols = cols;
  set.pixels.resize(std::size_t{count} * rows * cols);
  set.labels.resize(count);
  read_body(images, set.pixels, 16, chunk_bytes, "images");
  read_body(labels, set.labels, 8, chunk_bytes, "labels");
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    if (set.labels[i] > 9) {
      throw FormatError("labels: value " + std::to_string(set.labels[i]) + " at offset " + std::to_string(8 + i) +
                        " is not a digit");
    }
  }
  return set;
}

LabeledImageSet load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                               std::size_t chunk_bytes) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images.string());
  std::ifstream lbl(labels, std::ios::binary);
  if (!lbl) throw FormatError("cannot open " + labels.string());
  try {
    return read_mnist_idx(img, lbl, chunk_bytes);
  } catch (const FormatError& e) {
    throw FormatError(images.filename().string() + "/" + labels.filename().string() + ": " + e.what());
  }
}

void write_mnist_idx(const LabeledImageSet& set, const std::filesystem::path& images,
                     const std::filesystem::path& labels) {
  if (set.pixels.size() != set.size() * set.rows * set.cols) throw ShapeError("write_mnist_idx: pixel count mismatch");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lbl(labels, std::ios::binary);
  if (!img || !lbl) throw FormatError("cannot write IDX files at " + images.string());
  write_be32(img, kIdxImageMagic);
  write_be32(img, static_cast<std::uint32_t>(set.size()));
  write_be32(img, static_cast<std::uint32_t>(set.rows));
  write_be32(img, static_cast<std::uint32_t>(set.cols));
  img.write(reinterpret_cast<const char*>(set.pixels.data()), static_cast<std::streamsize>(set.pixels.size()));
  write_be32(lbl, kIdxLabelMagic);
  write_be32(lbl, static_cast<std::uint32_t>(set.size()));
  lbl.write(reinterpret_cast<const char*>(set.labels.data()), static_cast<std::streamsize>(set.labels.size()));
}

// ---------------------------------------------------------------------------
// N-MNIST

EventStream decode_nmnist(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 5 != 0) {
    throw FormatError("AER stream length " + std::to_string(bytes.size()) + " is not a multiple of 5");
  }
  EventStream s;
  s.events.reserve(bytes.size() / 5);
  for (std::size_t off = 0; off < bytes.size(); off += 5) {
    Event e;
    e.x = bytes[off];
    e.y = bytes[off + 1];
    e.on = (bytes[off + 2] & 0x80) != 0;
    e.t_us = (std::uint32_t{bytes[off + 2] & 0x7Fu} << 16) | (std::uint32_t{bytes[off + 3]} << 8) | bytes[off + 4];
    if (e.x >= s.width || e.y >= s.height) {
      throw FormatError("AER record at offset " + std::to_string(off) + ": coordinate (" + std::to_string(e.x) + ", " +
                        std::to_string(e.y) + ") outside 34x34 sensor");
    }
    s.events.push_back(e);
  }
  return s;
}

std::vector<std::uint8_t> encode_nmnist(const EventStream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(stream.events.size() * 5);
  for (const Event& e : stream.events) {
    if (e.x >= 34 || e.y >= 34) throw FormatError("encode_nmnist: coordinate outside 34x34 sensor");
    if (e.t_us >= (1u << 23)) throw FormatError("encode_nmnist: timestamp does not fit in 23 bits");
    out.push_back(static_cast<std::uint8_t>(e.x));
    out.push_back(static_cast<std::uint8_t>(e.y));
    out.push_back(static_cast<std::uint8_t>((e.on ? 0x80u : 0u) | ((e.t_us >> 16) & 0x7Fu)));
    out.push_back(static_cast<std::uint8_t>(e.t_us >> 8));
    out.push_back(static_cast<std::uint8_t>(e.t_us));
  }
  return out;
}

EventStream load_nmnist_bin(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_nmnist(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_nmnist_bin(const EventStream& stream, const std::filesystem::path& path) {
  const auto bytes = encode_nmnist(stream);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LabeledEventSet load_nmnist_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw FormatError("N-MNIST directory not found: " + root.string());
  LabeledEventSet set;
  for (int label = 0; label < 10; ++label) {
    const fs::path dir = root / std::to_string(label);
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".bin") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      set.streams.push_back(load_nmnist_bin(f));
      set.labels.push_back(static_cast<std::uint8_t>(label));
    }
  }
  if (set.size() == 0) throw FormatError("no .bin recordings under " + root.string());
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic data

LabeledImageSet gen_synthetic_detection(std::size_t count, std::uint64_t seed) {
  if (count < 2) throw ConfigError("synthetic detection set needs at least 2 samples");
  LabeledImageSet set;
  set.pixels.assign(count * 28 * 28, 0);
  set.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i, 0x5e7));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool target = i % 2 == 1;
    set.labels[i] = target ? 1 : 0;

    // Texture: two random low-frequency gratings plus pixel noise.
    const double fx1 = 0.1 + 0.5 * unit(rng), fy1 = 0.1 + 0.5 * unit(rng), p1 = 6.3 * unit(rng);
    const double fx2 = 0.1 + 0.5 * unit(rng), fy2 = 0.1 + 0.5 * unit(rng), p2 = 6.3 * unit(rng);
    const double level = 30.0 + 40.0 * unit(rng);
    std::array<double, 28 * 28> img{};
    for (std::size_t y = 0; y < 28; ++y) {
      for (std::size_t x = 0; x < 28; ++x) {
        const double g = std::sin(fx1 * x + fy1 * y + p1) + std::sin(fx2 * x - fy2 * y + p2);
        img[y * 28 + x] = level + 20.0 * g + 40.0 * unit(rng);
      }
    }
    if (target) {
      const std::size_t width = 3 + static_cast<std::size_t>(unit(rng) * 3);     // 3..5
      const std::size_t height = 12 + static_cast<std::size_t>(unit(rng) * 9);   // 12..20
      const std::size_t x0 = static_cast<std::size_t>(unit(rng) * (28 - width));
      const std::size_t y0 = static_cast<std::size_t>(unit(rng) * (28 - height));
      const double bright = 170.0 + 60.0 * unit(rng);
      for (std::size_t y = y0; y < y0 + height; ++y) {
        for (std::size_t x = x0; x < x0 + width; ++x) img[y * 28 + x] = bright + 25.0 * unit(rng);
      }
    }
    auto* dst = set.pixels.data() + i * 28 * 28;
    for (std::size_t p = 0; p < img.size(); ++p) dst[p] = static_cast<std::uint8_t>(std::clamp(std::lround(img[p]), 0L, 255L));
  }
  return set;
}

EventStream simulate_saccades(std::span<const std::uint8_t> image, std::uint64_t seed, int duration_ms) {
  if (image.size() != 28 * 28) throw ShapeError("simulate_saccades expects a 28x28 image");
  if (duration_ms < 0 || duration_ms > 300) throw ConfigError("simulate_saccades: duration must be in [0, 300] ms");
  constexpr int kSensor = 34;
  constexpr double kContrast = 0.25;
  constexpr double kLogFloor = 0.05;
  // Triangle traced by the sensor: three 100 ms saccades.
  constexpr std::array<std::array<double, 2>, 4> kPath = {{{0.0, 0.0}, {1.5, 3.0}, {3.0, 0.0}, {0.0, 0.0}}};
  constexpr double kBase = 1.5;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> jitter(0, 999);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto sample = [&](double ox, double oy, int sx, int sy) {
    // Bilinear sample of the image displaced by (ox, oy) on the sensor.
    const double fx = sx - kBase - ox;
    const double fy = sy - kBase - oy;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0;
    const double ay = fy - y0;
    auto px = [&](int x, int y) -> double {
      if (x < 0 || y < 0 || x >= 28 || y >= 28) return 0.0;
      return image[static_cast<std::size_t>(y) * 28 + static_cast<std::size_t>(x)] / 255.0;
    };
    const double v = (1 - ax) * (1 - ay) * px(x0, y0) + ax * (1 - ay) * px(x0 + 1, y0) + (1 - ax) * ay * px(x0, y0 + 1) +
                     ax * ay * px(x0 + 1, y0 + 1);
    return std::log(v + kLogFloor);
  };

  EventStream stream;
  std::array<double, kSensor * kSensor> ref{};
  for (int y = 0; y < kSensor; ++y)
    for (int x = 0; x < kSensor; ++x) ref[y * kSensor + x] = sample(0.0, 0.0, x, y);

  for (int ms = 1; ms <= duration_ms; ++ms) {
    const int seg = std::min((ms - 1) / 100, 2);
    const double frac = (ms - seg * 100) / 100.0;
    const double ox = kPath[seg][0] + frac * (kPath[seg + 1][0] - kPath[seg][0]);
    const double oy = kPath[seg][1] + frac * (kPath[seg + 1][1] - kPath[seg][1]);
    for (int y = 0; y < kSensor; ++y) {
      for (int x = 0; x < kSensor; ++x) {
        double& r = ref[y * kSensor + x];
        const double v = sample(ox, oy, x, y);
        while (std::abs(v - r) >= kContrast) {
          const bool on = v > r;
          r += on ? kContrast : -kContrast;
          stream.events.push_back(
              {static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), on,
               static_cast<std::uint32_t>((ms - 1) * 1000) + jitter(rng)});
        }
        // Sparse background activity.
        if (unit(rng) < 2e-4) {
          stream.events.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), unit(rng) < 0.5,
                                   static_cast<std::uint32_t>((ms - 1) * 1000) + jitter(rng)});
        }
      }
    }
  }
  stream.sort_by_time();
  return stream;
}

}  // namespace stbp
