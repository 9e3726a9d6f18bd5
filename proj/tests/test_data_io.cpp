#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "stbp/data_io.hpp"
#include "stbp/error.hpp"

using namespace stbp;
namespace fs = std::filesystem;

namespace {

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
}

LabeledImageSet random_images(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabeledImageSet s;
  s.pixels.resize(n * 784);
  s.labels.resize(n);
  for (auto& p : s.pixels) p = static_cast<std::uint8_t>(rng());
  for (auto& l : s.labels) l = static_cast<std::uint8_t>(rng() % 10);
  return s;
}

std::string error_of(const std::string& images, const std::string& labels) {
  std::istringstream img(images), lbl(labels);
  try {
    read_mnist_idx(img, lbl, 64);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(MnistIdx, RoundTripWithSmallChunks) {
  const auto dir = temp_dir("stbp_idx_roundtrip");
  const auto set = random_images(37, 1);
  write_mnist_idx(set, dir / "img", dir / "lbl");
  EXPECT_EQ(fs::file_size(dir / "img"), 16u + 37 * 784);
  for (std::size_t chunk : {1u, 7u, 784u, 1u << 20}) {
    const auto back = load_mnist_idx(dir / "img", dir / "lbl", chunk);
    EXPECT_EQ(back.pixels, set.pixels);
    EXPECT_EQ(back.labels, set.labels);
  }
  fs::remove_all(dir);
}

TEST(MnistIdx, TruncatedPixelsReportOffset) {
  const std::string header = be32(2051) + be32(3) + be32(28) + be32(28);
  const std::string labels = be32(2049) + be32(3) + std::string(3, '\1');
  const std::string msg = error_of(header + std::string(1000, '\0'), labels);
  EXPECT_NE(msg.find("offset 1016"), std::string::npos) << msg;
}

TEST(MnistIdx, HeaderErrors) {
  const std::string labels = be32(2049) + be32(1) + std::string(1, '\1');
  const std::string body(784, '\0');
  EXPECT_NE(error_of(be32(2052) + be32(1) + be32(28) + be32(28) + body, labels).find("magic"), std::string::npos);
  EXPECT_NE(error_of(be32(2051) + be32(1) + be32(28) + be32(27) + body, labels).find("28x27"), std::string::npos);
  EXPECT_NE(error_of(be32(2051) + be32(2) + be32(28) + be32(28) + body + body, labels).find("does not match"),
            std::string::npos);
  EXPECT_NE(error_of(be32(2051) + be32(1), labels).find("truncated header at offset 8"), std::string::npos);
  const std::string bad_label = be32(2049) + be32(1) + std::string(1, '\x0c');
  EXPECT_NE(error_of(be32(2051) + be32(1) + be32(28) + be32(28) + body, bad_label).find("offset 8"),
            std::string::npos);
  EXPECT_THROW(load_mnist_idx("/nonexistent/img", "/nonexistent/lbl"), FormatError);
}

// Counts of the published files, when a data root is configured.
TEST(MnistIdx, OfficialFileCounts) {
  const char* root = std::getenv("STBP_DATA_ROOT");
  if (!root || !fs::exists(fs::path(root) / "mnist" / "train-images-idx3-ubyte")) GTEST_SKIP() << "no MNIST files";
  const auto dir = fs::path(root) / "mnist";
  const auto train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  const auto test = load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  EXPECT_EQ(train.size(), 60000u);
  EXPECT_EQ(test.size(), 10000u);
}

TEST(Nmnist, DecodesRecordLayout) {
  const std::vector<std::uint8_t> bytes{0x03, 0x04, 0x80, 0x00, 0x00, 0x21, 0x00, 0x7f, 0xff, 0xfe};
  const auto s = decode_nmnist(bytes);
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_EQ(s.events[0], (Event{3, 4, true, 0}));
  EXPECT_EQ(s.events[1], (Event{33, 0, false, (1u << 23) - 2}));
  EXPECT_TRUE(decode_nmnist({}).events.empty());
}

TEST(Nmnist, RejectsBadRecords) {
  EXPECT_THROW(decode_nmnist(std::vector<std::uint8_t>{1, 2, 3}), FormatError);
  try {
    decode_nmnist(std::vector<std::uint8_t>{1, 1, 0, 0, 0, 34, 1, 0, 0, 0});
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 5"), std::string::npos);
  }
}

TEST(NmnistProperty, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    EventStream s;
    for (std::size_t i = 0; i < rng() % 500; ++i)
      s.events.push_back({static_cast<std::uint16_t>(rng() % 34), static_cast<std::uint16_t>(rng() % 34),
                          rng() % 2 == 1, static_cast<std::uint32_t>(rng() % (1u << 23))});
    EXPECT_EQ(decode_nmnist(encode_nmnist(s)).events, s.events);
  }
}

TEST(Nmnist, DirectoryLayout) {
  const auto dir = temp_dir("stbp_nmnist_dir");
  EventStream a, b;
  a.events = {{1, 2, true, 10}};
  b.events = {{3, 4, false, 20}, {5, 6, true, 30}};
  fs::create_directories(dir / "0");
  fs::create_directories(dir / "7");
  write_nmnist_bin(a, dir / "0" / "00002.bin");
  write_nmnist_bin(b, dir / "7" / "00001.bin");
  write_nmnist_bin(a, dir / "7" / "00000.bin");
  std::ofstream(dir / "7" / "notes.txt") << "ignored";
  const auto set = load_nmnist_dir(dir);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set.labels, (std::vector<std::uint8_t>{0, 7, 7}));
  EXPECT_EQ(set.streams[1].events, a.events);
  EXPECT_EQ(set.streams[2].events, b.events);
  EXPECT_THROW(load_nmnist_dir(dir / "missing"), FormatError);
  fs::remove_all(dir);
}

TEST(Synthetic, BalancedAndDeterministic) {
  const auto a = gen_synthetic_detection(1000, 4);
  const auto b = gen_synthetic_detection(1000, 4);
  const auto c = gen_synthetic_detection(1000, 5);
  std::size_t ones = 0;
  for (auto l : a.labels) ones += l;
  EXPECT_EQ(ones, 500u);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_NE(a.pixels, c.pixels);
  EXPECT_THROW(gen_synthetic_detection(1, 4), ConfigError);
}

TEST(SimulatedSaccades, ValidSensorEvents) {
  const auto set = random_images(3, 9);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto s = simulate_saccades(set.image(i), i);
    EXPECT_GT(s.events.size(), 100u);
    std::uint32_t prev = 0;
    for (const auto& e : s.events) {
      ASSERT_LT(e.x, 34);
      ASSERT_LT(e.y, 34);
      ASSERT_LT(e.t_us, 300000u);
      ASSERT_GE(e.t_us, prev);
      prev = e.t_us;
    }
    EXPECT_EQ(decode_nmnist(encode_nmnist(s)).events, s.events);
  }
  const auto shortened = simulate_saccades(set.image(0), 0, 30);
  for (const auto& e : shortened.events) ASSERT_LT(e.t_us, 30000u);
}
