#include "stbp/encode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stbp/error.hpp"

namespace stbp {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) { return mix(mix(mix(base) ^ a) ^ b); }

SpikeTensor bernoulli_encode(std::span<const std::uint8_t> pixels, Shape3 shape, std::size_t steps, std::uint64_t seed) {
  if (pixels.size() != shape.size()) {
    throw ShapeError("bernoulli_encode: " + std::to_string(pixels.size()) + " pixels for shape " + shape.str());
  }
  if (steps == 0) throw ShapeError("bernoulli_encode: need at least one step");
  SpikeTensor out(steps, shape);
  std::mt19937_64 rng(seed);
  // Integer comparison against p/255 on 53-bit uniforms: exact at 0 and 255.
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  for (std::size_t t = 0; t < steps; ++t) {
    auto frame = out.step(t);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * kScale;
      frame[i] = u * 255.0 < static_cast<double>(pixels[i]) ? 1.0 : 0.0;
    }
  }
  return out;
}

void EventStream::sort_by_time() {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
}

BinMode parse_bin_mode(std::string_view name) {
  if (name == "or") return BinMode::Or;
  if (name == "count") return BinMode::Count;
  throw ConfigError("unknown bin mode '" + std::string(name) + "' (expected or or count)");
}

SpikeTensor bin_events(const EventStream& stream, std::size_t steps, double dt_ms, double offset_ms, BinMode mode) {
  if (!(dt_ms > 0.0)) throw ConfigError("bin_events: dt must be positive");
  if (!(offset_ms >= 0.0)) throw ConfigError("bin_events: offset must be nonnegative");
  SpikeTensor out(steps, Shape3{stream.height, stream.width, 2});
  for (const Event& e : stream.events) {
    if (e.x >= stream.width || e.y >= stream.height) {
      throw FormatError("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) + ") outside " +
                        std::to_string(stream.width) + "x" + std::to_string(stream.height) + " sensor");
    }
    const double rel = static_cast<double>(e.t_us) / 1000.0 - offset_ms;
    if (rel < 0.0) continue;
    const double bin = std::floor(rel / dt_ms);
    if (bin >= static_cast<double>(steps)) continue;
    double& cell = out.at(static_cast<std::size_t>(bin), e.y, e.x, e.on ? 0 : 1);
    cell = mode == BinMode::Or ? 1.0 : cell + 1.0;
  }
  return out;
}

}  // namespace stbp
