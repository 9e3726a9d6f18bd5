#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stbp/tensor.hpp"

namespace stbp {

/// splitmix64-style mixing of a base seed with stream coordinates, so every
/// (epoch, sample) pair owns an independent generator.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Each pixel fires independently at every step with probability p / 255.
SpikeTensor bernoulli_encode(std::span<const std::uint8_t> pixels, Shape3 shape, std::size_t steps, std::uint64_t seed);

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  bool on = true;
  std::uint32_t t_us = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  std::vector<Event> events;
  std::size_t width = 34;
  std::size_t height = 34;

  void sort_by_time();
};

enum class BinMode { Or, Count };
BinMode parse_bin_mode(std::string_view name);

/// Time-bins events into steps x height x width x 2 (channel 0 = on,
/// channel 1 = off). Bin k covers [offset + k dt, offset + (k+1) dt) in
/// milliseconds. Or mode marks a cell with at least one event, Count mode
/// stores the number of events. Out-of-window events are dropped;
/// out-of-sensor coordinates raise FormatError.
SpikeTensor bin_events(const EventStream& stream, std::size_t steps, double dt_ms, double offset_ms,
                       BinMode mode = BinMode::Or);

}  // namespace stbp
