#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stbp/encode.hpp"
#include "stbp/engine.hpp"
#include "stbp/optim.hpp"
#include "stbp/surrogate.hpp"

namespace stbp {

/// Environment variable naming the directory that holds mnist/ and nmnist/.
inline constexpr const char* kDataRootEnv = "STBP_DATA_ROOT";

/// Fully resolved run configuration. Files use flat "key = value" lines
/// with dotted keys (see config_keys()); '#' starts a comment.
struct RunConfig {
  std::string dataset = "mnist";  // mnist | synthetic | nmnist | nmnist-sim
  std::string data_root;          // empty: $STBP_DATA_ROOT, then ./data
  std::string architecture = "784-400-10";

  std::size_t time_steps = 30;
  double dt_ms = 1.0;
  double offset_ms = 0.0;
  BinMode bin_mode = BinMode::Or;

  double v_th = 1.5;
  double tau = 0.1;
  bool spiking_pool = false;
  double init_gain = 1.0;

  SurrogateSpec surrogate;
  OptimizerConfig optim;

  std::size_t batch_size = 100;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  BackpropMode mode = BackpropMode::Stbp;
  int workers = 0;
  std::size_t train_limit = 0;  // 0: whole split
  std::size_t test_limit = 0;
  double stop_accuracy = 0.0;  // end training once test accuracy reaches this; 0: never

  std::string output_dir = "runs/default";

  void validate() const;
  /// Sorted "key = value" lines of every setting that affects results.
  /// Worker count and paths are left out, so runs that differ only in
  /// those share a hash.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a 64 over canonical().
  std::string hash() const;
  std::filesystem::path resolved_data_root() const;
};

const std::vector<std::string>& config_keys();

/// Defaults for `dataset` before any file or override is applied.
RunConfig dataset_defaults(std::string_view dataset);

using Assignment = std::pair<std::string, std::string>;

/// Parses "key = value" lines; `source` names the input in error messages.
std::vector<Assignment> parse_assignments(std::string_view text, std::string_view source);
/// "key=value" from the command line.
Assignment parse_override(std::string_view text);

/// Dataset defaults (from the last "dataset" assignment, else mnist), then
/// every assignment in order. Unknown keys and bad values raise ConfigError.
RunConfig resolve_config(const std::vector<Assignment>& assignments);

/// Reads `path` (when non-empty) and applies `overrides` after it.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace stbp
