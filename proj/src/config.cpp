#include "stbp/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "stbp/error.hpp"

namespace stbp {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0' || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': expected a finite number, got '" + value + "'");
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0' || value.front() == '-')
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string to_string(BinMode mode) { return mode == BinMode::Or ? "or" : "count"; }

void apply(RunConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "dataset") c.dataset = value;
    else if (key == "data.root") c.data_root = value;
    else if (key == "architecture") c.architecture = value;
    else if (key == "encode.T") c.time_steps = to_unsigned(key, value);
    else if (key == "encode.dt") c.dt_ms = to_double(key, value);
    else if (key == "encode.offset_ms") c.offset_ms = to_double(key, value);
    else if (key == "encode.bin_mode") c.bin_mode = parse_bin_mode(value);
    else if (key == "lif.v_th") c.v_th = to_double(key, value);
    else if (key == "lif.tau") c.tau = to_double(key, value);
    else if (key == "lif.spiking_pool") c.spiking_pool = to_bool(key, value);
    else if (key == "init.gain") c.init_gain = to_double(key, value);
    else if (key == "surrogate.kind") c.surrogate.kind = parse_surrogate_kind(value);
    else if (key == "surrogate.a") c.surrogate.a = to_double(key, value);
    else if (key == "optim.kind") c.optim.kind = parse_optimizer_kind(value);
    else if (key == "optim.lr") c.optim.lr = to_double(key, value);
    else if (key == "optim.beta1") c.optim.beta1 = to_double(key, value);
    else if (key == "optim.beta2") c.optim.beta2 = to_double(key, value);
    else if (key == "optim.epsilon") c.optim.epsilon = to_double(key, value);
    else if (key == "train.batch_size") c.batch_size = to_unsigned(key, value);
    else if (key == "train.epochs") c.epochs = to_unsigned(key, value);
    else if (key == "train.seed") c.seed = to_unsigned(key, value);
    else if (key == "train.mode") c.mode = parse_backprop_mode(value);
    else if (key == "train.workers") c.workers = static_cast<int>(to_unsigned(key, value));
    else if (key == "train.train_limit") c.train_limit = to_unsigned(key, value);
    else if (key == "train.test_limit") c.test_limit = to_unsigned(key, value);
    else if (key == "train.stop_accuracy") c.stop_accuracy = to_double(key, value);
    else if (key == "output.dir") c.output_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "architecture",      "data.root",        "dataset",         "encode.T",        "encode.bin_mode",
      "encode.dt",         "encode.offset_ms", "init.gain",       "lif.spiking_pool", "lif.tau",
      "lif.v_th",          "optim.beta1",      "optim.beta2",     "optim.epsilon",   "optim.kind",
      "optim.lr",          "output.dir",       "surrogate.a",     "surrogate.kind",  "train.batch_size",
      "train.epochs",      "train.mode",       "train.seed",      "train.stop_accuracy", "train.test_limit",
      "train.train_limit", "train.workers"};
  return keys;
}

RunConfig dataset_defaults(std::string_view dataset) {
  RunConfig c;
  c.dataset = std::string(dataset);
  if (dataset == "mnist") {
    c.architecture = "784-400-10";
    c.v_th = 1.5;
    c.tau = 0.1;
    c.init_gain = 3.0;
    c.optim.lr = 2.0;
  } else if (dataset == "synthetic") {
    c.architecture = "784-400-2";
    c.v_th = 2.0;
    c.tau = 0.15;
    c.init_gain = 3.0;
    c.optim.lr = 2.0;
    // 1509 training samples: smaller batches give enough updates per epoch.
    c.batch_size = 20;
  } else if (dataset == "nmnist" || dataset == "nmnist-sim") {
    c.architecture = "34x34x2-800-10";
    c.v_th = 0.2;
    c.tau = 0.2;
    c.init_gain = 1.0;
    c.optim.lr = 2.0;
  } else {
    throw ConfigError("unknown dataset '" + std::string(dataset) + "' (expected mnist, synthetic, nmnist, nmnist-sim)");
  }
  return c;
}

void RunConfig::validate() const {
  dataset_defaults(dataset);
  if (architecture.empty()) throw ConfigError("architecture must not be empty");
  if (time_steps < 1 || time_steps > 10000) throw ConfigError("encode.T must be in [1, 10000]");
  if (!(dt_ms > 0.0)) throw ConfigError("encode.dt must be positive");
  if (offset_ms < 0.0) throw ConfigError("encode.offset_ms must be non-negative");
  if (!(v_th > 0.0) || v_th > 100.0) throw ConfigError("lif.v_th must be in (0, 100]");
  if (!(tau > 0.0) || tau > 1.0) throw ConfigError("lif.tau must be in (0, 1]");
  if (!(init_gain > 0.0)) throw ConfigError("init.gain must be positive");
  if (!(surrogate.a > 0.0) || surrogate.a > 100.0) throw ConfigError("surrogate.a must be in (0, 100]");
  optim.validate();
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (workers < 0) throw ConfigError("train.workers must be non-negative");
  if (!(stop_accuracy >= 0.0) || stop_accuracy > 1.0) throw ConfigError("train.stop_accuracy must be in [0, 1]");
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["architecture"] = architecture;
  kv["dataset"] = dataset;
  kv["encode.T"] = std::to_string(time_steps);
  kv["encode.bin_mode"] = to_string(bin_mode);
  kv["encode.dt"] = format_double(dt_ms);
  kv["encode.offset_ms"] = format_double(offset_ms);
  kv["init.gain"] = format_double(init_gain);
  kv["lif.spiking_pool"] = spiking_pool ? "true" : "false";
  kv["lif.tau"] = format_double(tau);
  kv["lif.v_th"] = format_double(v_th);
  kv["optim.beta1"] = format_double(optim.beta1);
  kv["optim.beta2"] = format_double(optim.beta2);
  kv["optim.epsilon"] = format_double(optim.epsilon);
  kv["optim.kind"] = stbp::to_string(optim.kind);
  kv["optim.lr"] = format_double(optim.lr);
  kv["surrogate.a"] = format_double(surrogate.a);
  kv["surrogate.kind"] = stbp::to_string(surrogate.kind);
  kv["train.batch_size"] = std::to_string(batch_size);
  kv["train.epochs"] = std::to_string(epochs);
  kv["train.mode"] = stbp::to_string(mode);
  kv["train.seed"] = std::to_string(seed);
  kv["train.stop_accuracy"] = format_double(stop_accuracy);
  kv["train.test_limit"] = std::to_string(test_limit);
  kv["train.train_limit"] = std::to_string(train_limit);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

std::filesystem::path RunConfig::resolved_data_root() const {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
  return "data";
}

std::vector<Assignment> parse_assignments(std::string_view text, std::string_view source) {
  std::vector<Assignment> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    out.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return out;
}

Assignment parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(text) + "' is not key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

RunConfig resolve_config(const std::vector<Assignment>& assignments) {
  std::string dataset = "mnist";
  for (const auto& [k, v] : assignments)
    if (k == "dataset") dataset = v;
  RunConfig c = dataset_defaults(dataset);
  for (const auto& [k, v] : assignments) apply(c, k, v);
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::vector<Assignment> assignments;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    assignments = parse_assignments(text.str(), path.string());
  }
  for (const auto& o : overrides) assignments.push_back(parse_override(o));
  return resolve_config(assignments);
}

}  // namespace stbp
