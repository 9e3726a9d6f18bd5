#include "stbp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "stbp/encode.hpp"
#include "stbp/error.hpp"
#include "stbp/trainer.hpp"

namespace stbp {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShuffleStream = 0x5'f1e0'5eedull;
constexpr std::uint64_t kTestStream = 0x7e57'0000'0000'0000ull;

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::vector<std::size_t> labels_of(const Dataset& data) {
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data.label(i);
  return labels;
}

void check_compatible(const Network& net, const Dataset& data) {
  if (net.input_shape.size() != data.sample_shape().size())
    throw ConfigError("architecture input " + net.input_shape.str() + " does not match dataset samples " +
                      data.sample_shape().str());
  if (net.num_classes() != data.num_classes())
    throw ConfigError("architecture has " + std::to_string(net.num_classes()) + " outputs, dataset has " +
                      std::to_string(data.num_classes()) + " classes");
}

void write_summary(const fs::path& path, const std::string& hash, const TrainSummary& s) {
  auto out = open_out(path);
  out << "# config_hash=" << hash << '\n';
  out << "metric,value\n";
  out << "final_test_accuracy," << fixed(s.final_test_accuracy) << '\n';
  out << "best_test_accuracy," << fixed(s.best_test_accuracy) << '\n';
  out << "best_epoch," << s.best_epoch << '\n';
  out << "trailing_mean," << fixed(s.trailing_mean) << '\n';
  out << "trailing_min," << fixed(s.trailing_min) << '\n';
  out << "trailing_max," << fixed(s.trailing_max) << '\n';
}

std::string width_tag(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

}  // namespace

TrainSummary summarize(const std::vector<MetricsRow>& rows) {
  TrainSummary s;
  if (rows.empty()) return s;
  s.final_test_accuracy = rows.back().test_accuracy;
  for (const auto& r : rows)
    if (r.test_accuracy > s.best_test_accuracy || s.best_epoch == 0) {
      s.best_test_accuracy = r.test_accuracy;
      s.best_epoch = r.epoch;
    }
  const std::size_t window = std::min<std::size_t>(10, rows.size());
  s.trailing_min = 1.0;
  s.trailing_max = 0.0;
  for (std::size_t i = rows.size() - window; i < rows.size(); ++i) {
    s.trailing_mean += rows[i].test_accuracy / static_cast<double>(window);
    s.trailing_min = std::min(s.trailing_min, rows[i].test_accuracy);
    s.trailing_max = std::max(s.trailing_max, rows[i].test_accuracy);
  }
  return s;
}

Network make_network(const RunConfig& config) {
  NetworkOptions options;
  options.lif.v_th = config.v_th;
  options.lif.tau = config.tau;
  options.lif.dt = config.dt_ms;
  options.time_steps = config.time_steps;
  options.spiking_pool = config.spiking_pool;
  Network net = build_network(config.architecture, options);
  init_params(net, config.seed, config.init_gain);
  return net;
}

SpikeTensor encode_for(const Network& net, const Dataset& data, std::size_t i, std::uint64_t seed) {
  SpikeTensor t = data.encode(i, net.time_steps, seed);
  if (t.shape.size() != net.input_shape.size())
    throw ShapeError("sample shape " + t.shape.str() + " does not fit network input " + net.input_shape.str());
  t.shape = net.input_shape;
  return t;
}

std::uint64_t test_encode_seed(std::uint64_t run_seed, std::size_t index) {
  return derive_seed(run_seed, kTestStream, index);
}

double evaluate(const Network& net, const Dataset& data, std::uint64_t run_seed, int workers) {
  if (data.size() == 0) throw FormatError("test split is empty");
  const auto labels = labels_of(data);
  const std::size_t correct = count_correct(
      net, labels, [&](std::size_t i) { return encode_for(net, data, i, test_encode_seed(run_seed, i)); }, workers);
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult cmd_train(const RunConfig& config, std::ostream* log) {
  config.validate();
  const DataSplit data = load_split(config);
  TrainResult result{{}, {}, make_network(config), config.output_dir};
  Network& net = result.network;
  check_compatible(net, *data.train);
  check_compatible(net, *data.test);

  fs::create_directories(result.dir);
  const std::string hash = config.hash();
  const CheckpointMeta meta{config.seed, hash};
  {
    auto out = open_out(result.dir / "config.txt");
    out << "# config_hash=" << hash << '\n' << config.canonical();
  }
  auto metrics = open_out(result.dir / "metrics.csv");
  metrics << "# config_hash=" << hash << '\n' << "epoch,train_loss,train_accuracy,test_accuracy\n";
  auto timing = open_out(result.dir / "timing.csv");
  timing << "# config_hash=" << hash << '\n' << "epoch,seconds\n";

  Optimizer optimizer(config.optim, net);
  BatchEngine engine(net);
  StepConfig step;
  step.surrogate = config.surrogate;
  step.surrogate.v_th = config.v_th;
  step.mode = config.mode;
  step.workers = config.workers;

  const Dataset& train = *data.train;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> batch_labels;
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, epoch, kShuffleStream));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0, correct = 0, seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch_labels.clear();
      for (std::size_t k = begin; k < end; ++k) batch_labels.push_back(train.label(order[k]));
      const auto encode = [&](std::size_t k) {
        const std::size_t idx = order[begin + k];
        return encode_for(net, train, idx, derive_seed(config.seed, epoch, idx));
      };
      BatchResult r;
      try {
        r = train_step(net, optimizer, engine, batch_labels, encode, step);
      } catch (const NumericalError&) {
        save_checkpoint(result.dir / "failed_state.txt", net, meta);
        throw;
      }
      loss_sum += r.loss;
      correct += r.correct;
      seen += r.count;
      ++batches;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    row.train_accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    row.test_accuracy = evaluate(net, *data.test, config.seed, config.workers);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.rows.push_back(row);

    metrics << row.epoch << ',' << fixed(row.train_loss, 8) << ',' << fixed(row.train_accuracy) << ','
            << fixed(row.test_accuracy) << '\n'
            << std::flush;
    timing << epoch << ',' << fixed(row.seconds, 3) << '\n' << std::flush;
    if (row.test_accuracy > best) {
      best = row.test_accuracy;
      save_checkpoint(result.dir / "checkpoint_best.txt", net, meta);
    }
    if (log)
      *log << "epoch " << epoch << "/" << config.epochs << "  loss " << fixed(row.train_loss, 5) << "  train "
           << fixed(row.train_accuracy, 4) << "  test " << fixed(row.test_accuracy, 4) << "  (" << fixed(row.seconds, 1)
           << " s)\n"
           << std::flush;
    if (config.stop_accuracy > 0.0 && row.test_accuracy >= config.stop_accuracy) break;
  }

  save_checkpoint(result.dir / "checkpoint_final.txt", net, meta);
  if (config.epochs == 0) save_checkpoint(result.dir / "checkpoint_best.txt", net, meta);
  result.summary = summarize(result.rows);
  write_summary(result.dir / "summary.csv", hash, result.summary);
  return result;
}

double cmd_eval(const fs::path& checkpoint, const RunConfig& config) {
  CheckpointMeta meta;
  const Network net = load_checkpoint(checkpoint, &meta);
  const DataSplit data = load_split(config);
  check_compatible(net, *data.test);
  return evaluate(net, *data.test, meta.seed, config.workers);
}

std::vector<SweepEntry> cmd_sweep_surrogate(const RunConfig& config, const std::vector<SurrogateKind>& kinds,
                                            const std::vector<double>& widths, std::ostream* log) {
  if (kinds.empty() || widths.empty()) throw ConfigError("sweep needs at least one kind and one width");
  std::vector<SweepEntry> entries;
  fs::create_directories(config.output_dir);
  const std::string hash = config.hash();
  auto out = open_out(fs::path(config.output_dir) / "sweep.csv");
  out << "# config_hash=" << hash << '\n'
      << "kind,a,status,final_test_accuracy,best_test_accuracy,trailing_mean,trailing_min,trailing_max\n";
  auto curves = open_out(fs::path(config.output_dir) / "sweep_curves.csv");
  curves << "# config_hash=" << hash << '\n' << "kind,a,epoch,test_accuracy\n";
  for (const auto kind : kinds) {
    for (const double a : widths) {
      SweepEntry e{kind, a, {}, {}, {}};
      RunConfig c = config;
      c.surrogate.kind = kind;
      c.surrogate.a = a;
      c.output_dir = (fs::path(config.output_dir) / (to_string(kind) + "_a" + width_tag(a))).string();
      if (log) *log << "sweep: " << to_string(kind) << " a=" << width_tag(a) << '\n';
      try {
        TrainResult r = cmd_train(c, log);
        e.summary = r.summary;
        e.rows = std::move(r.rows);
      } catch (const Error& err) {
        e.error = err.what();
        if (log) *log << "sweep: cell failed: " << e.error << '\n';
      }
      const auto& s = e.summary;
      out << to_string(kind) << ',' << width_tag(a) << ',' << (e.error.empty() ? "ok" : "failed") << ','
          << fixed(s.final_test_accuracy) << ',' << fixed(s.best_test_accuracy) << ',' << fixed(s.trailing_mean)
          << ',' << fixed(s.trailing_min) << ',' << fixed(s.trailing_max) << '\n'
          << std::flush;
      for (const auto& row : e.rows)
        curves << to_string(kind) << ',' << width_tag(a) << ',' << row.epoch << ',' << fixed(row.test_accuracy) << '\n';
      curves << std::flush;
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

AblationResult cmd_ablate_td(const RunConfig& config, std::ostream* log) {
  AblationResult result;
  fs::create_directories(config.output_dir);
  for (const auto mode : {BackpropMode::Stbp, BackpropMode::Sdbp}) {
    RunConfig c = config;
    c.mode = mode;
    c.output_dir = (fs::path(config.output_dir) / to_string(mode)).string();
    if (log) *log << "ablation: " << to_string(mode) << '\n';
    (mode == BackpropMode::Stbp ? result.stbp : result.sdbp) = cmd_train(c, log);
  }
  const std::string hash = config.hash();
  auto out = open_out(fs::path(config.output_dir) / "ablation.csv");
  out << "# config_hash=" << hash << '\n'
      << "mode,final_test_accuracy,best_test_accuracy,trailing_mean,trailing_min,trailing_max\n";
  for (const auto* r : {&result.stbp, &result.sdbp}) {
    const auto& s = r->summary;
    out << (r == &result.stbp ? "stbp" : "sdbp") << ',' << fixed(s.final_test_accuracy) << ','
        << fixed(s.best_test_accuracy) << ',' << fixed(s.trailing_mean) << ',' << fixed(s.trailing_min) << ','
        << fixed(s.trailing_max) << '\n';
  }
  auto curves = open_out(fs::path(config.output_dir) / "ablation_curves.csv");
  curves << "# config_hash=" << hash << '\n' << "epoch,stbp_test_accuracy,sdbp_test_accuracy\n";
  for (std::size_t i = 0; i < result.stbp.rows.size(); ++i)
    curves << result.stbp.rows[i].epoch << ',' << fixed(result.stbp.rows[i].test_accuracy) << ','
           << fixed(result.sdbp.rows[i].test_accuracy) << '\n';
  return result;
}

std::string Raster::to_text(const std::string& config_hash) const {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << '\n';
  out << "# sample=" << sample << " label=" << label << " layer=" << layer << " neurons=" << neurons
      << " steps=" << steps << '\n';
  out << "neuron,step\n";
  for (const auto& [n, t] : spikes) out << n << ',' << t << '\n';
  return out.str();
}

Raster cmd_raster(const Network& net, const RunConfig& config, std::size_t sample, std::optional<std::size_t> layer) {
  const std::size_t id = layer.value_or(net.layers.size() - 1);
  if (id >= net.layers.size())
    throw ConfigError("layer " + std::to_string(id) + " out of range (network has " +
                      std::to_string(net.layers.size()) + " layers)");
  const DataSplit data = load_split(config);
  check_compatible(net, *data.test);
  if (sample >= data.test->size())
    throw ConfigError("sample " + std::to_string(sample) + " out of range (test split has " +
                      std::to_string(data.test->size()) + ")");

  const Trace trace = forward_unroll(net, encode_for(net, *data.test, sample, test_encode_seed(config.seed, sample)));
  const LayerTrace& lt = trace.layers[id];
  Raster r;
  r.sample = sample;
  r.label = data.test->label(sample);
  r.layer = id;
  r.steps = trace.steps;
  r.neurons = lt.shape.size();
  r.counts.assign(r.neurons, 0);
  for (std::size_t t = 0; t < trace.steps; ++t) {
    const auto o = lt.o_at(t);
    for (std::size_t n = 0; n < r.neurons; ++n)
      if (o[n] > 0.0) {
        r.spikes.emplace_back(n, t);
        ++r.counts[n];
      }
  }
  std::sort(r.spikes.begin(), r.spikes.end());
  return r;
}

std::string cmd_encode_dump(const RunConfig& config, std::size_t sample, bool test_split) {
  const DataSplit data = load_split(config);
  const Dataset& split = test_split ? *data.test : *data.train;
  if (sample >= split.size())
    throw ConfigError("sample " + std::to_string(sample) + " out of range (split has " + std::to_string(split.size()) +
                      ")");
  // The seeds a training run would use in its first epoch / at test time.
  const std::uint64_t seed =
      test_split ? test_encode_seed(config.seed, sample) : derive_seed(config.seed, 1, sample);
  const SpikeTensor t = split.encode(sample, config.time_steps, seed);
  std::ostringstream out;
  out << "# config_hash=" << config.hash() << '\n';
  out << "# dataset=" << config.dataset << " split=" << (test_split ? "test" : "train") << " sample=" << sample
      << " label=" << split.label(sample) << " steps=" << t.steps << " shape=" << t.shape.str() << '\n';
  out << "t,y,x,c,value\n";
  for (std::size_t s = 0; s < t.steps; ++s)
    for (std::size_t y = 0; y < t.shape.height; ++y)
      for (std::size_t x = 0; x < t.shape.width; ++x)
        for (std::size_t c = 0; c < t.shape.channels; ++c)
          if (const double v = t.at(s, y, x, c); v != 0.0) out << s << ',' << y << ',' << x << ',' << c << ',' << v << '\n';
  return out.str();
}

std::string GradcheckSummary::to_text() const {
  std::ostringstream out;
  char buf[64];
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::snprintf(buf, sizeof buf, "%.3e", r.worst.rel_error);
    out << "trial " << i << ": " << (r.pass ? "PASS" : "FAIL") << " max_rel_error=" << buf
        << " params=" << r.checked << "\n  replay: " << r.config.to_string() << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.3e", max_rel_error);
  out << "max relative error: " << buf << '\n';
  out << "result: " << (pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

GradcheckSummary cmd_gradcheck(std::size_t trials, std::uint64_t seed) {
  GradcheckSummary s;
  s.pass = true;
  for (const auto& c : sample_configs(trials, seed)) {
    s.reports.push_back(check_gradients(c));
    s.max_rel_error = std::max(s.max_rel_error, s.reports.back().worst.rel_error);
    s.pass = s.pass && s.reports.back().pass;
  }
  return s;
}

}  // namespace stbp
