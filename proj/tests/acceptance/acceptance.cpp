// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
// Training runs are deterministic, so a finished run is reused when its
// directory under --runs holds a complete metrics.csv written for the same
// config hash. --fresh ignores those and retrains.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stbp/data_io.hpp"
#include "stbp/encode.hpp"
#include "stbp/error.hpp"
#include "stbp/harness.hpp"
#include "stbp/surrogate.hpp"

using namespace stbp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path runs;
  bool fresh = false;
  int workers = 0;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pct(double v) { return fmt("%.2f%%", 100.0 * v); }

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Rows of a finished run, or nothing if the directory does not hold one for
// this exact configuration.
std::optional<std::vector<MetricsRow>> read_finished(const fs::path& dir, const RunConfig& config) {
  if (!fs::exists(dir / "done") || slurp(dir / "done") != config.hash() + "\n") return std::nullopt;
  std::ifstream in(dir / "metrics.csv");
  std::string line;
  if (!std::getline(in, line) || line != "# config_hash=" + config.hash()) return std::nullopt;
  std::getline(in, line);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &r.epoch, &r.train_loss, &r.train_accuracy, &r.test_accuracy) != 4)
      return std::nullopt;
    rows.push_back(r);
  }
  std::ifstream timing(dir / "timing.csv");
  std::getline(timing, line);
  std::getline(timing, line);
  for (auto& r : rows) {
    if (!std::getline(timing, line)) break;
    std::size_t e = 0;
    std::sscanf(line.c_str(), "%zu,%lf", &e, &r.seconds);
  }
  return rows;
}

struct Run {
  std::vector<MetricsRow> rows;
  TrainSummary summary;
  fs::path dir;
  bool reused = false;

  double seconds() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.seconds;
    return s;
  }
};

Run train_cached(const Context& ctx, const std::string& name, RunConfig config) {
  config.output_dir = (ctx.runs / name).string();
  config.workers = ctx.workers;
  Run run;
  run.dir = config.output_dir;
  if (!ctx.fresh) {
    if (auto rows = read_finished(run.dir, config)) {
      run.rows = std::move(*rows);
      run.summary = summarize(run.rows);
      run.reused = true;
      std::cerr << "[" << name << "] reusing finished run (config " << config.hash() << ")\n";
      return run;
    }
  }
  fs::remove(run.dir / "done");
  std::cerr << "[" << name << "] training, config " << config.hash() << '\n';
  TrainResult r = cmd_train(config, &std::cerr);
  std::ofstream(run.dir / "done") << config.hash() << '\n';
  run.rows = std::move(r.rows);
  run.summary = r.summary;
  return run;
}

RunConfig mnist_mlp(std::uint64_t seed, BackpropMode mode, SurrogateKind kind) {
  RunConfig c = resolve_config({{"dataset", "mnist"},
                                {"architecture", "784-400-10"},
                                {"encode.T", "15"},
                                {"encode.dt", "1"},
                                {"lif.v_th", "1.5"},
                                {"lif.tau", "0.1"},
                                {"surrogate.a", "1"},
                                {"train.batch_size", "100"},
                                {"train.epochs", "10"}});
  c.seed = seed;
  c.mode = mode;
  c.surrogate.kind = kind;
  return c;
}

std::string run_name(const RunConfig& c) {
  return "mnist_mlp_" + to_string(c.mode) + "_" + to_string(c.surrogate.kind) + "_seed" + std::to_string(c.seed);
}

// 1. Gradient oracle.
Outcome gradient_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const auto summary = cmd_gradcheck(40, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::set<SurrogateKind> kinds;
  std::set<std::size_t> steps;
  std::size_t conv = 0;
  for (const auto& r : summary.reports) {
    kinds.insert(r.config.kind);
    steps.insert(r.config.steps);
    conv += r.config.architecture.find('C') != std::string::npos;
  }
  const bool covered = kinds.size() == 4 && steps == std::set<std::size_t>{1, 2, 5, 6} && conv > 0;
  Outcome o;
  o.pass = summary.pass && summary.max_rel_error <= 1e-4 && covered && secs < 120.0;
  o.detail = std::to_string(summary.reports.size()) + " configs (" + std::to_string(conv) +
             " conv), max rel error " + fmt("%.2e", summary.max_rel_error) + " (<= 1e-4), " + fmt("%.1f s", secs) +
             " (< 120 s)" + (covered ? "" : ", coverage incomplete");
  if (!summary.pass)
    for (const auto& r : summary.reports)
      if (!r.pass) o.detail += "\n    failing: " + r.config.to_string();
  return o;
}

// 2. Unit area of every surrogate.
Outcome surrogate_normalization() {
  double worst = 0.0;
  std::string where;
  for (auto kind : {SurrogateKind::Rectangular, SurrogateKind::Triangular, SurrogateKind::Sigmoid,
                    SurrogateKind::Gaussian})
    for (double a : {0.5, 1.0, 2.5, 5.0}) {
      const SurrogateSpec s{kind, a, 1.0};
      const double span = 60.0 * a;
      const double area = surrogate_integral(s, s.v_th - span, s.v_th + span, 200000);
      if (std::abs(area - 1.0) >= worst) {
        worst = std::abs(area - 1.0);
        where = to_string(kind) + " a=" + fmt("%g", a);
      }
    }
  return {worst <= 1e-3, "16 (kind, a) pairs, max |integral - 1| = " + fmt("%.2e", worst) + " at " + where +
                             " (<= 1e-3)"};
}

// 3. MNIST MLP.
Outcome mnist_desk_scale(const Context& ctx, Run& run) {
  const auto config = mnist_mlp(1, BackpropMode::Stbp, SurrogateKind::Rectangular);
  run = train_cached(ctx, run_name(config), config);
  const auto& s = run.summary;
  return {s.best_test_accuracy >= 0.96 && run.rows.size() == 10,
          "784-400-10, T=15, best test " + pct(s.best_test_accuracy) + " at epoch " + std::to_string(s.best_epoch) +
              " (>= 96.00% within 10 epochs), final " + pct(s.final_test_accuracy) + ", training " +
              fmt("%.0f s", run.seconds()) + (run.reused ? " (finished run reused)" : "")};
}

// 4. Temporal-path ablation.
Outcome td_ablation(const Context& ctx) {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto a = mnist_mlp(seed, BackpropMode::Stbp, SurrogateKind::Rectangular);
    const auto b = mnist_mlp(seed, BackpropMode::Sdbp, SurrogateKind::Rectangular);
    const double stbp = train_cached(ctx, run_name(a), a).summary.final_test_accuracy;
    const double sdbp = train_cached(ctx, run_name(b), b).summary.final_test_accuracy;
    wins += stbp >= sdbp;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": STBP " + pct(stbp) +
              " vs SDBP " + pct(sdbp);
  }
  return {wins >= 2, detail + " -> STBP >= SDBP in " + std::to_string(wins) + "/3 (majority needed)"};
}

// 5. Surrogate shape robustness.
Outcome surrogate_robustness(const Context& ctx) {
  double lo = 1.0, hi = 0.0;
  std::string detail;
  for (auto kind : {SurrogateKind::Rectangular, SurrogateKind::Triangular, SurrogateKind::Sigmoid,
                    SurrogateKind::Gaussian}) {
    const auto c = mnist_mlp(1, BackpropMode::Stbp, kind);
    const double acc = train_cached(ctx, run_name(c), c).summary.final_test_accuracy;
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
    detail += (detail.empty() ? "" : ", ") + to_string(kind) + " " + pct(acc);
  }
  return {hi - lo <= 0.01, detail + "; spread " + fmt("%.2f", 100.0 * (hi - lo)) + " pp (<= 1.00 pp)"};
}

// 6. Spiking CNN.
Outcome spiking_cnn(const Context& ctx) {
  const RunConfig c = resolve_config({{"dataset", "mnist"},
                                      {"architecture", "28x28x1-15C5-P2-40C5-P2-300-10"},
                                      {"encode.T", "10"},
                                      {"lif.v_th", "1.0"},
                                      {"lif.tau", "0.1"},
                                      {"init.gain", "2"},
                                      {"optim.kind", "adam"},
                                      {"optim.lr", "0.001"},
                                      {"surrogate.kind", "gaussian"},
                                      {"surrogate.a", "1"},
                                      {"train.batch_size", "100"},
                                      {"train.epochs", "15"},
                                      {"train.stop_accuracy", "0.9801"}});
  try {
    const Run run = train_cached(ctx, "mnist_cnn", c);
    const auto& s = run.summary;
    return {s.best_test_accuracy > 0.98,
            "15C5-P2-40C5-P2-300-10, T=10, best test " + pct(s.best_test_accuracy) + " at epoch " +
                std::to_string(s.best_epoch) + " (> 98.00% within 15 epochs), no numerical failure, training " +
                fmt("%.0f s", run.seconds()) + (run.reused ? " (finished run reused)" : "")};
  } catch (const NumericalError& e) {
    return {false, std::string("numerical failure: ") + e.what()};
  }
}

// Event count per cell against a direct scan of the stream.
bool conserves_counts(const EventStream& stream, std::size_t steps, double dt_ms, double offset_ms) {
  const SpikeTensor t = bin_events(stream, steps, dt_ms, offset_ms, BinMode::Count);
  if (t.steps != steps || !(t.shape == Shape3{34, 34, 2})) return false;
  std::vector<double> expected(t.data.size(), 0.0);
  for (const auto& e : stream.events) {
    const double ms = e.t_us / 1000.0 - offset_ms;
    if (ms < 0.0) continue;
    const auto bin = static_cast<std::size_t>(ms / dt_ms);
    if (bin >= steps) continue;
    expected[bin * t.shape.size() + t.shape.index(e.y, e.x, e.on ? 0 : 1)] += 1.0;
  }
  return expected == t.data;
}

// 7. N-MNIST pipeline.
Outcome nmnist_pipeline(const Context& ctx, const fs::path& data_root) {
  Outcome o;
  std::string official;
  bool official_ok = false;
  const fs::path dir = data_root / "nmnist";
  if (!fs::exists(dir / "Train") || !fs::exists(dir / "Test")) {
    official = "official files not found under " + dir.string() + ", decode check not run";
  } else {
    try {
      std::size_t files = 0, events = 0;
      bool conserved = true;
      for (const char* split : {"Train", "Test"}) {
        const auto set = load_nmnist_dir(dir / split);
        files += set.size();
        for (const auto& s : set.streams) {
          events += s.events.size();
          conserved = conserved && conserves_counts(s, 30, 10.0, 0.0);
        }
      }
      official_ok = conserved;
      official = std::to_string(files) + " official files decoded, " + std::to_string(events) +
                 " events, 0 coordinate violations, count conservation " + (conserved ? "exact" : "BROKEN");
    } catch (const Error& e) {
      official = std::string("official files rejected: ") + e.what();
    }
  }

  // Simulated streams exercise the same binning path.
  bool sim_ok = true;
  const auto images = gen_synthetic_detection(50, 3);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto s = simulate_saccades(images.image(i), i);
    sim_ok = sim_ok && conserves_counts(s, 30, 10.0, 0.0) && conserves_counts(s, 17, 3.0, 25.0) &&
             decode_nmnist(encode_nmnist(s)).events == s.events;
  }

  const RunConfig c = resolve_config({{"dataset", "nmnist-sim"},
                                      {"architecture", "34x34x2-400-400-10"},
                                      {"encode.T", "30"},
                                      {"encode.dt", "10"},
                                      {"lif.v_th", "0.5"},
                                      {"lif.tau", "0.2"},
                                      {"init.gain", "1"},
                                      {"optim.kind", "adam"},
                                      {"optim.lr", "0.001"},
                                      {"train.batch_size", "100"},
                                      {"train.epochs", "10"},
                                      {"train.stop_accuracy", "0.95"}});
  double best = 0.0;
  std::string train_note;
  try {
    const Run run = train_cached(ctx, "nmnist_sim_mlp", c);
    best = run.summary.best_test_accuracy;
    train_note = "simulated-saccade N-MNIST 34x34x2-400-400-10 best test " + pct(best) + " (>= 95%)" +
                 (run.reused ? " (finished run reused)" : "");
  } catch (const Error& e) {
    train_note = std::string("training failed: ") + e.what();
  }
  o.pass = official_ok && sim_ok && best >= 0.95;
  o.detail = official + "; simulated streams: shape 30x34x34x2 and conservation " + (sim_ok ? "exact" : "BROKEN") +
             "; " + train_note;
  return o;
}

// 8. Determinism across repeats and worker counts.
Outcome determinism(const Context& ctx) {
  const fs::path base = ctx.runs / "determinism";
  fs::remove_all(base);
  std::string detail;
  bool same = true;
  const std::vector<std::vector<Assignment>> configs = {
      {{"dataset", "synthetic"}, {"train.epochs", "2"}, {"train.train_limit", "300"}, {"train.test_limit", "100"},
       {"encode.T", "8"}},
      {{"dataset", "mnist"}, {"train.epochs", "2"}, {"train.train_limit", "400"}, {"train.test_limit", "200"},
       {"encode.T", "6"}, {"surrogate.kind", "gaussian"}},
      {{"dataset", "mnist"}, {"architecture", "28x28x1-4C5-P2-6C5-P2-20-10"}, {"train.epochs", "1"},
       {"train.train_limit", "200"}, {"train.test_limit", "100"}, {"encode.T", "4"}, {"optim.kind", "adam"},
       {"optim.lr", "0.001"}}};
  std::size_t idx = 0;
  for (const auto& assignments : configs) {
    std::vector<std::string> outputs;
    for (int workers : {1, 1, 4}) {
      RunConfig c = resolve_config(assignments);
      c.workers = workers;
      c.output_dir = (base / ("config" + std::to_string(idx) + "_" + std::to_string(outputs.size()))).string();
      cmd_train(c);
      outputs.push_back(slurp(fs::path(c.output_dir) / "metrics.csv") +
                        slurp(fs::path(c.output_dir) / "checkpoint_final.txt"));
    }
    const bool ok = outputs[0] == outputs[1] && outputs[0] == outputs[2];
    same = same && ok;
    detail += (detail.empty() ? "" : ", ") + resolve_config(assignments).dataset + "/" +
              resolve_config(assignments).architecture + (ok ? " identical" : " DIFFERS");
    ++idx;
  }
  fs::remove_all(base);
  return {same, "metrics.csv and final checkpoint over 2 runs at 1 worker + 1 run at 4 workers: " + detail};
}

// 9. Output raster after the criterion-3 run.
Outcome raster_behavior(const Run& trained) {
  const fs::path ckpt = trained.dir / "checkpoint_final.txt";
  if (!fs::exists(ckpt)) return {false, "no trained checkpoint at " + ckpt.string()};
  CheckpointMeta meta;
  const Network net = load_checkpoint(ckpt, &meta);
  RunConfig c = mnist_mlp(1, BackpropMode::Stbp, SurrogateKind::Rectangular);
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<std::size_t> pick(0, 9999);
  std::size_t hits = 0;
  for (int i = 0; i < 20; ++i) {
    const auto r = cmd_raster(net, c, pick(rng));
    const std::size_t own = r.counts[r.label];
    bool strict = true;
    for (std::size_t n = 0; n < r.counts.size(); ++n)
      if (n != r.label && r.counts[n] >= own) strict = false;
    hits += strict;
  }
  return {hits >= 17, "true-class output neuron strictly most active in " + std::to_string(hits) +
                          "/20 random test digits (>= 17)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  Context ctx;
  std::string runs = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--runs", runs, "directory holding training runs");
  app.add_flag("--fresh", ctx.fresh, "retrain even when a finished run exists");
  app.add_option("--workers", ctx.workers, "OpenMP workers for training (0: default)");
  app.add_option("--only", only, "criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  ctx.runs = runs;
  fs::create_directories(ctx.runs);

  const fs::path data_root = resolve_config({}).resolved_data_root();
  const auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  Run mnist_run;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradient_oracle},
      {2, surrogate_normalization},
      {3, [&] { return mnist_desk_scale(ctx, mnist_run); }},
      {4, [&] { return td_ablation(ctx); }},
      {5, [&] { return surrogate_robustness(ctx); }},
      {6, [&] { return spiking_cnn(ctx); }},
      {7, [&] { return nmnist_pipeline(ctx, data_root); }},
      {8, [&] { return determinism(ctx); }},
      {9, [&] {
         if (mnist_run.dir.empty()) mnist_desk_scale(ctx, mnist_run);
         return raster_behavior(mnist_run);
       }},
  };

  std::vector<std::string> lines;
  bool all = true;
  for (const auto& [n, check] : criteria) {
    if (!wanted(n)) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    const std::string line = std::string(o.pass ? "PASS" : "FAIL") + "  criterion " + std::to_string(n) + ": " + o.detail;
    std::cout << line << std::endl;
    lines.push_back(line);
  }
  std::cout << "\nsummary:\n";
  for (const auto& l : lines) std::cout << l.substr(0, l.find(':')) << '\n';
  return all ? 0 : 1;
}
