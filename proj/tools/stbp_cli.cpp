#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stbp/error.hpp"
#include "stbp/harness.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "config file of 'key = value' lines");
    cmd->add_option("-s,--set", overrides, "override a config key, key=value (repeatable)");
  }
  stbp::RunConfig load() const { return stbp::load_config(file, overrides); }
};

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw stbp::Error("cannot write " + path);
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network training with spatio-temporal backpropagation"};
  app.require_subcommand(1);

  ConfigArgs train_args, eval_args, sweep_args, ablate_args, raster_args, dump_args;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "train a network; writes metrics, summary and checkpoints to output.dir");
  train_args.attach(train);
  train->add_flag("-q,--quiet", quiet, "no per-epoch progress on stderr");

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "test accuracy of a checkpoint");
  eval_args.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  std::size_t trials = 20;
  std::uint64_t gc_seed = 1;
  std::string replay, gc_out;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare backward-pass gradients with finite differences");
  gradcheck->add_option("--trials", trials, "number of random problems");
  gradcheck->add_option("--seed", gc_seed, "seed for problem sampling");
  gradcheck->add_option("--replay", replay, "re-run one problem from its report line");
  gradcheck->add_option("-o,--out", gc_out, "report file (default stdout)");

  std::string kinds = "rectangular,triangular,sigmoid,gaussian";
  std::string widths = "1.0";
  auto* sweep = app.add_subcommand("sweep-surrogate", "train once per surrogate kind and width");
  sweep_args.attach(sweep);
  sweep->add_option("--kinds", kinds, "comma-separated surrogate kinds");
  sweep->add_option("--widths", widths, "comma-separated widths a");

  auto* ablate = app.add_subcommand("ablate-td", "paired runs with and without the temporal gradient path");
  ablate_args.attach(ablate);

  std::size_t sample = 0;
  std::optional<std::size_t> layer;
  bool untrained = false, test_split = false;
  std::string out_path;
  auto* raster = app.add_subcommand("raster", "spike raster of one test sample");
  raster_args.attach(raster);
  auto* raster_ckpt = raster->add_option("--checkpoint", checkpoint, "trained checkpoint");
  raster->add_flag("--untrained", untrained, "use freshly initialized parameters instead")->excludes(raster_ckpt);
  raster->add_option("--sample", sample, "test sample index");
  raster->add_option("--layer", layer, "layer index (default: output layer)");
  raster->add_option("-o,--out", out_path, "output file (default stdout)");

  auto* dump = app.add_subcommand("encode-dump", "write the encoded input spikes of one sample");
  dump_args.attach(dump);
  dump->add_option("--sample", sample, "sample index");
  dump->add_flag("--test", test_split, "take the sample from the test split");
  dump->add_option("-o,--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (train->parsed()) {
      const auto config = train_args.load();
      const auto result = stbp::cmd_train(config, quiet ? nullptr : &std::cerr);
      std::cout << "final_test_accuracy " << result.summary.final_test_accuracy << "\nbest_test_accuracy "
                << result.summary.best_test_accuracy << "\noutput " << result.dir.string() << '\n';
    } else if (eval->parsed()) {
      std::cout << "test_accuracy " << stbp::cmd_eval(checkpoint, eval_args.load()) << '\n';
    } else if (gradcheck->parsed()) {
      if (!replay.empty()) {
        const auto report = stbp::check_gradients(stbp::GradCheckConfig::parse(replay));
        write_or_print(gc_out, report.to_text());
        return report.pass ? kOk : kNumerical;
      }
      const auto summary = stbp::cmd_gradcheck(trials, gc_seed);
      write_or_print(gc_out, summary.to_text());
      return summary.pass ? kOk : kNumerical;
    } else if (sweep->parsed()) {
      std::vector<stbp::SurrogateKind> kind_list;
      for (const auto& k : split_list(kinds)) kind_list.push_back(stbp::parse_surrogate_kind(k));
      std::vector<double> width_list;
      for (const auto& w : split_list(widths)) {
        try {
          width_list.push_back(std::stod(w));
        } catch (const std::exception&) {
          throw stbp::ConfigError("bad width '" + w + "'");
        }
      }
      const auto config = sweep_args.load();
      bool all_ok = true;
      for (const auto& e : stbp::cmd_sweep_surrogate(config, kind_list, width_list, &std::cerr)) {
        std::cout << stbp::to_string(e.kind) << " a=" << e.a << ' '
                  << (e.error.empty() ? "final " + std::to_string(e.summary.final_test_accuracy) : "failed: " + e.error)
                  << '\n';
        all_ok = all_ok && e.error.empty();
      }
      if (!all_ok) return kNumerical;
    } else if (ablate->parsed()) {
      const auto r = stbp::cmd_ablate_td(ablate_args.load(), &std::cerr);
      std::cout << "stbp " << r.stbp.summary.final_test_accuracy << "\nsdbp " << r.sdbp.summary.final_test_accuracy
                << '\n';
    } else if (raster->parsed()) {
      const auto config = raster_args.load();
      if (checkpoint.empty() && !untrained) throw stbp::ConfigError("raster needs --checkpoint or --untrained");
      const auto net = untrained ? stbp::make_network(config) : stbp::load_checkpoint(checkpoint);
      write_or_print(out_path, stbp::cmd_raster(net, config, sample, layer).to_text(config.hash()));
    } else if (dump->parsed()) {
      write_or_print(out_path, stbp::cmd_encode_dump(dump_args.load(), sample, test_split));
    }
  } catch (const stbp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const stbp::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const stbp::ShapeError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
