#include "stbp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "stbp/encode.hpp"
#include "stbp/error.hpp"

namespace stbp {

double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

namespace {

ForwardOptions smooth_forward(const SurrogateSpec& surrogate) {
  ForwardOptions f;
  f.gate = GateMode::Smooth;
  f.surrogate = surrogate;
  return f;
}

// Distances from v_th at which the surrogate or its derivative jumps.
std::vector<double> kinks(const SurrogateSpec& s) {
  switch (s.kind) {
    case SurrogateKind::Rectangular:
      return {-s.a / 2.0, s.a / 2.0};
    case SurrogateKind::Triangular: {
      const double r = 2.0 / std::sqrt(s.a);
      return {-r, 0.0, r};
    }
    default:
      return {};
  }
}

double min_kink_distance(const Network& net, const Trace& trace, const SurrogateSpec& s) {
  const auto offsets = kinks(s);
  double best = std::numeric_limits<double>::infinity();
  if (offsets.empty()) return best;
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    if (!is_spiking(net.layers[n])) continue;
    const double v_th = std::visit([](const auto& l) { return l.lif.v_th; }, net.layers[n]);
    for (double u : trace.layers[n].u)
      for (double k : offsets) best = std::min(best, std::abs(u - v_th - k));
  }
  return best;
}

std::span<double> weights_of(Layer& layer) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) return d->w;
  if (auto* c = std::get_if<ConvLayer>(&layer)) return c->w;
  return {};
}

std::span<double> biases_of(Layer& layer) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) return d->b;
  if (auto* c = std::get_if<ConvLayer>(&layer)) return c->b;
  return {};
}

SurrogateSpec surrogate_of(const GradCheckConfig& c) {
  SurrogateSpec s;
  s.kind = c.kind;
  s.a = c.a;
  s.v_th = c.v_th;
  return s;
}

}  // namespace

double smooth_loss(const Network& net, std::span<const SpikeTensor> inputs, std::span<const std::size_t> labels,
                   const SurrogateSpec& surrogate) {
  const auto fwd = smooth_forward(surrogate);
  double total = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const Trace trace = forward_unroll(net, inputs[s], fwd);
    total += sample_loss(trace.output().mean_rate(), labels[s], inputs.size());
  }
  return total;
}

GradientSet finite_diff_grad(const Network& net, std::span<const SpikeTensor> inputs,
                             std::span<const std::size_t> labels, const SurrogateSpec& surrogate, double h) {
  Network work = net;
  GradientSet grads = GradientSet::zeros_like(net);
  auto differentiate = [&](std::span<double> params, std::vector<double>& out) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      out[i] = central_difference(
          [&](double v) {
            params[i] = v;
            return smooth_loss(work, inputs, labels, surrogate);
          },
          saved, h);
      params[i] = saved;
    }
  };
  for (std::size_t n = 0; n < work.layers.size(); ++n) {
    if (!has_params(work.layers[n])) continue;
    differentiate(weights_of(work.layers[n]), grads.layers[n].w);
    differentiate(biases_of(work.layers[n]), grads.layers[n].b);
  }
  return grads;
}

GradientSet analytic_grad(const Network& net, std::span<const SpikeTensor> inputs,
                          std::span<const std::size_t> labels, const BackwardOptions& options) {
  ForwardOptions fwd;
  fwd.gate = options.mode == BackpropMode::SmoothOracle ? GateMode::Smooth : GateMode::Hard;
  fwd.surrogate = options.surrogate;
  BackwardOptions bwd = options;
  bwd.batch_size = inputs.size();
  GradientSet grads = GradientSet::zeros_like(net);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const Trace trace = forward_unroll(net, inputs[s], fwd);
    backward(trace, labels[s], net, bwd, grads);
  }
  return grads;
}

std::string GradCheckConfig::to_string() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "arch=%s T=%zu kind=%s a=%.17g v_th=%.17g tau=%.17g seed=%llu data_seed=%llu batch=%zu h=%.17g "
                "threshold=%.17g",
                architecture.c_str(), steps, stbp::to_string(kind).c_str(), a, v_th, tau,
                static_cast<unsigned long long>(seed), static_cast<unsigned long long>(data_seed), batch, h,
                threshold);
  std::string line = buf;
  if (forget_derivative_scale != 1.0) {
    std::snprintf(buf, sizeof buf, " fd_scale=%.17g", forget_derivative_scale);
    line += buf;
  }
  return line;
}

GradCheckConfig GradCheckConfig::parse(std::string_view line) {
  GradCheckConfig c;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError("gradcheck replay: expected key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "arch") c.architecture = value;
      else if (key == "T") c.steps = std::stoul(value);
      else if (key == "kind") c.kind = parse_surrogate_kind(value);
      else if (key == "a") c.a = std::stod(value);
      else if (key == "v_th") c.v_th = std::stod(value);
      else if (key == "tau") c.tau = std::stod(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "data_seed") c.data_seed = std::stoull(value);
      else if (key == "batch") c.batch = std::stoul(value);
      else if (key == "h") c.h = std::stod(value);
      else if (key == "threshold") c.threshold = std::stod(value);
      else if (key == "fd_scale") c.forget_derivative_scale = std::stod(value);
      else throw ConfigError("gradcheck replay: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("gradcheck replay: bad value for '" + key + "': '" + value + "'");
    }
  }
  if (c.steps == 0 || c.batch == 0 || !(c.h > 0.0)) throw ConfigError("gradcheck replay: T, batch and h must be positive");
  return c;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream out;
  char buf[256];
  out << "config: " << config.to_string() << '\n';
  out << "parameters checked: " << checked << '\n';
  std::snprintf(buf, sizeof buf, "worst: layer %zu %s[%zu] analytic=%.12e numeric=%.12e rel_error=%.3e\n",
                worst.layer, worst.bias ? "b" : "w", worst.index, worst.analytic, worst.numeric, worst.rel_error);
  out << buf;
  std::snprintf(buf, sizeof buf, "kink distance: %.3e\n", kink_distance);
  out << buf;
  out << "result: " << (pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

GradCheckProblem make_problem(const GradCheckConfig& config) {
  NetworkOptions options;
  options.lif.v_th = config.v_th;
  options.lif.tau = config.tau;
  options.time_steps = config.steps;
  GradCheckProblem p{build_network(config.architecture, options), {}, {}};
  init_params(p.net, config.seed);

  std::mt19937_64 bias_rng(derive_seed(config.seed, 0xb1a5));
  std::uniform_real_distribution<double> bias(-0.2, 0.2);
  for (auto& layer : p.net.layers)
    for (double& b : biases_of(layer)) b = bias(bias_rng);

  std::mt19937_64 rng(config.data_seed);
  std::bernoulli_distribution fire(0.5);
  std::uniform_int_distribution<std::size_t> label(0, p.net.num_classes() - 1);
  for (std::size_t s = 0; s < config.batch; ++s) {
    SpikeTensor in(config.steps, p.net.input_shape);
    for (double& v : in.data) v = fire(rng) ? 1.0 : 0.0;
    p.inputs.push_back(std::move(in));
    p.labels.push_back(label(rng));
  }
  return p;
}

GradCheckReport check_gradients(const GradCheckConfig& config) {
  const GradCheckProblem p = make_problem(config);
  const SurrogateSpec surrogate = surrogate_of(config);

  BackwardOptions options;
  options.mode = BackpropMode::SmoothOracle;
  options.surrogate = surrogate;
  options.forget_derivative_scale = config.forget_derivative_scale;
  const GradientSet analytic = analytic_grad(p.net, p.inputs, p.labels, options);
  const GradientSet numeric = finite_diff_grad(p.net, p.inputs, p.labels, surrogate, config.h);

  GradCheckReport report;
  report.config = config;
  report.worst.rel_error = -1.0;
  auto compare = [&](std::size_t layer, bool bias, const std::vector<double>& a, const std::vector<double>& f) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double e = relative_error(a[i], f[i]);
      ++report.checked;
      if (e > report.worst.rel_error) report.worst = {layer, bias, i, a[i], f[i], e};
    }
  };
  for (std::size_t n = 0; n < analytic.layers.size(); ++n) {
    compare(n, false, analytic.layers[n].w, numeric.layers[n].w);
    compare(n, true, analytic.layers[n].b, numeric.layers[n].b);
  }

  double kink = std::numeric_limits<double>::infinity();
  for (const auto& in : p.inputs)
    kink = std::min(kink, min_kink_distance(p.net, forward_unroll(p.net, in, smooth_forward(surrogate)), surrogate));
  report.kink_distance = kink;
  report.pass = report.worst.rel_error <= config.threshold;
  return report;
}

std::vector<GradCheckConfig> sample_configs(std::size_t trials, std::uint64_t seed, double margin) {
  static constexpr std::size_t kSteps[] = {1, 2, 5, 6};
  static constexpr SurrogateKind kKinds[] = {SurrogateKind::Rectangular, SurrogateKind::Triangular,
                                             SurrogateKind::Sigmoid, SurrogateKind::Gaussian};
  static constexpr double kWidths[] = {0.5, 1.0, 2.0};
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  std::vector<GradCheckConfig> configs;
  for (std::size_t i = 0; i < trials; ++i) {
    GradCheckConfig c;
    std::string arch;
    if (i % 3 == 2) {
      const bool wide = pick(0, 1) == 1;
      arch = wide ? "6x6x2" : "6x6x1";
      arch += "-" + std::to_string(pick(1, 3)) + "C3";  // 4x4
      if (pick(0, 1) == 1) arch += "-P2";
      else arch += "-" + std::to_string(pick(1, 3)) + "C2";
      if (pick(0, 1) == 1) arch += "-" + std::to_string(pick(2, 10));
    } else {
      arch = std::to_string(pick(2, 10));
      const std::size_t hidden = pick(0, 3);
      for (std::size_t h = 0; h < hidden; ++h) arch += "-" + std::to_string(pick(2, 10));
    }
    arch += "-" + std::to_string(pick(2, 4));
    c.architecture = arch;
    c.steps = kSteps[pick(0, 3)];
    c.kind = kKinds[i % 4];
    c.a = kWidths[pick(0, 2)];
    c.v_th = uniform(0.3, 1.0);
    c.tau = uniform(0.1, 0.5);
    c.seed = rng();

    const SurrogateSpec surrogate = surrogate_of(c);
    for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
      c.data_seed = derive_seed(c.seed, attempt);
      const GradCheckProblem p = make_problem(c);
      double kink = std::numeric_limits<double>::infinity();
      for (const auto& in : p.inputs)
        kink = std::min(kink, min_kink_distance(p.net, forward_unroll(p.net, in, smooth_forward(surrogate)), surrogate));
      if (kink > margin) break;
    }
    configs.push_back(c);
  }
  return configs;
}

}  // namespace stbp
