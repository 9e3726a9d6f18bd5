#include "stbp/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "stbp/error.hpp"

namespace stbp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t parse_count(std::string_view token, std::string_view architecture) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value == 0) {
    throw ConfigError("architecture '" + std::string(architecture) + "': bad number '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

const LifParams* lif_of(const Layer& layer) {
  return std::visit(Overloaded{[](const DenseLayer& l) -> const LifParams* { return &l.lif; },
                               [](const ConvLayer& l) -> const LifParams* { return &l.lif; },
                               [](const AvgPoolLayer& l) -> const LifParams* { return l.spiking ? &l.lif : nullptr; }},
                    layer);
}

}  // namespace

Shape3 input_shape_of(const Layer& layer) {
  return std::visit(Overloaded{[](const DenseLayer& l) { return Shape3::flat(l.geom.in); },
                               [](const ConvLayer& l) { return l.geom.in; },
                               [](const AvgPoolLayer& l) { return l.geom.in; }},
                    layer);
}

Shape3 output_shape_of(const Layer& layer) {
  return std::visit(Overloaded{[](const DenseLayer& l) { return Shape3::flat(l.geom.out); },
                               [](const ConvLayer& l) { return l.geom.out(); },
                               [](const AvgPoolLayer& l) { return l.geom.out(); }},
                    layer);
}

bool is_spiking(const Layer& layer) { return lif_of(layer) != nullptr; }

bool has_params(const Layer& layer) { return !std::holds_alternative<AvgPoolLayer>(layer); }

std::size_t Network::num_classes() const { return layers.empty() ? 0 : output_shape_of(layers.back()).size(); }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) n += d->w.size() + d->b.size();
    if (const auto* c = std::get_if<ConvLayer>(&layer)) n += c->w.size() + c->b.size();
  }
  return n;
}

Network build_network(std::string_view architecture, const NetworkOptions& options) {
  options.lif.validate();
  if (options.time_steps == 0) throw ConfigError("time window must be at least one step");
  const auto tokens = split(architecture, '-');
  if (tokens.size() < 2) throw ConfigError("architecture '" + std::string(architecture) + "' needs an input and a layer");

  Network net;
  net.architecture = std::string(architecture);
  net.time_steps = options.time_steps;

  const auto dims = split(tokens[0], 'x');
  if (dims.size() == 1) {
    net.input_shape = Shape3::flat(parse_count(dims[0], architecture));
  } else if (dims.size() == 2 || dims.size() == 3) {
    net.input_shape = {parse_count(dims[0], architecture), parse_count(dims[1], architecture),
                       dims.size() == 3 ? parse_count(dims[2], architecture) : 1};
  } else {
    throw ConfigError("architecture '" + std::string(architecture) + "': bad input '" + std::string(tokens[0]) + "'");
  }

  Shape3 current = net.input_shape;
  for (std::size_t k = 1; k < tokens.size(); ++k) {
    const std::string_view tok = tokens[k];
    if (tok.empty()) throw ConfigError("architecture '" + std::string(architecture) + "': empty layer token");
    if (tok.front() == 'P') {
      AvgPoolLayer pool;
      pool.geom = {current, parse_count(tok.substr(1), architecture)};
      if (current.height % pool.geom.window != 0 || current.width % pool.geom.window != 0) {
        throw ShapeError("pool window " + std::to_string(pool.geom.window) + " does not divide " + current.str());
      }
      pool.spiking = options.spiking_pool;
      pool.lif = options.lif;
      current = pool.geom.out();
      net.layers.emplace_back(std::move(pool));
    } else if (const auto c = tok.find('C'); c != std::string_view::npos) {
      ConvLayer conv;
      const std::size_t k_size = parse_count(tok.substr(c + 1), architecture);
      conv.geom = {current, parse_count(tok.substr(0, c), architecture), k_size, k_size, 1};
      if (k_size > current.height || k_size > current.width) {
        throw ShapeError("kernel " + std::to_string(k_size) + " larger than input " + current.str());
      }
      conv.w.assign(conv.geom.weight_count(), 0.0);
      conv.b.assign(conv.geom.out_channels, 0.0);
      conv.lif = options.lif;
      current = conv.geom.out();
      net.layers.emplace_back(std::move(conv));
    } else {
      DenseLayer dense;
      dense.geom = {current.size(), parse_count(tok, architecture)};
      dense.w.assign(dense.geom.in * dense.geom.out, 0.0);
      dense.b.assign(dense.geom.out, 0.0);
      dense.lif = options.lif;
      current = Shape3::flat(dense.geom.out);
      net.layers.emplace_back(std::move(dense));
    }
  }
  if (!std::holds_alternative<DenseLayer>(net.layers.back())) {
    throw ConfigError("architecture '" + std::string(architecture) + "' must end with a dense layer");
  }
  return net;
}

namespace {

void fill_normalized_rows(std::vector<double>& w, std::size_t rows, std::size_t row_len, double gain,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::span<double> row(w.data() + r * row_len, row_len);
    // A zero row has probability zero; redraw if it ever happens.
    do {
      for (double& v : row) v = dist(rng);
    } while (!normalize_row(row, gain));
  }
}

}  // namespace

bool normalize_row(std::span<double> row, double norm) {
  double sq = 0.0;
  for (double v : row) sq += v * v;
  if (sq == 0.0) return false;
  const double scale = norm / std::sqrt(sq);
  for (double& v : row) v *= scale;
  return true;
}

void init_params(Network& net, std::uint64_t seed, double gain) {
  if (!(gain > 0.0) || !std::isfinite(gain)) throw ConfigError("init gain must be positive and finite");
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      fill_normalized_rows(d->w, d->geom.out, d->geom.in, gain, rng);
      std::fill(d->b.begin(), d->b.end(), 0.0);
    } else if (auto* c = std::get_if<ConvLayer>(&layer)) {
      fill_normalized_rows(c->w, c->geom.out_channels, c->geom.in.channels * c->geom.kernel_h * c->geom.kernel_w, gain,
                           rng);
      std::fill(c->b.begin(), c->b.end(), 0.0);
    }
  }
}

NetworkState NetworkState::zeros(const Network& net) {
  NetworkState s;
  for (const auto& layer : net.layers) {
    const std::size_t n = output_shape_of(layer).size();
    s.u.emplace_back(is_spiking(layer) ? n : 0, 0.0);
    s.o.emplace_back(n, 0.0);
  }
  return s;
}

namespace {

void integrate(std::vector<double>& u, std::vector<double>& o, std::span<const double> x, std::span<const double> bias,
               std::size_t bias_period, const LifParams& lif, const ForwardOptions& options) {
  SurrogateSpec spec = options.surrogate;
  spec.v_th = lif.v_th;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double b = bias.empty() ? 0.0 : bias[i % bias_period];
    const double v = u[i] * forget_gate(o[i], lif.tau) + x[i] + b;
    u[i] = v;
    o[i] = options.gate == GateMode::Hard ? spike_gate(v, lif.v_th) : smooth_gate(spec, v);
  }
}

}  // namespace

void forward_step(const Network& net, NetworkState& state, std::span<const double> input, const ForwardOptions& options,
                  std::vector<std::vector<double>>& currents) {
  if (input.size() != net.input_shape.size()) {
    throw ShapeError("input frame has " + std::to_string(input.size()) + " values, network expects " +
                     net.input_shape.str());
  }
  const bool fast = options.backend == kernels::Backend::Fast;
  currents.resize(net.layers.size());
  std::span<const double> in = input;
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    auto& x = currents[n];
    x.resize(state.o[n].size());
    std::visit(Overloaded{[&](const DenseLayer& l) {
                            fast ? kernels::dense_forward(l.geom, l.w, in, x)
                                 : kernels::reference::dense_forward(l.geom, l.w, in, x);
                            integrate(state.u[n], state.o[n], x, l.b, l.b.size(), l.lif, options);
                          },
                          [&](const ConvLayer& l) {
                            fast ? kernels::conv_forward(l.geom, l.w, in, x)
                                 : kernels::reference::conv_forward(l.geom, l.w, in, x);
                            integrate(state.u[n], state.o[n], x, l.b, l.b.size(), l.lif, options);
                          },
                          [&](const AvgPoolLayer& l) {
                            fast ? kernels::avgpool_forward(l.geom, in, x)
                                 : kernels::reference::avgpool_forward(l.geom, in, x);
                            if (l.spiking) {
                              integrate(state.u[n], state.o[n], x, {}, 1, l.lif, options);
                            } else {
                              std::copy(x.begin(), x.end(), state.o[n].begin());
                            }
                          }},
               net.layers[n]);
    in = state.o[n];
  }
}

void forward_unroll(const Network& net, const SpikeTensor& input, const ForwardOptions& options, Trace& trace) {
  if (input.shape != net.input_shape) {
    throw ShapeError("input shape " + input.shape.str() + " does not match network input " + net.input_shape.str());
  }
  const std::size_t steps = input.steps;
  trace.steps = steps;
  trace.input = input;
  trace.layers.resize(net.layers.size());
  NetworkState state = NetworkState::zeros(net);
  std::vector<std::vector<double>> currents;
  for (std::size_t n = 0; n < net.layers.size(); ++n) {
    auto& lt = trace.layers[n];
    lt.shape = output_shape_of(net.layers[n]);
    lt.x.assign(steps * lt.shape.size(), 0.0);
    lt.u.assign(is_spiking(net.layers[n]) ? steps * lt.shape.size() : 0, 0.0);
    lt.o.assign(steps * lt.shape.size(), 0.0);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    forward_step(net, state, input.step(t), options, currents);
    for (std::size_t n = 0; n < net.layers.size(); ++n) {
      auto& lt = trace.layers[n];
      const std::size_t size = lt.shape.size();
      std::copy(currents[n].begin(), currents[n].end(), lt.x.begin() + t * size);
      std::copy(state.o[n].begin(), state.o[n].end(), lt.o.begin() + t * size);
      if (!lt.u.empty()) std::copy(state.u[n].begin(), state.u[n].end(), lt.u.begin() + t * size);
    }
  }
}

Trace forward_unroll(const Network& net, const SpikeTensor& input, const ForwardOptions& options) {
  Trace trace;
  forward_unroll(net, input, options, trace);
  return trace;
}

SpikeTensor Trace::output() const {
  const auto& last = layers.back();
  SpikeTensor out(steps, last.shape);
  out.data = last.o;
  return out;
}

std::size_t argmax_rate(std::span<const double> rates) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (rates[i] > rates[best]) best = i;
  }
  return best;
}

std::size_t predict(const Trace& trace) {
  const auto rates = trace.output().mean_rate();
  return argmax_rate(rates);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kMagic = "stbp-checkpoint";
constexpr int kVersion = 1;

void write_values(std::ostream& os, std::string_view tag, const std::vector<double>& values) {
  os << tag << ' ' << values.size() << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << values[i] << ((i % 8 == 7 || i + 1 == values.size()) ? '\n' : ' ');
  }
}

void write_lif(std::ostream& os, const LifParams& lif) {
  os << " tau " << lif.tau << " v_th " << lif.v_th << " dt " << lif.dt;
}

class Reader {
 public:
  Reader(std::istream& is, std::filesystem::path path) : is_(is), path_(std::move(path)) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) fail("unexpected end of file");
    return w;
  }
  void expect(std::string_view w) {
    const std::string got = word();
    if (got != w) fail("expected '" + std::string(w) + "', found '" + got + "'");
  }
  std::size_t count() {
    const std::string w = word();
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad integer '" + w + "'");
    return v;
  }
  double real() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) fail("bad number '" + w + "'");
    return v;
  }
  LifParams lif() {
    LifParams p;
    expect("tau");
    p.tau = real();
    expect("v_th");
    p.v_th = real();
    expect("dt");
    p.dt = real();
    return p;
  }
  void values(std::string_view tag, std::vector<double>& out) {
    expect(tag);
    const std::size_t n = count();
    if (n != out.size()) fail(std::string(tag) + " has " + std::to_string(n) + " values, expected " + std::to_string(out.size()));
    for (double& v : out) v = real();
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(path_.string() + ": " + msg);
  }

 private:
  std::istream& is_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write checkpoint " + path.string());
  os << kMagic << ' ' << kVersion << '\n';
  os << "architecture " << net.architecture << '\n';
  os << "time_steps " << net.time_steps << '\n';
  os << "seed " << meta.seed << '\n';
  os << "config_hash " << (meta.config_hash.empty() ? "-" : meta.config_hash) << '\n';
  os << "layers " << net.layers.size() << '\n';
  os << std::hexfloat;
  for (const auto& layer : net.layers) {
    std::visit(Overloaded{[&](const DenseLayer& l) {
                            os << "layer dense " << l.geom.in << ' ' << l.geom.out;
                            write_lif(os, l.lif);
                            os << '\n';
                            write_values(os, "w", l.w);
                            write_values(os, "b", l.b);
                          },
                          [&](const ConvLayer& l) {
                            os << "layer conv " << l.geom.out_channels << ' ' << l.geom.kernel_h << ' '
                               << l.geom.kernel_w << ' ' << l.geom.stride;
                            write_lif(os, l.lif);
                            os << '\n';
                            write_values(os, "w", l.w);
                            write_values(os, "b", l.b);
                          },
                          [&](const AvgPoolLayer& l) {
                            os << "layer pool " << l.geom.window << ' ' << (l.spiking ? 1 : 0);
                            write_lif(os, l.lif);
                            os << '\n';
                          }},
               layer);
  }
  os << "end\n";
  if (!os) throw FormatError("failed writing checkpoint " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  Reader r(is, path);
  r.expect(kMagic);
  if (r.count() != kVersion) r.fail("unsupported checkpoint version");
  r.expect("architecture");
  const std::string arch = r.word();
  r.expect("time_steps");
  const std::size_t steps = r.count();
  r.expect("seed");
  CheckpointMeta m;
  m.seed = r.count();
  r.expect("config_hash");
  m.config_hash = r.word();
  if (m.config_hash == "-") m.config_hash.clear();
  r.expect("layers");
  const std::size_t n_layers = r.count();

  NetworkOptions opts;
  opts.time_steps = steps;
  Network net = build_network(arch, opts);
  if (net.layers.size() != n_layers) r.fail("layer count does not match architecture " + arch);

  for (auto& layer : net.layers) {
    r.expect("layer");
    const std::string kind = r.word();
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      if (kind != "dense") r.fail("expected dense layer, found " + kind);
      if (r.count() != d->geom.in || r.count() != d->geom.out) r.fail("dense layer dims disagree with architecture");
      d->lif = r.lif();
      r.values("w", d->w);
      r.values("b", d->b);
    } else if (auto* c = std::get_if<ConvLayer>(&layer)) {
      if (kind != "conv") r.fail("expected conv layer, found " + kind);
      const std::size_t oc = r.count(), kh = r.count(), kw = r.count(), stride = r.count();
      if (oc != c->geom.out_channels || kh != c->geom.kernel_h || kw != c->geom.kernel_w) {
        r.fail("conv layer dims disagree with architecture");
      }
      if (stride != 1) r.fail("only stride-1 convolutions are supported in checkpoints");
      c->lif = r.lif();
      r.values("w", c->w);
      r.values("b", c->b);
    } else if (auto* p = std::get_if<AvgPoolLayer>(&layer)) {
      if (kind != "pool") r.fail("expected pool layer, found " + kind);
      if (r.count() != p->geom.window) r.fail("pool window disagrees with architecture");
      p->spiking = r.count() != 0;
      p->lif = r.lif();
    }
  }
  r.expect("end");
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) d->lif.validate();
    if (const auto* c = std::get_if<ConvLayer>(&layer)) c->lif.validate();
  }
  if (meta) *meta = m;
  return net;
}

}  // namespace stbp
