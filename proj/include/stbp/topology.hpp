#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stbp/kernels.hpp"
#include "stbp/lif.hpp"
#include "stbp/surrogate.hpp"
#include "stbp/tensor.hpp"

namespace stbp {

struct DenseLayer {
  kernels::DenseGeometry geom;
  std::vector<double> w;  // [out][in]
  std::vector<double> b;  // [out]
  LifParams lif;
};

struct ConvLayer {
  kernels::ConvGeometry geom;
  std::vector<double> w;  // [out_ch][in_ch][kh][kw]
  std::vector<double> b;  // [out_ch]
  LifParams lif;
};

/// Stateless spike averager unless `spiking` is set, in which case the
/// pooled activity is fed into LIF neurons as their input current.
struct AvgPoolLayer {
  kernels::PoolGeometry geom;
  bool spiking = false;
  LifParams lif;
};

using Layer = std::variant<DenseLayer, ConvLayer, AvgPoolLayer>;

Shape3 input_shape_of(const Layer& layer);
Shape3 output_shape_of(const Layer& layer);
/// True for layers that integrate potentials and fire (dense, conv, spiking pool).
bool is_spiking(const Layer& layer);
bool has_params(const Layer& layer);

struct NetworkOptions {
  LifParams lif;
  std::size_t time_steps = 30;
  bool spiking_pool = false;
};

struct Network {
  std::string architecture;
  Shape3 input_shape;
  std::size_t time_steps = 30;
  std::vector<Layer> layers;

  std::size_t num_classes() const;
  std::size_t parameter_count() const;
};

/// Parses "784-400-10" or "28x28x1-15C5-P2-40C5-P2-300-10" style strings.
/// Input dims are HxWxC; "kCn" is a k-channel n x n valid convolution, "Pn"
/// an n x n average pool, a bare integer a dense layer. Weights are zeroed.
Network build_network(std::string_view architecture, const NetworkOptions& options);

/// Rescales `row` to L2 norm `norm`; false (row untouched) if it is all zeros.
bool normalize_row(std::span<double> row, double norm = 1.0);

/// Uniform [-1, 1] weights with every dense row / conv output-channel slab
/// rescaled to unit L2 norm; zero biases. `gain` multiplies the normalized
/// rows, so each ends up with L2 norm `gain`.
void init_params(Network& net, std::uint64_t seed, double gain = 1.0);

enum class GateMode { Hard, Smooth };

struct ForwardOptions {
  GateMode gate = GateMode::Hard;
  // Smooth mode only: kind and width of the curve whose antiderivative
  // replaces the threshold. Centered on each layer's own v_th.
  SurrogateSpec surrogate;
  kernels::Backend backend = kernels::Backend::Fast;
};

struct LayerTrace {
  Shape3 shape;
  std::vector<double> x;  // input current per step, steps * size
  std::vector<double> u;  // potential per step (empty for stateless pools)
  std::vector<double> o;  // output per step

  std::span<const double> x_at(std::size_t t) const { return {x.data() + t * shape.size(), shape.size()}; }
  std::span<const double> u_at(std::size_t t) const { return {u.data() + t * shape.size(), shape.size()}; }
  std::span<const double> o_at(std::size_t t) const { return {o.data() + t * shape.size(), shape.size()}; }
};

struct Trace {
  std::size_t steps = 0;
  SpikeTensor input;
  std::vector<LayerTrace> layers;

  /// Output layer activity as a T x classes tensor.
  SpikeTensor output() const;
};

/// Per-layer recurrent state between steps.
struct NetworkState {
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> o;

  static NetworkState zeros(const Network& net);
};

/// Advances every layer by one time step. `scratch` receives each layer's
/// input current; returns nothing, outputs live in state.o.
void forward_step(const Network& net, NetworkState& state, std::span<const double> input, const ForwardOptions& options,
                  std::vector<std::vector<double>>& currents);

/// Runs the network over every step of `input`, keeping the full trace.
Trace forward_unroll(const Network& net, const SpikeTensor& input, const ForwardOptions& options = {});
void forward_unroll(const Network& net, const SpikeTensor& input, const ForwardOptions& options, Trace& trace);

/// argmax of mean output firing rate; ties go to the lowest index.
std::size_t predict(const Trace& trace);
std::size_t argmax_rate(std::span<const double> rates);

/// Text checkpoint with hex-float parameters (bit exact round trip).
struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
};
void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta = {});
Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace stbp
