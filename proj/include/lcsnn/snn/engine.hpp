#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/snn/kernels.hpp"
#include "lcsnn/snn/lif.hpp"
#include "lcsnn/snn/network.hpp"
#include "lcsnn/train/surrogate.hpp"

namespace lcsnn {

/// Spiking: LIF units emit hard {0,1} spikes.
/// Relaxed: LIF units emit surrogate_primitive(v - v_threshold) downstream
///   while the reset still uses the hard threshold; every path the backward
///   pass differentiates is then an ordinary function, which is what the
///   finite-difference checks compare against.
enum class ForwardMode { Spiking, Relaxed };

/// Architecture plus a flat parameter vector (layout per ParamLayout).
template <typename Real> struct Network {
  NetworkSpec spec;
  std::vector<Real> params;

  Network() = default;
  Network(NetworkSpec s, std::vector<Real> p) : spec(std::move(s)), params(std::move(p)) {
    spec.validate();
    if (params.size() != ParamLayout(spec).total)
      throw ShapeError("parameter count " + std::to_string(params.size()) + " does not match network (" +
                       std::to_string(ParamLayout(spec).total) + ")");
  }

  static Network initialized(NetworkSpec s, std::uint64_t seed) {
    auto p = init_params<Real>(s, seed);
    return Network(std::move(s), std::move(p));
  }
};

/// Per-layer geometry and transposed weights, rebuilt whenever the
/// parameters change.
template <typename Real> struct Prepared {
  struct Layer {
    LayerKind kind;
    Shape in_shape, out_shape;
    kernels::ConvGeom conv{};
    std::vector<Real> wt; // conv [k][in][out], fc [in][out]
    const Real *bias = nullptr;
  };
  std::vector<Layer> layers; // excludes the trailing spike counter
  int readout = -1;          // index of the layer feeding the counter

  explicit Prepared(const Network<Real> &net) {
    const auto &spec = net.spec;
    const auto shapes = spec.shapes();
    const ParamLayout layout(spec);
    Shape in{spec.input_channels, spec.input_length};
    for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
      const auto &ls = spec.layers[i];
      Layer l;
      l.kind = ls.kind;
      l.in_shape = in;
      l.out_shape = shapes[i];
      const auto &e = layout.entries[i];
      if (ls.kind == LayerKind::Conv1d) {
        l.conv = {in.length, in.channels, l.out_shape.length, ls.out_channels, ls.kernel, ls.stride, ls.padding};
        l.wt.assign(e.weight_count, Real(0));
        const Real *w = net.params.data() + e.weight_offset;
        for (int co = 0; co < ls.out_channels; ++co)
          for (int ci = 0; ci < ls.in_channels; ++ci)
            for (int k = 0; k < ls.kernel; ++k)
              l.wt[static_cast<std::size_t>((k * ls.in_channels + ci) * ls.out_channels + co)] =
                  w[(co * ls.in_channels + ci) * ls.kernel + k];
      } else if (ls.kind == LayerKind::FC) {
        l.wt.assign(e.weight_count, Real(0));
        const Real *w = net.params.data() + e.weight_offset;
        for (int o = 0; o < ls.out_features; ++o)
          for (int ii = 0; ii < ls.in_features; ++ii)
            l.wt[static_cast<std::size_t>(ii * ls.out_features + o)] = w[o * ls.in_features + ii];
      }
      if (e.bias_count) l.bias = net.params.data() + e.bias_offset;
      layers.push_back(std::move(l));
      in = shapes[i];
    }
    readout = static_cast<int>(layers.size()) - 1;
  }
};

/// Everything one sample's forward pass leaves behind for the backward pass.
template <typename Real> struct Trace {
  struct Step {
    std::vector<Real> u;               // pre-clamp potential (LIF) or pre-activation (ReLU)
    std::vector<Real> s;               // layer output
    std::vector<std::uint8_t> leaked;  // leak applied (LIF, WhenNoInput mode)
    std::vector<std::int32_t> argmax;  // pooling
  };
  std::vector<Real> input;
  std::vector<std::vector<Step>> steps; // [t][layer]
  std::vector<Real> output;             // spike counts, or logits for ReLU nets
  std::vector<double> spike_totals;     // per layer, summed over neurons and steps
};

namespace detail {

template <typename Real> bool is_ternary(std::span<const Real> x) {
  return std::all_of(x.begin(), x.end(), [](Real v) { return v == Real(0) || v == Real(1) || v == Real(-1); });
}

} // namespace detail

/// Runs the network over its time steps. The input ([length][channels],
/// position-major) is presented unchanged at every step; membrane state
/// starts at v_reset. Fills `trace` when given.
template <typename Real>
std::vector<Real> forward(const Network<Real> &net, const Prepared<Real> &prep, std::span<const Real> input,
                          ForwardMode mode, const SurrogateSpec &surrogate, Trace<Real> *trace = nullptr) {
  const auto &spec = net.spec;
  const int in_size = spec.input_channels * spec.input_length;
  if (static_cast<int>(input.size()) != in_size)
    throw ShapeError("input has " + std::to_string(input.size()) + " values, network expects " +
                     std::to_string(in_size));
  const bool lif = spec.activation == Activation::Lif;
  const int T = lif ? spec.time_steps : 1;
  const std::size_t L = prep.layers.size();
  const auto &p = spec.lif;
  const Real vr = static_cast<Real>(p.v_reset);
  const Real vth = static_cast<Real>(p.v_threshold);
  const bool gate_leak = spec.leak_mode == LeakMode::WhenNoInput;
  const bool input_spikes = detail::is_ternary(input);

  std::vector<std::vector<Real>> v(L), syn(L), local_s(L);
  std::vector<std::vector<std::int32_t>> local_arg(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto n = static_cast<std::size_t>(prep.layers[l].out_shape.size());
    if (prep.layers[l].kind != LayerKind::MaxPool1d) {
      v[l].assign(n, vr);
      syn[l].assign(n, Real(0));
    }
    local_s[l].assign(n, Real(0));
    local_arg[l].assign(n, 0);
  }
  const std::size_t n_out = static_cast<std::size_t>(prep.layers[prep.readout].out_shape.size());
  std::vector<Real> out(n_out, Real(0));

  if (trace) {
    trace->input.assign(input.begin(), input.end());
    trace->steps.resize(static_cast<std::size_t>(T));
    for (auto &st : trace->steps) st.resize(L);
    trace->spike_totals.assign(L, 0.0);
  }

  for (int t = 0; t < T; ++t) {
    const Real *cur = input.data();
    bool cur_spikes = input_spikes;
    for (std::size_t l = 0; l < L; ++l) {
      const auto &layer = prep.layers[l];
      const auto n = static_cast<std::size_t>(layer.out_shape.size());
      typename Trace<Real>::Step *st = trace ? &trace->steps[static_cast<std::size_t>(t)][l] : nullptr;
      Real *s_out;
      if (st) {
        st->s.resize(n);
        s_out = st->s.data();
      } else {
        s_out = local_s[l].data();
      }

      if (layer.kind == LayerKind::MaxPool1d) {
        const auto &ls = spec.layers[l];
        std::int32_t *arg = nullptr;
        if (st) {
          st->argmax.resize(n);
          arg = st->argmax.data();
        }
        kernels::maxpool_forward(cur, layer.in_shape.length, layer.in_shape.channels, ls.kernel, ls.stride,
                                 layer.out_shape.length, s_out, arg);
        cur = s_out;
        continue;
      }

      // Synaptic current. The network input is constant over time, so the
      // first layer's current is computed once.
      auto &I = syn[l];
      if (!(l == 0 && t > 0)) {
        std::fill(I.begin(), I.end(), Real(0));
        if (layer.kind == LayerKind::Conv1d) {
          if (cur_spikes)
            kernels::conv_forward<true>(cur, layer.wt.data(), layer.conv, I.data());
          else
            kernels::conv_forward<false>(cur, layer.wt.data(), layer.conv, I.data());
        } else {
          const int n_in = layer.in_shape.size();
          if (cur_spikes)
            kernels::fc_forward<true>(cur, n_in, layer.wt.data(), static_cast<int>(n), I.data());
          else
            kernels::fc_forward<false>(cur, n_in, layer.wt.data(), static_cast<int>(n), I.data());
        }
      }

      // Bias is per output channel; positions share it.
      const int channels = layer.out_shape.channels;
      if (st) {
        st->u.resize(n);
        if (lif && gate_leak) st->leaked.resize(n);
      }
      if (lif) {
        auto &vm = v[l];
        double fired = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          Real in_i = I[i];
          if (layer.bias) in_i += layer.bias[i % static_cast<std::size_t>(channels)];
          const auto r = lif_neuron_step<Real>(vm[i], in_i, p, spec.leak_mode, I[i] != Real(0));
          vm[i] = r.next;
          Real s;
          if (mode == ForwardMode::Spiking)
            s = r.spike ? Real(1) : Real(0);
          else
            s = surrogate.primitive<Real>(r.potential - vth);
          s_out[i] = s;
          fired += static_cast<double>(s);
          if (st) {
            st->u[i] = r.pre_clamp;
            if (gate_leak) st->leaked[i] = (I[i] == Real(0)) ? 1 : 0;
          }
        }
        if (trace) trace->spike_totals[l] += fired;
        cur_spikes = mode == ForwardMode::Spiking;
        for (std::size_t i = 0; cur_spikes && i < n; ++i) assert(s_out[i] == Real(0) || s_out[i] == Real(1));
      } else {
        const bool is_readout = static_cast<int>(l) == prep.readout;
        for (std::size_t i = 0; i < n; ++i) {
          Real a = I[i];
          if (layer.bias) a += layer.bias[i % static_cast<std::size_t>(channels)];
          if (st) st->u[i] = a;
          s_out[i] = is_readout ? a : std::max(a, Real(0));
        }
        cur_spikes = false;
      }
      cur = s_out;
    }
    for (std::size_t i = 0; i < n_out; ++i) out[i] += cur[i];
  }
  (void)vr;
  if (trace) trace->output = out;
  return out;
}

/// Argmax with ties going to the lowest index.
template <typename T> int spike_counter_classify(std::span<const T> counts) {
  if (counts.empty()) throw ShapeError("no class counts");
  int best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// Channel-major views ----------------------------------------------------------

/// Signed spike tensor indexed [channel][position].
struct SpikeTensor {
  int channels = 1;
  int length = 0;
  std::vector<std::int8_t> values;

  SpikeTensor() = default;
  SpikeTensor(int c, int l) : channels(c), length(l), values(static_cast<std::size_t>(c * l), 0) {}

  std::int8_t &at(int c, int x) { return values[static_cast<std::size_t>(c * length + x)]; }
  std::int8_t at(int c, int x) const { return values[static_cast<std::size_t>(c * length + x)]; }
};

/// Position-major copy of a channel-major tensor.
template <typename Real, typename T>
std::vector<Real> to_position_major(std::span<const T> channel_major, int channels, int length) {
  std::vector<Real> out(static_cast<std::size_t>(channels * length));
  for (int c = 0; c < channels; ++c)
    for (int x = 0; x < length; ++x)
      out[static_cast<std::size_t>(x * channels + c)] = static_cast<Real>(channel_major[static_cast<std::size_t>(c * length + x)]);
  return out;
}

/// Weighted sums of one convolution layer over a spike tensor, by
/// conditional accumulation. `weights` is [out][in][k] and `bias` is either
/// empty or one value per output channel. Returns [out_channel][position].
inline std::vector<double> conv1d_spiking_forward(const SpikeTensor &input, const LayerSpec &layer,
                                                  std::span<const double> weights,
                                                  std::span<const double> bias = {}) {
  if (layer.kind != LayerKind::Conv1d) throw ShapeError("not a convolution layer");
  if (input.channels != layer.in_channels)
    throw ShapeError("input has " + std::to_string(input.channels) + " channels, layer expects " +
                     std::to_string(layer.in_channels));
  if (weights.size() != static_cast<std::size_t>(layer.out_channels * layer.in_channels * layer.kernel))
    throw ShapeError("weight tensor does not match layer dimensions");
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(layer.out_channels))
    throw ShapeError("bias does not match output channels");
  for (auto v : input.values)
    if (v < -1 || v > 1) throw ShapeError("spike tensor values must lie in {-1, 0, 1}");
  const int out_len = (input.length + 2 * layer.padding - layer.kernel) / layer.stride + 1;
  if (out_len <= 0) throw ShapeError("input shorter than kernel");

  std::vector<double> wt(weights.size());
  for (int co = 0; co < layer.out_channels; ++co)
    for (int ci = 0; ci < layer.in_channels; ++ci)
      for (int k = 0; k < layer.kernel; ++k)
        wt[static_cast<std::size_t>((k * layer.in_channels + ci) * layer.out_channels + co)] =
            weights[static_cast<std::size_t>((co * layer.in_channels + ci) * layer.kernel + k)];
  const auto in = to_position_major<double, std::int8_t>(input.values, input.channels, input.length);
  std::vector<double> acc(static_cast<std::size_t>(out_len * layer.out_channels), 0.0);
  const kernels::ConvGeom g{input.length, input.channels, out_len, layer.out_channels,
                            layer.kernel, layer.stride, layer.padding};
  kernels::conv_forward<true>(in.data(), wt.data(), g, acc.data());

  std::vector<double> out(acc.size());
  for (int co = 0; co < layer.out_channels; ++co)
    for (int x = 0; x < out_len; ++x)
      out[static_cast<std::size_t>(co * out_len + x)] =
          acc[static_cast<std::size_t>(x * layer.out_channels + co)] + (bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)]);
  return out;
}

/// Binary max-pooling over a [channel][position] tensor.
inline SpikeTensor maxpool_forward(const SpikeTensor &input, const LayerSpec &layer) {
  if (layer.kind != LayerKind::MaxPool1d) throw ShapeError("not a pooling layer");
  if (input.length < layer.kernel) throw ShapeError("input shorter than pooling kernel");
  const int out_len = (input.length - layer.kernel) / layer.stride + 1;
  const auto in = to_position_major<double, std::int8_t>(input.values, input.channels, input.length);
  std::vector<double> out(static_cast<std::size_t>(out_len * input.channels));
  kernels::maxpool_forward(in.data(), input.length, input.channels, layer.kernel, layer.stride, out_len,
                           out.data(), static_cast<std::int32_t *>(nullptr));
  SpikeTensor r(input.channels, out_len);
  for (int c = 0; c < input.channels; ++c)
    for (int x = 0; x < out_len; ++x)
      r.at(c, x) = static_cast<std::int8_t>(out[static_cast<std::size_t>(x * input.channels + c)]);
  return r;
}

/// Spike counts per class for a single-channel spike train presented over
/// the network's time steps.
inline std::vector<int> network_forward(std::span<const int> spike_train, const Network<float> &net) {
  if (net.spec.activation != Activation::Lif) throw ShapeError("network_forward needs a spiking network");
  if (net.spec.input_channels != 1) throw ShapeError("network_forward takes a single-channel train");
  std::vector<float> x(spike_train.begin(), spike_train.end());
  const Prepared<float> prep(net);
  const auto out = forward<float>(net, prep, x, ForwardMode::Spiking, SurrogateSpec{});
  std::vector<int> counts(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) counts[i] = static_cast<int>(out[i]);
  return counts;
}

} // namespace lcsnn
