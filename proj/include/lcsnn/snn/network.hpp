#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/rng.hpp"

namespace lcsnn {

/// Neuron constants shared by every LIF unit of a network.
struct LifParams {
  double v_threshold = 1.0;
  double v_reset = 0.0;
  double delta_v = 0.01;

  void validate() const {
    if (!(v_threshold > v_reset)) throw ConfigError("v_threshold must exceed v_reset");
    if (!(delta_v >= 0.0)) throw ConfigError("delta_v must be non-negative");
  }
  bool operator==(const LifParams &) const = default;
};

/// Always: the leak is subtracted every step, as in the membrane update
/// equation. WhenNoInput: only on steps whose synaptic input is exactly zero.
enum class LeakMode { Always, WhenNoInput };

enum class Activation { Lif, Relu };

enum class LayerKind { Conv1d, MaxPool1d, FC, SpikeCounter };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv1d;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  int in_channels = 0;
  int out_channels = 0;
  int in_features = 0;
  int out_features = 0;
  int num_classes = 0;

  bool has_params() const { return kind == LayerKind::Conv1d || kind == LayerKind::FC; }

  static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride = 1, int padding = 0) {
    LayerSpec l;
    l.kind = LayerKind::Conv1d;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    return l;
  }
  static LayerSpec pool(int kernel, int stride) {
    LayerSpec l;
    l.kind = LayerKind::MaxPool1d;
    l.kernel = kernel;
    l.stride = stride;
    return l;
  }
  static LayerSpec fc(int in_f, int out_f) {
    LayerSpec l;
    l.kind = LayerKind::FC;
    l.in_features = in_f;
    l.out_features = out_f;
    return l;
  }
  static LayerSpec counter(int classes) {
    LayerSpec l;
    l.kind = LayerKind::SpikeCounter;
    l.num_classes = classes;
    return l;
  }
};

/// Activation shape: `channels` x `length`; FC outputs have length 1.
struct Shape {
  int channels = 1;
  int length = 1;
  int size() const { return channels * length; }
};

struct NetworkSpec {
  int input_channels = 1;
  int input_length = 320;
  int time_steps = 10;
  LifParams lif;
  LeakMode leak_mode = LeakMode::Always;
  Activation activation = Activation::Lif;
  bool bias = false;
  std::vector<LayerSpec> layers;

  int num_classes() const {
    return layers.empty() ? 0 : layers.back().num_classes;
  }

  /// Output shape of every layer, checking that consecutive layers agree.
  std::vector<Shape> shapes() const {
    std::vector<Shape> out;
    Shape cur{input_channels, input_length};
    bool flat = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto &l = layers[i];
      const std::string where = "layer " + std::to_string(i) + ": ";
      switch (l.kind) {
      case LayerKind::Conv1d: {
        if (flat) throw ShapeError(where + "convolution after a fully-connected layer");
        if (l.in_channels != cur.channels)
          throw ShapeError(where + "expects " + std::to_string(l.in_channels) + " channels, gets " +
                           std::to_string(cur.channels));
        if (l.kernel <= 0 || l.stride <= 0 || l.padding < 0 || l.out_channels <= 0)
          throw ShapeError(where + "bad convolution geometry");
        const int len = (cur.length + 2 * l.padding - l.kernel) / l.stride + 1;
        if (len <= 0) throw ShapeError(where + "input shorter than kernel");
        cur = {l.out_channels, len};
        break;
      }
      case LayerKind::MaxPool1d: {
        if (flat) throw ShapeError(where + "pooling after a fully-connected layer");
        if (l.kernel <= 0 || l.stride <= 0) throw ShapeError(where + "bad pooling geometry");
        if (cur.length < l.kernel) throw ShapeError(where + "input shorter than pooling kernel");
        cur = {cur.channels, (cur.length - l.kernel) / l.stride + 1};
        break;
      }
      case LayerKind::FC:
        if (l.in_features != cur.size())
          throw ShapeError(where + "expects " + std::to_string(l.in_features) + " features, gets " +
                           std::to_string(cur.size()));
        if (l.out_features <= 0) throw ShapeError(where + "bad output width");
        cur = {l.out_features, 1};
        flat = true;
        break;
      case LayerKind::SpikeCounter:
        if (i + 1 != layers.size()) throw ShapeError(where + "spike counter must be the last layer");
        if (l.num_classes != cur.size())
          throw ShapeError(where + "counts " + std::to_string(l.num_classes) + " classes from " +
                           std::to_string(cur.size()) + " outputs");
        break;
      }
      out.push_back(cur);
    }
    return out;
  }

  void validate() const {
    lif.validate();
    if (time_steps <= 0) throw ConfigError("time_steps must be positive");
    if (input_channels <= 0 || input_length <= 0) throw ConfigError("bad input shape");
    if (layers.empty() || layers.back().kind != LayerKind::SpikeCounter)
      throw ShapeError("network must end with a spike counter");
    if (layers.size() < 2 || !layers[layers.size() - 2].has_params())
      throw ShapeError("spike counter must read a convolution or fully-connected layer");
    (void)shapes();
  }
};

/// Default SCNN: five 'same' convolutions (8, 16, 16, 32, 32 channels,
/// kernel 3), 2x max-pooling after the second and fourth, then FC 64 and an
/// FC readout into the 4-class spike counter.
inline NetworkSpec default_network(int input_length = 320, int time_steps = 10, int input_channels = 1) {
  NetworkSpec n;
  n.input_channels = input_channels;
  n.input_length = input_length;
  n.time_steps = time_steps;
  const int ch[5] = {8, 16, 16, 32, 32};
  int in = input_channels;
  int len = input_length;
  for (int i = 0; i < 5; ++i) {
    n.layers.push_back(LayerSpec::conv(in, ch[i], 3, 1, 1));
    in = ch[i];
    if (i == 1 || i == 3) {
      n.layers.push_back(LayerSpec::pool(2, 2));
      len = (len - 2) / 2 + 1;
    }
  }
  n.layers.push_back(LayerSpec::fc(in * len, 64));
  n.layers.push_back(LayerSpec::fc(64, 4));
  n.layers.push_back(LayerSpec::counter(4));
  return n;
}

/// The conventional CNN with the same layer shapes: ReLU activations, biases,
/// a linear readout and a single pass (no time steps).
inline NetworkSpec mirror_as_cnn(NetworkSpec spec) {
  spec.activation = Activation::Relu;
  spec.bias = true;
  spec.time_steps = 1;
  return spec;
}

/// Offsets of each layer's weights and biases inside one flat parameter
/// vector. Conv weights are [out][in][k], FC weights [out][in], each followed
/// by its bias (when enabled).
struct ParamLayout {
  struct Entry {
    std::size_t weight_offset = 0, weight_count = 0;
    std::size_t bias_offset = 0, bias_count = 0;
    std::size_t fan_in = 0;
  };
  std::vector<Entry> entries; // one per layer, empty for non-parametric
  std::size_t total = 0;

  explicit ParamLayout(const NetworkSpec &spec) {
    entries.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const auto &l = spec.layers[i];
      auto &e = entries[i];
      if (l.kind == LayerKind::Conv1d) {
        e.weight_count = static_cast<std::size_t>(l.out_channels) * static_cast<std::size_t>(l.in_channels) *
                         static_cast<std::size_t>(l.kernel);
        e.bias_count = spec.bias ? static_cast<std::size_t>(l.out_channels) : 0;
        e.fan_in = static_cast<std::size_t>(l.in_channels) * static_cast<std::size_t>(l.kernel);
      } else if (l.kind == LayerKind::FC) {
        e.weight_count = static_cast<std::size_t>(l.out_features) * static_cast<std::size_t>(l.in_features);
        e.bias_count = spec.bias ? static_cast<std::size_t>(l.out_features) : 0;
        e.fan_in = static_cast<std::size_t>(l.in_features);
      }
      e.weight_offset = total;
      total += e.weight_count;
      e.bias_offset = total;
      total += e.bias_count;
    }
  }
};

/// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases.
template <typename Real>
std::vector<Real> init_params(const NetworkSpec &spec, std::uint64_t seed) {
  const ParamLayout layout(spec);
  std::vector<Real> p(layout.total, Real(0));
  Rng rng(seed);
  for (const auto &e : layout.entries) {
    if (e.weight_count == 0) continue;
    const double bound = std::sqrt(1.0 / static_cast<double>(e.fan_in));
    for (std::size_t i = 0; i < e.weight_count; ++i)
      p[e.weight_offset + i] = static_cast<Real>(rng.uniform(-bound, bound));
  }
  return p;
}

// JSON ----------------------------------------------------------------------

inline std::string to_string(LayerKind k) {
  switch (k) {
  case LayerKind::Conv1d: return "conv1d";
  case LayerKind::MaxPool1d: return "maxpool1d";
  case LayerKind::FC: return "fc";
  case LayerKind::SpikeCounter: return "spike_counter";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string &s) {
  if (s == "conv1d") return LayerKind::Conv1d;
  if (s == "maxpool1d") return LayerKind::MaxPool1d;
  if (s == "fc") return LayerKind::FC;
  if (s == "spike_counter") return LayerKind::SpikeCounter;
  throw ParseError("unknown layer kind '" + s + "'");
}

inline nlohmann::json to_json(const LayerSpec &l) {
  nlohmann::json j{{"kind", to_string(l.kind)}};
  switch (l.kind) {
  case LayerKind::Conv1d:
    j.update({{"in_channels", l.in_channels}, {"out_channels", l.out_channels},
              {"kernel", l.kernel}, {"stride", l.stride}, {"padding", l.padding}});
    break;
  case LayerKind::MaxPool1d:
    j.update({{"kernel", l.kernel}, {"stride", l.stride}});
    break;
  case LayerKind::FC:
    j.update({{"in_features", l.in_features}, {"out_features", l.out_features}});
    break;
  case LayerKind::SpikeCounter:
    j["num_classes"] = l.num_classes;
    break;
  }
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json &j) {
  LayerSpec l;
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  l.kernel = j.value("kernel", 3);
  l.stride = j.value("stride", 1);
  l.padding = j.value("padding", 0);
  l.in_channels = j.value("in_channels", 0);
  l.out_channels = j.value("out_channels", 0);
  l.in_features = j.value("in_features", 0);
  l.out_features = j.value("out_features", 0);
  l.num_classes = j.value("num_classes", 0);
  return l;
}

inline nlohmann::json to_json(const NetworkSpec &n) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto &l : n.layers) layers.push_back(to_json(l));
  return {{"format", "lcsnn-network"},
          {"version", 1},
          {"input_channels", n.input_channels},
          {"input_length", n.input_length},
          {"time_steps", n.time_steps},
          {"activation", n.activation == Activation::Lif ? "lif" : "relu"},
          {"bias", n.bias},
          {"lif",
           {{"v_threshold", n.lif.v_threshold},
            {"v_reset", n.lif.v_reset},
            {"delta_v", n.lif.delta_v},
            {"leak_mode", n.leak_mode == LeakMode::Always ? "always" : "when_no_input"}}},
          {"layers", std::move(layers)}};
}

inline NetworkSpec network_from_json(const nlohmann::json &j) {
  if (j.value("format", std::string("lcsnn-network")) != "lcsnn-network")
    throw ParseError("not a network description");
  if (j.value("version", 1) != 1) throw UnsupportedFormat("network description version " + j.at("version").dump());
  NetworkSpec n;
  n.input_channels = j.value("input_channels", 1);
  n.input_length = j.at("input_length").get<int>();
  n.time_steps = j.value("time_steps", 10);
  const auto act = j.value("activation", std::string("lif"));
  if (act != "lif" && act != "relu") throw ParseError("unknown activation '" + act + "'");
  n.activation = act == "lif" ? Activation::Lif : Activation::Relu;
  n.bias = j.value("bias", false);
  if (j.contains("lif")) {
    const auto &l = j.at("lif");
    n.lif.v_threshold = l.value("v_threshold", 1.0);
    n.lif.v_reset = l.value("v_reset", 0.0);
    n.lif.delta_v = l.value("delta_v", 0.01);
    const auto mode = l.value("leak_mode", std::string("always"));
    if (mode != "always" && mode != "when_no_input") throw ParseError("unknown leak_mode '" + mode + "'");
    n.leak_mode = mode == "always" ? LeakMode::Always : LeakMode::WhenNoInput;
  }
  for (const auto &l : j.at("layers")) n.layers.push_back(layer_from_json(l));
  n.validate();
  return n;
}

} // namespace lcsnn
