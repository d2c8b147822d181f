#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/bench/pipeline.hpp"
#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/format.hpp"
#include "lcsnn/ingest/dataset.hpp"
#include "lcsnn/lcadc/lcadc.hpp"
#include "lcsnn/snn/checkpoint.hpp"
#include "lcsnn/train/trainer.hpp"

namespace lcsnn {

struct SweepAxes {
  std::vector<int> resolution_bits = {5, 6, 7};
  std::vector<int> bin_factors = {1};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool amplitude_baseline = true; // SCNN fed Nyquist amplitudes
  bool cnn_baseline = true;
};

/// Everything a run depends on. Archived verbatim next to its outputs.
struct ExperimentConfig {
  std::string corpus_dir = "data/mitdb";
  std::vector<std::string> records; // empty: every record found
  int channel = 0;
  WindowGeometry window;
  std::size_t per_class = 800;
  std::uint64_t seed = 1;
  LcAdcConfig lcadc;
  std::string network_path; // empty: built-in default architecture
  int time_steps = 10;
  int bin_factor = 1;
  InputEncoding encoding = InputEncoding::LcAdc;
  bool train_cnn = false;
  TrainConfig train;
  SweepAxes sweep;
  std::vector<int> compress_bits = {5, 6, 7};
  std::vector<std::int64_t> complexity_steps = {1, 5, 10, 11, 20, 40, 80, 160, 320};
  std::string out_dir = "out";

  void validate() const {
    if (channel != 0 && channel != 1) throw ConfigError("channel must be 0 or 1");
    if (per_class == 0) throw ConfigError("per_class must be positive");
    if (time_steps <= 0) throw ConfigError("time_steps must be positive");
    if (bin_factor <= 0) throw ConfigError("bin_factor must be positive");
    lcadc.validate();
    train.validate();
    for (int b : compress_bits) LcAdcConfig{lcadc.a_fs_mv, b}.validate();
    for (int b : sweep.resolution_bits) LcAdcConfig{lcadc.a_fs_mv, b}.validate();
    for (int b : sweep.bin_factors)
      if (b <= 0) throw ConfigError("bin factors must be positive");
  }
};

inline nlohmann::json to_json(const SweepAxes &s) {
  return {{"resolution_bits", s.resolution_bits},
          {"bin_factors", s.bin_factors},
          {"seeds", s.seeds},
          {"amplitude_baseline", s.amplitude_baseline},
          {"cnn_baseline", s.cnn_baseline}};
}

inline nlohmann::json to_json(const ExperimentConfig &c) {
  nlohmann::json train = c.train;
  return {{"corpus_dir", c.corpus_dir},
          {"records", c.records},
          {"channel", c.channel},
          {"window", {{"pre", c.window.pre}, {"post", c.window.post}}},
          {"per_class", c.per_class},
          {"seed", c.seed},
          {"lcadc", c.lcadc},
          {"network", c.network_path},
          {"time_steps", c.time_steps},
          {"bin_factor", c.bin_factor},
          {"encoding", to_string(c.encoding)},
          {"train_cnn", c.train_cnn},
          {"train", train},
          {"sweep", to_json(c.sweep)},
          {"compress_bits", c.compress_bits},
          {"complexity_steps", c.complexity_steps},
          {"out_dir", c.out_dir}};
}

inline ExperimentConfig experiment_from_json(const nlohmann::json &j) {
  static const char *known[] = {"corpus_dir", "records", "channel", "window", "per_class", "seed",
                                "lcadc", "network", "time_steps", "bin_factor", "encoding", "train_cnn",
                                "train", "sweep", "compress_bits", "complexity_steps", "out_dir"};
  for (const auto &[k, v] : j.items())
    if (std::find(std::begin(known), std::end(known), k) == std::end(known))
      throw ConfigError("unknown config key '" + k + "'");
  ExperimentConfig c;
  try {
    c.corpus_dir = j.value("corpus_dir", c.corpus_dir);
    c.records = j.value("records", c.records);
    c.channel = j.value("channel", c.channel);
    if (j.contains("window")) {
      c.window.pre = j.at("window").value("pre", c.window.pre);
      c.window.post = j.at("window").value("post", c.window.post);
    }
    c.per_class = j.value("per_class", c.per_class);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lcadc")) c.lcadc = j.at("lcadc").get<LcAdcConfig>();
    c.network_path = j.value("network", c.network_path);
    c.time_steps = j.value("time_steps", c.time_steps);
    c.bin_factor = j.value("bin_factor", c.bin_factor);
    c.encoding = input_encoding_from_string(j.value("encoding", to_string(c.encoding)));
    c.train_cnn = j.value("train_cnn", c.train_cnn);
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    if (j.contains("sweep")) {
      const auto &s = j.at("sweep");
      c.sweep.resolution_bits = s.value("resolution_bits", c.sweep.resolution_bits);
      c.sweep.bin_factors = s.value("bin_factors", c.sweep.bin_factors);
      c.sweep.seeds = s.value("seeds", c.sweep.seeds);
      c.sweep.amplitude_baseline = s.value("amplitude_baseline", c.sweep.amplitude_baseline);
      c.sweep.cnn_baseline = s.value("cnn_baseline", c.sweep.cnn_baseline);
    }
    c.compress_bits = j.value("compress_bits", c.compress_bits);
    c.complexity_steps = j.value("complexity_steps", c.complexity_steps);
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path &p) {
  try {
    return experiment_from_json(nlohmann::json::parse(read_text(p)));
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline std::string config_fingerprint(const ExperimentConfig &c) { return hex64(fnv1a(to_json(c).dump())); }

/// The network to train for a given input length: the config's spec file
/// with its input geometry and step count overridden, or the default.
inline NetworkSpec experiment_network(const ExperimentConfig &c, int input_length) {
  if (c.network_path.empty()) return default_network(input_length, c.time_steps, 1);
  NetworkSpec spec = load_network_spec(c.network_path);
  if (spec.input_length != input_length)
    throw ShapeError("network expects input length " + std::to_string(spec.input_length) + ", data gives " +
                     std::to_string(input_length));
  spec.time_steps = c.time_steps;
  spec.validate();
  return spec;
}

} // namespace lcsnn
