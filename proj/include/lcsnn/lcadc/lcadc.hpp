#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/format.hpp"

namespace lcsnn {

/// Behavioral configuration of the clocked level-crossing converter.
struct LcAdcConfig {
  double a_fs_mv = 10.0;
  int resolution_bits = 5;
  double clock_hz = 360.0;
  /// Record floor(|delta| / LSB) crossings per tick instead of one.
  bool multi_spike = false;
  /// Move the reference to the nearest quantization level instead of the
  /// present sample value.
  bool snap_to_level = false;

  void validate() const {
    if (!(a_fs_mv > 0.0)) throw ConfigError("a_fs_mv must be positive");
    if (resolution_bits < 1 || resolution_bits > 16)
      throw ConfigError("resolution_bits must lie in [1, 16]");
    if (!(clock_hz > 0.0)) throw ConfigError("clock_hz must be positive");
  }

  bool operator==(const LcAdcConfig &) const = default;
};

inline void to_json(nlohmann::json &j, const LcAdcConfig &c) {
  j = {{"a_fs_mv", c.a_fs_mv},
       {"resolution_bits", c.resolution_bits},
       {"clock_hz", c.clock_hz},
       {"multi_spike", c.multi_spike},
       {"snap_to_level", c.snap_to_level}};
}

inline void from_json(const nlohmann::json &j, LcAdcConfig &c) {
  c.a_fs_mv = j.value("a_fs_mv", 10.0);
  c.resolution_bits = j.value("resolution_bits", 5);
  c.clock_hz = j.value("clock_hz", 360.0);
  c.multi_spike = j.value("multi_spike", false);
  c.snap_to_level = j.value("snap_to_level", false);
}

/// Stable identifier of a configuration, used to key on-disk caches.
inline std::string config_hash(const LcAdcConfig &c) {
  return hex64(fnv1a(nlohmann::json(c).dump()));
}

inline double compute_lsb(const LcAdcConfig &c) {
  c.validate();
  return c.a_fs_mv / std::ldexp(1.0, c.resolution_bits);
}

/// REQ marks a crossing at a tick, DIR marks that it went upward. `crossings`
/// holds floor(|delta| / LSB) at each firing tick (0 elsewhere).
struct SpikeStreams {
  std::vector<std::uint8_t> req;
  std::vector<std::uint8_t> dir;
  std::vector<int> crossings;

  std::size_t size() const { return req.size(); }
};

/// Runs the converter over a Nyquist-rate waveform. The first sample is the
/// initial reference; tick i fires when |x[i] - ref| >= LSB, after which the
/// reference moves to x[i] (or to the nearest level in snap mode).
inline SpikeStreams sample(std::span<const double> signal_mv, const LcAdcConfig &config) {
  if (signal_mv.empty()) throw EmptyInput("level-crossing sampler needs at least one sample");
  const double lsb = compute_lsb(config);
  SpikeStreams s;
  s.req.assign(signal_mv.size(), 0);
  s.dir.assign(signal_mv.size(), 0);
  s.crossings.assign(signal_mv.size(), 0);
  double ref = signal_mv[0];
  if (config.snap_to_level) ref = std::round(ref / lsb) * lsb;
  for (std::size_t i = 1; i < signal_mv.size(); ++i) {
    const double delta = signal_mv[i] - ref;
    if (std::abs(delta) >= lsb) {
      s.req[i] = 1;
      s.dir[i] = delta > 0.0 ? 1 : 0;
      s.crossings[i] = static_cast<int>(std::floor(std::abs(delta) / lsb));
      ref = config.snap_to_level ? std::round(signal_mv[i] / lsb) * lsb : signal_mv[i];
    }
  }
  return s;
}

/// Signed per-tick spike values; {-1, 0, +1} unless multi_spike.
struct TernarySpikeTrain {
  std::vector<int> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const TernarySpikeTrain &) const = default;
};

inline TernarySpikeTrain merge_req_dir(const SpikeStreams &streams, const LcAdcConfig &config) {
  if (streams.req.size() != streams.dir.size())
    throw ShapeError("REQ and DIR streams differ in length");
  TernarySpikeTrain t;
  t.values.assign(streams.req.size(), 0);
  for (std::size_t i = 0; i < streams.req.size(); ++i) {
    if (!streams.req[i]) continue;
    int mag = 1;
    if (config.multi_spike && i < streams.crossings.size()) mag = std::max(1, streams.crossings[i]);
    t.values[i] = streams.dir[i] ? mag : -mag;
  }
  return t;
}

inline TernarySpikeTrain encode(std::span<const double> signal_mv, const LcAdcConfig &config) {
  return merge_req_dir(sample(signal_mv, config), config);
}

struct CompressionStats {
  std::size_t nyquist_points = 0;
  std::size_t spike_points = 0;
  double normalized_points = 0.0;
  double reduction = 0.0;
};

inline CompressionStats compression_stats(const TernarySpikeTrain &train) {
  if (train.values.empty()) throw EmptyInput("compression_stats needs a non-empty train");
  CompressionStats s;
  s.nyquist_points = train.values.size();
  for (int v : train.values) s.spike_points += v != 0 ? 1 : 0;
  s.normalized_points = static_cast<double>(s.spike_points) / static_cast<double>(s.nyquist_points);
  s.reduction = 1.0 - s.normalized_points;
  return s;
}

/// Pooled statistics: total spikes over total ticks.
inline CompressionStats aggregate(std::span<const CompressionStats> parts) {
  CompressionStats s;
  for (const auto &p : parts) {
    s.nyquist_points += p.nyquist_points;
    s.spike_points += p.spike_points;
  }
  if (s.nyquist_points > 0) {
    s.normalized_points = static_cast<double>(s.spike_points) / static_cast<double>(s.nyquist_points);
    s.reduction = 1.0 - s.normalized_points;
  }
  return s;
}

// Serialization -------------------------------------------------------------

/// Run-length form: {"length": n, "spikes": [[index, value], ...]}.
inline nlohmann::json train_to_json(const TernarySpikeTrain &t) {
  nlohmann::json spikes = nlohmann::json::array();
  for (std::size_t i = 0; i < t.values.size(); ++i)
    if (t.values[i] != 0) spikes.push_back({i, t.values[i]});
  return {{"length", t.values.size()}, {"spikes", std::move(spikes)}};
}

inline TernarySpikeTrain train_from_json(const nlohmann::json &j) {
  TernarySpikeTrain t;
  const auto n = j.at("length").get<std::size_t>();
  t.values.assign(n, 0);
  for (const auto &p : j.at("spikes")) {
    const auto idx = p.at(0).get<std::size_t>();
    if (idx >= n) throw ParseError("spike index " + std::to_string(idx) + " beyond length");
    t.values[idx] = p.at(1).get<int>();
  }
  return t;
}

/// Dense CSV form: one `index,value` row per tick.
inline std::string train_to_csv(const TernarySpikeTrain &t) {
  std::string out = "index,value\n";
  for (std::size_t i = 0; i < t.values.size(); ++i)
    out += std::to_string(i) + ',' + std::to_string(t.values[i]) + '\n';
  return out;
}

inline TernarySpikeTrain train_from_csv(std::string_view text) {
  TernarySpikeTrain t;
  for (const auto &row : parse_csv(text)) {
    if (row.size() < 2 || row[0] == "index") continue;
    const auto idx = static_cast<std::size_t>(parse_int(row[0]));
    if (idx != t.values.size()) throw ParseError("dense spike CSV rows out of order");
    t.values.push_back(static_cast<int>(parse_int(row[1])));
  }
  return t;
}

} // namespace lcsnn
