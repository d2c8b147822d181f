#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcsnn/common/rng.hpp"
#include "lcsnn/ingest/wfdb.hpp"

namespace lcsnn {

/// Parameters of the synthetic two-channel ECG generator.
///
/// Each beat is a sum of Gaussian waves (P, Q, R, S, T) placed relative to
/// the R peak. Class morphologies:
///   N     normal P wave, narrow QRS, upright T
///   SVEB  premature, inverted early P, narrow QRS
///   VEB   premature, no P, wide tall QRS, inverted broad T, compensatory pause
///   F     per-beat blend of N and VEB shapes, mildly premature
/// A record adds slow baseline wander and white noise, then quantizes to
/// 11-bit counts with the MIT-BIH gain (200 counts/mV) and zero (1024).
struct SyntheticConfig {
  int num_records = 4;
  double duration_s = 300.0;
  int sampling_rate_hz = 360;
  std::uint64_t seed = 7;
  // Beat class mix for N, SVEB, VEB, F; a small Q share exercises exclusion.
  std::array<double, 4> class_weights = {0.55, 0.15, 0.15, 0.15};
  double q_weight = 0.002;
  double noise_mv = 0.012;
  double wander_mv = 0.12;
  int first_record_number = 100;
};

namespace detail {

struct Wave {
  double amp_mv, offset_s, width_s;
};

using Morphology = std::array<Wave, 5>;

inline Morphology normal_beat() {
  return {{{0.15, -0.20, 0.025}, {-0.12, -0.035, 0.010}, {1.10, 0.0, 0.011},
           {-0.25, 0.035, 0.011}, {0.30, 0.26, 0.045}}};
}

inline Morphology sveb_beat() {
  return {{{-0.12, -0.13, 0.020}, {-0.10, -0.033, 0.010}, {1.05, 0.0, 0.011},
           {-0.28, 0.035, 0.012}, {0.36, 0.24, 0.040}}};
}

inline Morphology veb_beat() {
  return {{{0.0, -0.20, 0.025}, {-0.20, -0.06, 0.025}, {1.45, 0.0, 0.032},
           {-0.55, 0.075, 0.030}, {-0.42, 0.30, 0.070}}};
}

inline Morphology blend(const Morphology &a, const Morphology &b, double alpha) {
  Morphology m{};
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = {alpha * a[i].amp_mv + (1 - alpha) * b[i].amp_mv,
            alpha * a[i].offset_s + (1 - alpha) * b[i].offset_s,
            alpha * a[i].width_s + (1 - alpha) * b[i].width_s};
  return m;
}

inline Morphology jitter(Morphology m, Rng &rng) {
  for (auto &w : m) {
    w.amp_mv *= rng.normal(1.0, 0.08);
    w.offset_s += rng.normal(0.0, 0.004);
    w.width_s = std::max(0.004, w.width_s * rng.normal(1.0, 0.08));
  }
  return m;
}

} // namespace detail

/// Generates record number `index` of the synthetic corpus.
inline EcgRecord generate_synthetic_record(const SyntheticConfig &cfg, int index) {
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  const double fs = cfg.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(cfg.duration_s * fs);

  EcgRecord rec;
  rec.record_id = std::to_string(cfg.first_record_number + index);
  rec.sampling_rate_hz = cfg.sampling_rate_hz;
  rec.channel_names = {"MLII", "V1"};

  const double base_rr = 60.0 / rng.uniform(60.0, 90.0);
  const double gain0 = rng.uniform(0.8, 1.25);
  const double gain1 = rng.uniform(0.3, 0.6);

  std::array<double, 5> cdf{};
  double total = cfg.q_weight;
  for (double w : cfg.class_weights) total += w;
  double acc = 0.0;
  for (std::size_t i = 0; i < 4; ++i) cdf[i] = (acc += cfg.class_weights[i] / total);
  cdf[4] = 1.0;

  std::vector<double> mv0(n, 0.0), mv1(n, 0.0);
  auto add_beat = [&](const detail::Morphology &m, double r_time, double scale, std::vector<double> &dst) {
    const auto lo = static_cast<std::int64_t>(std::floor((r_time - 0.6) * fs));
    const auto hi = static_cast<std::int64_t>(std::ceil((r_time + 0.8) * fs));
    for (std::int64_t i = std::max<std::int64_t>(lo, 0); i < std::min<std::int64_t>(hi, static_cast<std::int64_t>(n)); ++i) {
      const double t = i / fs - r_time;
      double v = 0.0;
      for (const auto &w : m) {
        const double z = (t - w.offset_s) / w.width_s;
        v += w.amp_mv * std::exp(-0.5 * z * z);
      }
      dst[static_cast<std::size_t>(i)] += scale * v;
    }
  };

  // Rhythm marker at the start, as in the MIT-BIH annotation files.
  rec.annotations.push_back({1, '+', AamiClass::NonBeat});

  double t = 0.4 + rng.uniform(0.0, base_rr);
  while (t < cfg.duration_s - 0.05) {
    const double u = rng.uniform01();
    std::size_t cls = 0;
    while (cls < 4 && u >= cdf[cls]) ++cls;

    double rr_factor = 1.0;
    char symbol = 'N';
    detail::Morphology m{};
    switch (cls) {
    case 0: m = detail::normal_beat(); symbol = 'N'; break;
    case 1: m = detail::sveb_beat(); symbol = 'A'; rr_factor = rng.uniform(0.6, 0.75); break;
    case 2: m = detail::veb_beat(); symbol = 'V'; rr_factor = rng.uniform(0.55, 0.7); break;
    case 3:
      m = detail::blend(detail::normal_beat(), detail::veb_beat(), rng.uniform(0.35, 0.65));
      symbol = 'F';
      rr_factor = rng.uniform(0.85, 0.95);
      break;
    default: m = detail::normal_beat(); symbol = 'Q'; break;
    }
    // Prematurity shortens the interval to this beat. A ventricular beat
    // keeps the sinus schedule (compensatory pause), others reset it.
    const double rr = base_rr * rng.normal(1.0, 0.03);
    const double shift = (1.0 - rr_factor) * rr;
    const double r_time = t - shift;
    m = detail::jitter(m, rng);
    add_beat(m, r_time, gain0, mv0);
    add_beat(m, r_time, gain1 * (symbol == 'V' ? -0.8 : 1.0), mv1);

    const auto idx = static_cast<std::int64_t>(std::lround(r_time * fs));
    if (idx > rec.annotations.back().sample_index && idx < static_cast<std::int64_t>(n))
      rec.annotations.push_back({idx, symbol, map_to_aami(symbol)});

    t = (symbol == 'V' ? t : r_time) + rr;
  }

  const double ph0 = rng.uniform(0.0, 6.283185307179586);
  const double ph1 = rng.uniform(0.0, 6.283185307179586);
  const double f0 = rng.uniform(0.15, 0.35);
  rec.channels[0].resize(n);
  rec.channels[1].resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tt = static_cast<double>(i) / fs;
    const double wander = cfg.wander_mv * std::sin(6.283185307179586 * f0 * tt + ph0) +
                          0.4 * cfg.wander_mv * std::sin(6.283185307179586 * 0.05 * tt + ph1);
    const double v0 = mv0[i] + wander + rng.normal(0.0, cfg.noise_mv);
    const double v1 = mv1[i] + 0.5 * wander + rng.normal(0.0, cfg.noise_mv);
    auto quantize = [&](double mv) {
      const long c = std::lround(mv * rec.adc_gain) + rec.adc_zero;
      return static_cast<int>(std::clamp<long>(c, 0, 2047));
    };
    rec.channels[0][i] = quantize(v0);
    rec.channels[1][i] = quantize(v1);
  }
  return rec;
}

/// Writes the whole synthetic corpus as WFDB records; returns the record ids.
inline std::vector<std::string> write_synthetic_corpus(const std::filesystem::path &dir,
                                                       const SyntheticConfig &cfg) {
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.num_records; ++i) {
    const auto rec = generate_synthetic_record(cfg, i);
    write_wfdb_record(dir, rec);
    ids.push_back(rec.record_id);
  }
  return ids;
}

} // namespace lcsnn
