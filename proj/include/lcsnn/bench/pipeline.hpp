#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/ingest/dataset.hpp"
#include "lcsnn/lcadc/lcadc.hpp"
#include "lcsnn/train/trainer.hpp"

namespace lcsnn {

/// What the network sees for one beat window.
enum class InputEncoding {
  LcAdc,    // ternary level-crossing spikes, window-local reference
  Amplitude // Nyquist samples in mV
};

inline std::string to_string(InputEncoding e) { return e == InputEncoding::LcAdc ? "lcadc" : "amplitude"; }

inline InputEncoding input_encoding_from_string(const std::string &s) {
  if (s == "lcadc") return InputEncoding::LcAdc;
  if (s == "amplitude") return InputEncoding::Amplitude;
  throw ConfigError("unknown input encoding '" + s + "'");
}

/// Merges each run of `bin` ticks into one value: the signed spike sum
/// clamped to {-1, 0, +1}. A trailing partial bin is dropped.
inline std::vector<int> bin_spikes(std::span<const int> values, int bin) {
  if (bin <= 0) throw ConfigError("bin factor must be positive");
  std::vector<int> out(values.size() / static_cast<std::size_t>(bin));
  for (std::size_t i = 0; i < out.size(); ++i) {
    int s = 0;
    for (int k = 0; k < bin; ++k) s += values[i * static_cast<std::size_t>(bin) + static_cast<std::size_t>(k)];
    out[i] = std::clamp(s, -1, 1);
  }
  return out;
}

/// Amplitude counterpart of bin_spikes: mean of each run.
inline std::vector<double> bin_amplitude(std::span<const double> values, int bin) {
  if (bin <= 0) throw ConfigError("bin factor must be positive");
  std::vector<double> out(values.size() / static_cast<std::size_t>(bin));
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < bin; ++k) s += values[i * static_cast<std::size_t>(bin) + static_cast<std::size_t>(k)];
    out[i] = s / bin;
  }
  return out;
}

inline int binned_length(int window_length, int bin) {
  if (bin <= 0) throw ConfigError("bin factor must be positive");
  return window_length / bin;
}

inline std::vector<float> encode_window(const BeatWindow &w, InputEncoding enc, const LcAdcConfig &adc, int bin) {
  std::vector<float> out;
  if (enc == InputEncoding::LcAdc) {
    const auto train = encode(w.samples_mv, adc);
    for (int v : bin_spikes(train.values, bin)) out.push_back(static_cast<float>(v));
  } else {
    for (double v : bin_amplitude(w.samples_mv, bin)) out.push_back(static_cast<float>(v));
  }
  return out;
}

inline std::vector<Sample> make_samples(const std::vector<BeatWindow> &windows, InputEncoding enc,
                                        const LcAdcConfig &adc, int bin) {
  std::vector<Sample> out;
  out.reserve(windows.size());
  for (const auto &w : windows) {
    const auto idx = label_index(w.label);
    if (!idx) throw ConfigError("window label " + std::string(to_string(w.label)) + " is not a training class");
    out.push_back({encode_window(w, enc, adc, bin), *idx});
  }
  return out;
}

} // namespace lcsnn
