#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/format.hpp"
#include "lcsnn/ingest/aami.hpp"

namespace lcsnn {

struct BeatAnnotation {
  std::int64_t sample_index = 0;
  char symbol = 'N';
  AamiClass aami_class = AamiClass::N;

  bool operator==(const BeatAnnotation &) const = default;
};

/// A digitized two-channel recording. Sample values are raw ADC counts;
/// millivolts are (count - adc_zero) / adc_gain.
struct EcgRecord {
  std::string record_id;
  int sampling_rate_hz = 360;
  int adc_resolution_bits = 11;
  double adc_gain = 200.0;
  int adc_zero = 1024;
  std::array<std::vector<int>, 2> channels;
  std::array<std::string, 2> channel_names;
  std::vector<BeatAnnotation> annotations;

  std::size_t length() const { return channels[0].size(); }

  double to_mv(int count) const { return (count - adc_zero) / adc_gain; }

  std::vector<double> channel_mv(int ch) const {
    const auto &c = channels.at(static_cast<std::size_t>(ch));
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = to_mv(c[i]);
    return out;
  }

  /// Throws ParseError when the channel lengths or annotation positions are
  /// inconsistent.
  void validate() const {
    if (channels[0].size() != channels[1].size())
      throw ParseError(record_id + ": channel lengths differ");
    for (const auto &a : annotations)
      if (a.sample_index < 0 || static_cast<std::size_t>(a.sample_index) >= length())
        throw ParseError(record_id + ": annotation at " + std::to_string(a.sample_index) +
                         " outside [0, " + std::to_string(length()) + ")");
  }
};

// ---------------------------------------------------------------------------
// Header (.hea)

struct WfdbSignalSpec {
  std::string file_name;
  int format = 212;
  double gain = 200.0;
  int resolution_bits = 12;
  int zero = 0;
  std::optional<int> initial_value;
  std::optional<int> checksum;
  std::string description;
};

struct WfdbHeader {
  std::string record_name;
  int num_signals = 0;
  double sampling_frequency = 250.0;
  std::int64_t num_samples = 0;
  std::vector<WfdbSignalSpec> signals;
};

namespace detail {

// "200", "200/mV", "200(1024)/mV"
inline void parse_gain_field(std::string_view field, WfdbSignalSpec &sig) {
  auto slash = field.find('/');
  auto g = field.substr(0, slash);
  auto paren = g.find('(');
  if (paren != std::string_view::npos) {
    auto close = g.find(')', paren);
    if (close == std::string_view::npos) throw ParseError("bad gain field '" + std::string(field) + "'");
    g = g.substr(0, paren);
  }
  const double gain = parse_real(g);
  sig.gain = gain == 0.0 ? 200.0 : gain;
}

} // namespace detail

inline WfdbHeader parse_wfdb_header(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw ParseError("empty header");

  WfdbHeader h;
  const auto rec = tokens(lines[0]);
  if (rec.size() < 2) throw ParseError("record line needs a name and a signal count");
  h.record_name = std::string(rec[0]);
  if (h.record_name.find('/') != std::string::npos)
    throw UnsupportedFormat("multi-segment records are not supported");
  try {
    h.num_signals = static_cast<int>(parse_int(rec[1]));
    if (rec.size() > 2) {
      // "360", "360/360", "360(0)"
      auto f = rec[2].substr(0, rec[2].find_first_of("/("));
      h.sampling_frequency = parse_real(f);
    }
    if (rec.size() > 3) h.num_samples = parse_int(rec[3]);
  } catch (const ParseError &e) {
    throw ParseError(std::string("record line: ") + e.what());
  }
  if (h.num_signals < 0 || h.num_samples < 0) throw ParseError("negative count in record line");
  if (static_cast<int>(lines.size()) < 1 + h.num_signals)
    throw ParseError("header declares " + std::to_string(h.num_signals) +
                     " signals but has " + std::to_string(lines.size() - 1) + " signal lines");

  for (int s = 0; s < h.num_signals; ++s) {
    const auto t = tokens(lines[static_cast<std::size_t>(1 + s)]);
    if (t.size() < 2) throw ParseError("signal line " + std::to_string(s) + " too short");
    WfdbSignalSpec sig;
    sig.file_name = std::string(t[0]);
    try {
      // "212", "212x1", "212:3", "212+512"
      auto fmt = t[1].substr(0, t[1].find_first_of("x:+"));
      sig.format = static_cast<int>(parse_int(fmt));
      if (t.size() > 2) detail::parse_gain_field(t[2], sig);
      if (t.size() > 3) sig.resolution_bits = static_cast<int>(parse_int(t[3]));
      if (t.size() > 4) sig.zero = static_cast<int>(parse_int(t[4]));
      if (t.size() > 5) sig.initial_value = static_cast<int>(parse_int(t[5]));
      if (t.size() > 6) sig.checksum = static_cast<int>(parse_int(t[6]));
    } catch (const ParseError &e) {
      throw ParseError("signal line " + std::to_string(s) + ": " + e.what());
    }
    for (std::size_t k = 8; k < t.size(); ++k) {
      if (!sig.description.empty()) sig.description += ' ';
      sig.description += std::string(t[k]);
    }
    h.signals.push_back(std::move(sig));
  }
  return h;
}

inline std::string format_wfdb_header(const WfdbHeader &h) {
  std::string out = h.record_name + ' ' + std::to_string(h.num_signals) + ' ' +
                    fmt_real(h.sampling_frequency) + ' ' + std::to_string(h.num_samples) + '\n';
  for (const auto &s : h.signals) {
    out += s.file_name + ' ' + std::to_string(s.format) + ' ' + fmt_real(s.gain) + ' ' +
           std::to_string(s.resolution_bits) + ' ' + std::to_string(s.zero) + ' ' +
           std::to_string(s.initial_value.value_or(0)) + ' ' +
           std::to_string(s.checksum.value_or(0)) + " 0";
    if (!s.description.empty()) out += ' ' + s.description;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Format 212: two 12-bit two's-complement samples in three bytes.
//   b0 = low 8 bits of s0
//   b1 = high nibble of s1 (bits 7..4) | high nibble of s0 (bits 3..0)
//   b2 = low 8 bits of s1

inline constexpr int sign_extend_12(int v) { return (v & 0x800) ? v - 0x1000 : v; }

inline constexpr std::array<int, 2> decode_212(std::uint8_t b0, std::uint8_t b1,
                                               std::uint8_t b2) {
  const int s0 = ((b1 & 0x0F) << 8) | b0;
  const int s1 = ((b1 & 0xF0) << 4) | b2;
  return {sign_extend_12(s0), sign_extend_12(s1)};
}

/// Inverse of decode_212 for samples in [-2048, 2047].
inline constexpr std::array<std::uint8_t, 3> encode_212(int s0, int s1) {
  const unsigned u0 = static_cast<unsigned>(s0) & 0xFFF;
  const unsigned u1 = static_cast<unsigned>(s1) & 0xFFF;
  return {static_cast<std::uint8_t>(u0 & 0xFF),
          static_cast<std::uint8_t>(((u1 >> 4) & 0xF0) | ((u0 >> 8) & 0x0F)),
          static_cast<std::uint8_t>(u1 & 0xFF)};
}

inline std::vector<std::uint8_t> encode_212_signal(std::span<const int> ch0,
                                                   std::span<const int> ch1) {
  if (ch0.size() != ch1.size()) throw ShapeError("channel lengths differ");
  std::vector<std::uint8_t> out;
  out.reserve(ch0.size() * 3);
  for (std::size_t i = 0; i < ch0.size(); ++i) {
    if (ch0[i] < -2048 || ch0[i] > 2047 || ch1[i] < -2048 || ch1[i] > 2047)
      throw ShapeError("sample out of 12-bit range at " + std::to_string(i));
    const auto b = encode_212(ch0[i], ch1[i]);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

/// 16-bit checksum as written into WFDB headers.
inline int wfdb_checksum(std::span<const int> samples) {
  std::uint32_t sum = 0;
  for (int s : samples) sum += static_cast<std::uint32_t>(s);
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(sum & 0xFFFF));
}

/// Decodes a two-signal format-212 record. Annotations are left empty.
inline EcgRecord parse_wfdb_212(std::string_view header_text,
                                std::span<const std::uint8_t> signal_bytes) {
  const WfdbHeader h = parse_wfdb_header(header_text);
  if (h.num_signals != 2)
    throw UnsupportedFormat("expected 2 signals, header declares " + std::to_string(h.num_signals));
  for (const auto &s : h.signals)
    if (s.format != 212) throw UnsupportedFormat("signal format " + std::to_string(s.format) + " is not 212");
  if (h.signals[0].file_name != h.signals[1].file_name)
    throw UnsupportedFormat("signals stored in separate files");
  if (signal_bytes.size() % 3 != 0)
    throw ParseError("signal byte count " + std::to_string(signal_bytes.size()) + " is not a multiple of 3");

  const std::size_t available = signal_bytes.size() / 3;
  std::size_t n = available;
  if (h.num_samples > 0) {
    if (static_cast<std::size_t>(h.num_samples) > available)
      throw ParseError("truncated signal: header declares " + std::to_string(h.num_samples) +
                       " samples, file holds " + std::to_string(available));
    n = static_cast<std::size_t>(h.num_samples);
  }

  EcgRecord r;
  r.record_id = h.record_name;
  r.sampling_rate_hz = static_cast<int>(h.sampling_frequency);
  r.adc_resolution_bits = h.signals[0].resolution_bits;
  r.adc_gain = h.signals[0].gain;
  r.adc_zero = h.signals[0].zero;
  for (int c = 0; c < 2; ++c) {
    r.channels[static_cast<std::size_t>(c)].resize(n);
    r.channel_names[static_cast<std::size_t>(c)] = h.signals[static_cast<std::size_t>(c)].description;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = decode_212(signal_bytes[3 * i], signal_bytes[3 * i + 1], signal_bytes[3 * i + 2]);
    r.channels[0][i] = s[0];
    r.channels[1][i] = s[1];
  }
  for (int c = 0; c < 2; ++c) {
    const auto &sig = h.signals[static_cast<std::size_t>(c)];
    const auto &ch = r.channels[static_cast<std::size_t>(c)];
    if (sig.initial_value && n > 0 && *sig.initial_value != ch[0])
      throw ParseError("signal " + std::to_string(c) + ": initial value mismatch");
    if (sig.checksum && n == static_cast<std::size_t>(h.num_samples) &&
        (*sig.checksum & 0xFFFF) != (wfdb_checksum(ch) & 0xFFFF))
      throw ParseError("signal " + std::to_string(c) + ": checksum mismatch");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Annotations (.atr): little-endian 16-bit words, type in the top 6 bits and
// a time increment in the low 10 bits.

namespace annot {
inline constexpr int kSkip = 59;
inline constexpr int kNum = 60;
inline constexpr int kSub = 61;
inline constexpr int kChn = 62;
inline constexpr int kAux = 63;
inline constexpr int kMaxIncrement = 1023;

// Index = annotation type code.
inline constexpr std::string_view kCodeSymbols =
    " NLRaVFJASEj/Q~ | sT*D\"=pB^t+u?![]en@xf()r";
} // namespace annot

inline char annotation_symbol(int code) {
  if (code >= 0 && static_cast<std::size_t>(code) < annot::kCodeSymbols.size())
    return annot::kCodeSymbols[static_cast<std::size_t>(code)];
  return ' ';
}

inline int annotation_code(char symbol) {
  for (std::size_t i = 1; i < annot::kCodeSymbols.size(); ++i)
    if (annot::kCodeSymbols[i] == symbol && symbol != ' ') return static_cast<int>(i);
  return 0;
}

/// Parses a MIT-format annotation stream. Sample indices are non-decreasing;
/// a zero increment (two annotations at one sample) is legal in the format.
inline std::vector<BeatAnnotation> parse_annotations(std::span<const std::uint8_t> bytes) {
  std::vector<BeatAnnotation> out;
  std::int64_t t = 0;
  std::size_t i = 0;
  auto word_at = [&](std::size_t k) {
    return static_cast<unsigned>(bytes[k]) | (static_cast<unsigned>(bytes[k + 1]) << 8);
  };
  while (i < bytes.size()) {
    if (i + 1 >= bytes.size()) throw ParseError("dangling byte at end of annotation stream");
    const unsigned w = word_at(i);
    i += 2;
    const int type = static_cast<int>(w >> 10);
    const int value = static_cast<int>(w & 0x3FF);
    if (type == 0 && value == 0) break;
    switch (type) {
    case annot::kSkip: {
      if (i + 4 > bytes.size()) throw ParseError("dangling SKIP word");
      // PDP-11 order: high word first, each word little-endian.
      const std::uint32_t hi = word_at(i), lo = word_at(i + 2);
      t += static_cast<std::int32_t>((hi << 16) | lo);
      i += 4;
      break;
    }
    case annot::kAux: {
      const std::size_t len = static_cast<std::size_t>(value) + (value & 1);
      if (i + len > bytes.size()) throw ParseError("dangling AUX word");
      i += len;
      break;
    }
    case annot::kNum:
    case annot::kSub:
    case annot::kChn:
      break;
    default: {
      t += value;
      const char sym = annotation_symbol(type);
      out.push_back({t, sym, map_to_aami(sym)});
    }
    }
  }
  return out;
}

/// Encodes annotations in MIT format, using SKIP for gaps over 1023 samples
/// and terminating with a zero word.
inline std::vector<std::uint8_t> encode_annotations(std::span<const BeatAnnotation> anns) {
  std::vector<std::uint8_t> out;
  auto put = [&](unsigned w) {
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xFF));
  };
  std::int64_t t = 0;
  for (const auto &a : anns) {
    std::int64_t delta = a.sample_index - t;
    if (delta < 0) throw ShapeError("annotations must be sorted by sample index");
    if (delta > annot::kMaxIncrement) {
      const auto skip = static_cast<std::uint32_t>(delta);
      put(static_cast<unsigned>(annot::kSkip) << 10);
      put(skip >> 16);
      put(skip & 0xFFFF);
      delta = 0;
    }
    const int code = annotation_code(a.symbol);
    if (code == 0) throw ShapeError(std::string("no annotation code for symbol '") + a.symbol + "'");
    put((static_cast<unsigned>(code) << 10) | static_cast<unsigned>(delta));
    t = a.sample_index;
  }
  put(0);
  return out;
}

// ---------------------------------------------------------------------------
// Plain-text fallback.
//   <record>.csv      one row per sample: ch0,ch1 (ADC counts); a non-numeric
//                     first row is treated as column names
//   <record>.ann.csv  one row per annotation: sample_index,symbol

inline EcgRecord parse_csv_record(std::string_view record_id, std::string_view signal_csv,
                                  std::string_view annotation_csv = {}) {
  EcgRecord r;
  r.record_id = std::string(record_id);
  bool first = true;
  for (const auto &row : parse_csv(signal_csv)) {
    if (row.size() < 2) throw ParseError("signal CSV row needs two columns");
    try {
      const int a = static_cast<int>(parse_int(row[0]));
      const int b = static_cast<int>(parse_int(row[1]));
      r.channels[0].push_back(a);
      r.channels[1].push_back(b);
    } catch (const ParseError &) {
      if (!first) throw;
      r.channel_names = {row[0], row[1]};
    }
    first = false;
  }
  for (const auto &row : parse_csv(annotation_csv)) {
    if (row.size() < 2 || row[1].size() != 1) throw ParseError("annotation CSV row must be index,symbol");
    const char sym = row[1][0];
    r.annotations.push_back({parse_int(row[0]), sym, map_to_aami(sym)});
  }
  r.validate();
  return r;
}

inline std::string format_csv_record(const EcgRecord &r) {
  std::string out = "ch0,ch1\n";
  for (std::size_t i = 0; i < r.length(); ++i)
    out += std::to_string(r.channels[0][i]) + ',' + std::to_string(r.channels[1][i]) + '\n';
  return out;
}

inline std::string format_csv_annotations(const EcgRecord &r) {
  std::string out;
  for (const auto &a : r.annotations)
    out += std::to_string(a.sample_index) + ',' + a.symbol + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Directory access.

/// Loads <dir>/<id>.hea + .dat + .atr, or <dir>/<id>.csv + .ann.csv.
inline EcgRecord load_record(const std::filesystem::path &dir, const std::string &id) {
  namespace fs = std::filesystem;
  const auto hea = dir / (id + ".hea");
  if (fs::exists(hea)) {
    const std::string header = read_text(hea);
    const WfdbHeader h = parse_wfdb_header(header);
    if (h.signals.empty()) throw ParseError(id + ": header has no signals");
    const auto bytes = read_bytes(dir / h.signals[0].file_name);
    EcgRecord r = parse_wfdb_212(header, bytes);
    const auto atr = dir / (id + ".atr");
    if (fs::exists(atr)) r.annotations = parse_annotations(read_bytes(atr));
    r.validate();
    return r;
  }
  const auto csv = dir / (id + ".csv");
  if (fs::exists(csv)) {
    const auto ann = dir / (id + ".ann.csv");
    return parse_csv_record(id, read_text(csv), fs::exists(ann) ? read_text(ann) : std::string{});
  }
  throw Error("record " + id + " not found in " + dir.string());
}

/// Record ids present in a directory (either format), sorted.
inline std::vector<std::string> list_records(const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto &e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.ends_with(".hea")) {
      ids.push_back(name.substr(0, name.size() - 4));
    } else if (name.ends_with(".csv") && !name.ends_with(".ann.csv")) {
      auto id = name.substr(0, name.size() - 4);
      if (!fs::exists(dir / (id + ".hea"))) ids.push_back(std::move(id));
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

/// Writes <dir>/<id>.hea/.dat/.atr in the MIT-BIH layout.
inline void write_wfdb_record(const std::filesystem::path &dir, const EcgRecord &r) {
  WfdbHeader h;
  h.record_name = r.record_id;
  h.num_signals = 2;
  h.sampling_frequency = r.sampling_rate_hz;
  h.num_samples = static_cast<std::int64_t>(r.length());
  for (int c = 0; c < 2; ++c) {
    const auto &ch = r.channels[static_cast<std::size_t>(c)];
    WfdbSignalSpec s;
    s.file_name = r.record_id + ".dat";
    s.format = 212;
    s.gain = r.adc_gain;
    s.resolution_bits = r.adc_resolution_bits;
    s.zero = r.adc_zero;
    s.initial_value = ch.empty() ? 0 : ch[0];
    s.checksum = wfdb_checksum(ch);
    s.description = r.channel_names[static_cast<std::size_t>(c)];
    h.signals.push_back(s);
  }
  write_text(dir / (r.record_id + ".hea"), format_wfdb_header(h));
  write_bytes(dir / (r.record_id + ".dat"), encode_212_signal(r.channels[0], r.channels[1]));
  write_bytes(dir / (r.record_id + ".atr"), encode_annotations(r.annotations));
}

} // namespace lcsnn
