#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/format.hpp"
#include "lcsnn/snn/engine.hpp"
#include "lcsnn/snn/network.hpp"

// Checkpoint file layout (all integers and floats little-endian):
//
//   offset 0   8 bytes   magic "LCSNNCK1"
//   offset 8   u64       H, length of the JSON header in bytes
//   offset 16  H bytes   UTF-8 JSON header
//   then       blocks of float32 values, in the order listed by the header's
//              "blocks" array; each block holds "param_count" values.
//
// The "params" block is the flat parameter vector. For each layer in order,
// conv weights [out][in][kernel] or FC weights [out][in] are followed by the
// bias (when "bias" is true). FC layers fed by a convolution stack see its
// output flattened position-major: feature = position * channels + channel.
// Optional "adam_m" / "adam_v" blocks carry optimizer moments.

namespace lcsnn {

inline constexpr char kCheckpointMagic[8] = {'L', 'C', 'S', 'N', 'N', 'C', 'K', '1'};

struct CheckpointFile {
  NetworkSpec spec;
  std::vector<float> params;
  std::vector<float> adam_m, adam_v;
  nlohmann::json meta = nlohmann::json::object(); // training state and history
};

namespace detail {

inline void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<std::uint8_t> &out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF));
}

inline float get_f32(const std::uint8_t *p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

} // namespace detail

inline nlohmann::json param_layout_json(const NetworkSpec &spec) {
  const ParamLayout layout(spec);
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto &l = spec.layers[i];
    const auto &e = layout.entries[i];
    if (!l.has_params()) continue;
    nlohmann::json shape = l.kind == LayerKind::Conv1d
                               ? nlohmann::json::array({l.out_channels, l.in_channels, l.kernel})
                               : nlohmann::json::array({l.out_features, l.in_features});
    arr.push_back({{"layer", i},
                   {"weight_offset", e.weight_offset},
                   {"weight_shape", shape},
                   {"bias_offset", e.bias_offset},
                   {"bias_count", e.bias_count}});
  }
  return arr;
}

inline std::vector<std::uint8_t> serialize_checkpoint(const CheckpointFile &ck) {
  ck.spec.validate();
  const std::size_t n = ParamLayout(ck.spec).total;
  if (ck.params.size() != n) throw ShapeError("checkpoint parameter count mismatch");
  nlohmann::json blocks = nlohmann::json::array({"params"});
  if (!ck.adam_m.empty()) {
    if (ck.adam_m.size() != n || ck.adam_v.size() != n) throw ShapeError("optimizer state size mismatch");
    blocks.push_back("adam_m");
    blocks.push_back("adam_v");
  }
  nlohmann::json header = {{"format", "lcsnn-checkpoint"},
                           {"version", 1},
                           {"network", to_json(ck.spec)},
                           {"param_count", n},
                           {"param_layout", param_layout_json(ck.spec)},
                           {"blocks", blocks},
                           {"dtype", "float32-le"},
                           {"meta", ck.meta}};
  const std::string text = header.dump(1);
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  detail::put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (float f : ck.params) detail::put_f32(out, f);
  if (!ck.adam_m.empty()) {
    for (float f : ck.adam_m) detail::put_f32(out, f);
    for (float f : ck.adam_v) detail::put_f32(out, f);
  }
  return out;
}

inline CheckpointFile deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw ParseError("not a checkpoint file (bad magic)");
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h |= static_cast<std::uint64_t>(bytes[8 + static_cast<std::size_t>(i)]) << (8 * i);
  if (16 + h > bytes.size()) throw ParseError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(h));
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "lcsnn-checkpoint") throw ParseError("not a checkpoint header");
  if (header.value("version", 0) != 1) throw UnsupportedFormat("checkpoint version " + header.value("version", nlohmann::json()).dump());

  CheckpointFile ck;
  ck.spec = network_from_json(header.at("network"));
  const auto n = header.at("param_count").get<std::size_t>();
  if (n != ParamLayout(ck.spec).total) throw ParseError("param_count disagrees with the network");
  const auto blocks = header.at("blocks").get<std::vector<std::string>>();
  std::size_t off = 16 + h;
  if (bytes.size() != off + blocks.size() * n * 4) throw ParseError("checkpoint blob size mismatch");
  auto read_block = [&](std::vector<float> &dst) {
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i, off += 4) dst[i] = detail::get_f32(bytes.data() + off);
  };
  for (const auto &b : blocks) {
    if (b == "params") read_block(ck.params);
    else if (b == "adam_m") read_block(ck.adam_m);
    else if (b == "adam_v") read_block(ck.adam_v);
    else throw UnsupportedFormat("unknown checkpoint block '" + b + "'");
  }
  ck.meta = header.value("meta", nlohmann::json::object());
  return ck;
}

inline void save_checkpoint(const std::filesystem::path &p, const CheckpointFile &ck) {
  write_bytes(p, serialize_checkpoint(ck));
}

inline CheckpointFile load_checkpoint(const std::filesystem::path &p) {
  return deserialize_checkpoint(read_bytes(p));
}

/// Reads a network description: a bare JSON spec or a checkpoint file.
inline NetworkSpec load_network_spec(const std::filesystem::path &p) {
  const auto bytes = read_bytes(p);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kCheckpointMagic, 8) == 0)
    return deserialize_checkpoint(bytes).spec;
  try {
    return network_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

} // namespace lcsnn
