#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/snn/network.hpp"

namespace lcsnn {

struct ConvTerm {
  std::int64_t m_h = 1, m_w = 1; // output feature map
  std::int64_t k_h = 1, k_w = 1;
  std::int64_t c_in = 1, c_out = 1;
};

struct FcTerm {
  std::int64_t n_in = 1, n_out = 1;
};

/// Cycle cost of each operation type.
struct OpCosts {
  std::int64_t add = 1;
  std::int64_t mul = 10;
  std::int64_t branch = 1;
};

enum class CostMode {
  StrictLiteral, // one Ops factor multiplies the whole operation count
  Decomposition  // product terms at mul cost, sum terms at add cost
};

inline std::string to_string(CostMode m) { return m == CostMode::StrictLiteral ? "strict" : "decomposition"; }

inline CostMode cost_mode_from_string(const std::string &s) {
  if (s == "strict") return CostMode::StrictLiteral;
  if (s == "decomposition") return CostMode::Decomposition;
  throw ConfigError("unknown complexity mode '" + s + "'");
}

struct ComplexityParams {
  std::vector<ConvTerm> conv_layers;
  std::vector<FcTerm> fc_layers;
  CostMode mode = CostMode::Decomposition;
  std::int64_t ops = 1;  // strict-literal factor
  OpCosts costs;         // decomposition costs
  bool scnn_branch = false; // decomposition: charge a conditional branch per SCNN accumulate
  std::int64_t bit = 32;
  std::int64_t t = 1;

  bool empty() const { return conv_layers.empty() && fc_layers.empty(); }

  void validate() const {
    for (const auto &c : conv_layers)
      if (c.m_h <= 0 || c.m_w <= 0 || c.k_h <= 0 || c.k_w <= 0 || c.c_in <= 0 || c.c_out <= 0)
        throw ConfigError("conv dimensions must be positive");
    for (const auto &f : fc_layers)
      if (f.n_in <= 0 || f.n_out <= 0) throw ConfigError("fc dimensions must be positive");
    if (ops <= 0 || costs.add <= 0 || costs.mul <= 0 || costs.branch < 0) throw ConfigError("operation costs must be positive");
    if (bit <= 0) throw ConfigError("bit width must be positive");
    if (t < 0) throw ConfigError("time steps must be non-negative");
  }
};

/// Cycle count of the conventional CNN. Empty layer lists give 0; see
/// complexity_warnings().
inline std::int64_t tc_cnn(const ComplexityParams &p) {
  p.validate();
  std::int64_t total = 0;
  for (const auto &c : p.conv_layers) {
    const std::int64_t prod = c.k_h * c.k_w, sum = c.k_h + c.k_w - 1;
    const std::int64_t per = p.mode == CostMode::StrictLiteral ? (prod + sum) * p.ops
                                                               : prod * p.costs.mul + sum * p.costs.add;
    total += c.m_h * c.m_w * per * c.c_in * c.c_out * p.bit;
  }
  for (const auto &f : p.fc_layers) {
    const std::int64_t per = p.mode == CostMode::StrictLiteral ? p.ops : p.costs.mul + p.costs.add;
    total += f.n_in * f.n_out * per * p.bit;
  }
  return total;
}

/// Cycle count of the spiking network: additions (and optionally branches)
/// only, repeated over t steps.
inline std::int64_t tc_scnn(const ComplexityParams &p) {
  p.validate();
  const std::int64_t per = p.mode == CostMode::StrictLiteral ? p.ops
                                                             : p.costs.add + (p.scnn_branch ? p.costs.branch : 0);
  std::int64_t total = 0;
  for (const auto &c : p.conv_layers) total += c.m_h * c.m_w * (c.k_h + c.k_w - 1) * c.c_in * c.c_out * per * p.bit * p.t;
  for (const auto &f : p.fc_layers) total += f.n_in * f.n_out * per * p.bit * p.t;
  return total;
}

inline std::vector<std::string> complexity_warnings(const ComplexityParams &p) {
  if (p.empty()) return {"no conv or fc layers; cycle count is 0"};
  return {};
}

inline double reduction_ratio(std::int64_t cnn, std::int64_t scnn) {
  if (cnn == 0) throw DivisionError("reduction ratio undefined for a zero CNN cycle count");
  return 1.0 - static_cast<double>(scnn) / static_cast<double>(cnn);
}

/// Layer terms of a network. A 1-D layer is a 1 x length map with a 1 x k
/// kernel; pooling and the spike counter carry no cost.
inline ComplexityParams complexity_params(const NetworkSpec &spec) {
  const auto shapes = spec.shapes();
  ComplexityParams p;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto &l = spec.layers[i];
    if (l.kind == LayerKind::Conv1d)
      p.conv_layers.push_back({1, shapes[i].length, 1, l.kernel, l.in_channels, l.out_channels});
    else if (l.kind == LayerKind::FC)
      p.fc_layers.push_back({l.in_features, l.out_features});
  }
  return p;
}

struct InterpretationRow {
  std::string name;
  CostMode mode;
  std::int64_t cnn_ops, scnn_ops; // strict factors (0 in decomposition mode)
  bool scnn_branch;
  std::int64_t cnn_bit, scnn_bit, t;
  std::int64_t tc_cnn, tc_scnn;
  double reduction;
};

/// Every interpretation of the cost model evaluated over `steps`.
///  strict         CNN Ops=mul, SCNN Ops=add
///  strict-equal   both Ops=1, so only the kernel term, bit and t differ
///  decomposition  CNN products at mul, sums at add; SCNN adds only
///  decomp-branch  as decomposition, plus one branch per SCNN accumulate
inline std::vector<InterpretationRow> interpretation_table(const ComplexityParams &base,
                                                           const std::vector<std::int64_t> &steps,
                                                           std::int64_t cnn_bit = 32, std::int64_t scnn_bit = 1) {
  struct Variant {
    const char *name;
    CostMode mode;
    std::int64_t cnn_ops, scnn_ops;
    bool branch;
  };
  const Variant variants[] = {
      {"strict", CostMode::StrictLiteral, base.costs.mul, base.costs.add, false},
      {"strict-equal", CostMode::StrictLiteral, 1, 1, false},
      {"decomposition", CostMode::Decomposition, 0, 0, false},
      {"decomp-branch", CostMode::Decomposition, 0, 0, true},
  };
  std::vector<InterpretationRow> rows;
  for (const auto &v : variants) {
    for (std::int64_t t : steps) {
      ComplexityParams c = base, s = base;
      c.mode = s.mode = v.mode;
      c.bit = cnn_bit;
      s.bit = scnn_bit;
      s.t = t;
      s.scnn_branch = v.branch;
      if (v.mode == CostMode::StrictLiteral) {
        c.ops = v.cnn_ops;
        s.ops = v.scnn_ops;
      }
      const auto a = tc_cnn(c), b = tc_scnn(s);
      rows.push_back({v.name, v.mode, v.cnn_ops, v.scnn_ops, v.branch, cnn_bit, scnn_bit, t, a, b,
                      a == 0 ? 0.0 : reduction_ratio(a, b)});
    }
  }
  return rows;
}

inline nlohmann::json to_json(const ComplexityParams &p) {
  nlohmann::json conv = nlohmann::json::array(), fc = nlohmann::json::array();
  for (const auto &c : p.conv_layers)
    conv.push_back({{"M_H", c.m_h}, {"M_W", c.m_w}, {"K_H", c.k_h}, {"K_W", c.k_w}, {"C_in", c.c_in}, {"C_out", c.c_out}});
  for (const auto &f : p.fc_layers) fc.push_back({{"N_in", f.n_in}, {"N_out", f.n_out}});
  return {{"conv_layers", conv},
          {"fc_layers", fc},
          {"mode", to_string(p.mode)},
          {"ops", p.ops},
          {"costs", {{"add", p.costs.add}, {"mul", p.costs.mul}, {"branch", p.costs.branch}}},
          {"scnn_branch", p.scnn_branch},
          {"bit", p.bit},
          {"t", p.t}};
}

} // namespace lcsnn
