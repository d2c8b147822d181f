#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/snn/engine.hpp"
#include "lcsnn/train/surrogate.hpp"

namespace lcsnn {

/// Target band for per-layer firing rates and the weight of the penalty.
struct SelfModulation {
  double weight = 0.0; // lambda
  double rate_lo = 0.02;
  double rate_hi = 0.5;

  void validate() const {
    if (!(weight >= 0.0)) throw ConfigError("self-modulation weight must be non-negative");
    if (!(0.0 < rate_lo && rate_lo < rate_hi && rate_hi < 1.0))
      throw ConfigError("target rate band must satisfy 0 < lo < hi < 1");
  }
};

/// lambda * sum over layers of max(0, lo - r)^2 + max(0, r - hi)^2.
inline double self_modulation_penalty(std::span<const double> firing_rates, const SelfModulation &m) {
  double sum = 0.0;
  for (double r : firing_rates) {
    const double below = std::max(0.0, m.rate_lo - r);
    const double above = std::max(0.0, r - m.rate_hi);
    sum += below * below + above * above;
  }
  return m.weight * sum;
}

/// d penalty / d rate for one layer.
inline double self_modulation_slope(double rate, const SelfModulation &m) {
  return m.weight * (-2.0 * std::max(0.0, m.rate_lo - rate) + 2.0 * std::max(0.0, rate - m.rate_hi));
}

struct LossParts {
  double cross_entropy = 0.0;
  double penalty = 0.0;
  double total() const { return cross_entropy + penalty; }
};

/// Softmax cross-entropy of `logits` against `label`; writes d/d logits.
inline double softmax_cross_entropy(std::span<const double> logits, int label, std::span<double> d_logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = m + std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i)
    d_logits[i] = std::exp(logits[i] - log_z) - (static_cast<int>(i) == label ? 1.0 : 0.0);
  return log_z - logits[static_cast<std::size_t>(label)];
}

/// Per-sample gradient in file parameter layout, plus shared LIF constants.
template <typename Real> struct Gradients {
  std::vector<Real> params;
  double v_threshold = 0.0;
  double v_reset = 0.0;
  double delta_v = 0.0;

  explicit Gradients(std::size_t n = 0) : params(n, Real(0)) {}

  void zero() {
    std::fill(params.begin(), params.end(), Real(0));
    v_threshold = v_reset = delta_v = 0.0;
  }

  void add(const Gradients &o) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += o.params[i];
    v_threshold += o.v_threshold;
    v_reset += o.v_reset;
    delta_v += o.delta_v;
  }
};

/// Firing rate of every LIF layer of a traced pass (0 for other layers).
template <typename Real>
std::vector<double> firing_rates(const Prepared<Real> &prep, const Trace<Real> &trace, int time_steps) {
  std::vector<double> r(prep.layers.size(), 0.0);
  for (std::size_t l = 0; l < prep.layers.size(); ++l) {
    if (prep.layers[l].kind == LayerKind::MaxPool1d) continue;
    r[l] = trace.spike_totals[l] / (static_cast<double>(prep.layers[l].out_shape.size()) * time_steps);
  }
  return r;
}

/// Logits used by the loss: spike counts / T for spiking nets, the readout
/// for ReLU nets.
template <typename Real> std::vector<double> logits_of(const NetworkSpec &spec, std::span<const Real> output) {
  std::vector<double> z(output.size());
  const double scale = spec.activation == Activation::Lif ? 1.0 / spec.time_steps : 1.0;
  for (std::size_t i = 0; i < output.size(); ++i) z[i] = static_cast<double>(output[i]) * scale;
  return z;
}

/// Loss of one traced sample.
template <typename Real>
LossParts sample_loss(const Network<Real> &net, const Prepared<Real> &prep, const Trace<Real> &trace, int label,
                      const SelfModulation &mod) {
  const auto z = logits_of<Real>(net.spec, trace.output);
  std::vector<double> dz(z.size());
  LossParts parts;
  parts.cross_entropy = softmax_cross_entropy(z, label, dz);
  if (net.spec.activation == Activation::Lif && mod.weight > 0.0) {
    auto rates = firing_rates(prep, trace, net.spec.time_steps);
    std::vector<double> lif_rates;
    for (std::size_t l = 0; l < rates.size(); ++l)
      if (prep.layers[l].kind != LayerKind::MaxPool1d) lif_rates.push_back(rates[l]);
    parts.penalty = self_modulation_penalty(lif_rates, mod);
  }
  return parts;
}

/// Backpropagation through time for one traced sample. Adds the gradient of
/// [cross-entropy + self-modulation penalty] to `grad`.
///
/// The spike derivative is replaced by the surrogate; the reset is treated as
/// a constant (the hard spike that selects it carries no gradient); the
/// clamp at v_reset passes gradient only where it is inactive, unless the
/// surrogate asks for a straight-through clamp.
template <typename Real>
LossParts backward(const Network<Real> &net, const Prepared<Real> &prep, const Trace<Real> &trace, int label,
                   const SurrogateSpec &surrogate, const SelfModulation &mod, Gradients<Real> &grad) {
  const auto &spec = net.spec;
  const bool lif = spec.activation == Activation::Lif;
  const int T = lif ? spec.time_steps : 1;
  const std::size_t L = prep.layers.size();
  const ParamLayout layout(spec);

  const auto z = logits_of<Real>(spec, trace.output);
  std::vector<double> dz(z.size());
  LossParts parts;
  parts.cross_entropy = softmax_cross_entropy(z, label, dz);
  if (!std::isfinite(parts.cross_entropy)) throw NumericalError("non-finite loss");

  // Gradient reaching the readout's output at every step.
  std::vector<Real> d_readout(dz.size());
  const double zscale = lif ? 1.0 / T : 1.0;
  for (std::size_t i = 0; i < dz.size(); ++i) d_readout[i] = static_cast<Real>(dz[i] * zscale);

  // Penalty gradient per output element of each LIF layer.
  std::vector<Real> d_rate(L, Real(0));
  if (lif && mod.weight > 0.0) {
    const auto rates = firing_rates(prep, trace, T);
    std::vector<double> lif_rates;
    for (std::size_t l = 0; l < L; ++l) {
      if (prep.layers[l].kind == LayerKind::MaxPool1d) continue;
      lif_rates.push_back(rates[l]);
      d_rate[l] = static_cast<Real>(self_modulation_slope(rates[l], mod) /
                                    (static_cast<double>(prep.layers[l].out_shape.size()) * T));
    }
    parts.penalty = self_modulation_penalty(lif_rates, mod);
  }

  const Real vr = static_cast<Real>(spec.lif.v_reset);
  const Real vth = static_cast<Real>(spec.lif.v_threshold);

  // Transposed weight gradients, biases, membrane carries.
  std::vector<std::vector<Real>> d_wt(L), d_b(L), carry(L), d_act(L + 1);
  for (std::size_t l = 0; l < L; ++l) {
    const auto &layer = prep.layers[l];
    if (layer.kind != LayerKind::MaxPool1d) {
      d_wt[l].assign(layer.wt.size(), Real(0));
      d_b[l].assign(static_cast<std::size_t>(layer.out_shape.channels), Real(0));
      carry[l].assign(static_cast<std::size_t>(layer.out_shape.size()), Real(0));
    }
  }
  std::vector<Real> d_first_sum; // first layer's current gradient summed over t
  if (!prep.layers.empty() && prep.layers[0].kind != LayerKind::MaxPool1d)
    d_first_sum.assign(static_cast<std::size_t>(prep.layers[0].out_shape.size()), Real(0));

  double g_th = 0.0, g_vr = 0.0, g_leak = 0.0;
  std::vector<Real> g, g_in, dI;

  for (int t = T - 1; t >= 0; --t) {
    const auto &steps = trace.steps[static_cast<std::size_t>(t)];
    g.assign(d_readout.begin(), d_readout.end());
    for (std::size_t li = L; li-- > 0;) {
      const auto &layer = prep.layers[li];
      const auto &st = steps[li];
      const std::size_t n = static_cast<std::size_t>(layer.out_shape.size());
      const std::size_t n_in = static_cast<std::size_t>(layer.in_shape.size());

      if (layer.kind == LayerKind::MaxPool1d) {
        g_in.assign(n_in, Real(0));
        for (std::size_t i = 0; i < n; ++i) g_in[static_cast<std::size_t>(st.argmax[i])] += g[i];
        g.swap(g_in);
        continue;
      }

      dI.assign(n, Real(0));
      if (lif) {
        auto &c = carry[li];
        const bool gated = spec.leak_mode == LeakMode::WhenNoInput;
        for (std::size_t i = 0; i < n; ++i) {
          const Real u = st.u[i];
          const Real up = std::max(u, vr);
          const bool hard = up >= vth;
          const Real ds = g[i] + d_rate[li];
          const Real sg = ds != Real(0) ? surrogate.derivative<Real>(up - vth) : Real(0);
          const Real d_up = ds * sg + (hard ? Real(0) : c[i]);
          g_th -= static_cast<double>(ds * sg);
          if (hard) g_vr += static_cast<double>(c[i]);
          Real d_u;
          if (u >= vr || surrogate.clamp_straight_through) {
            d_u = d_up;
          } else {
            d_u = Real(0);
            g_vr += static_cast<double>(d_up);
          }
          if (!gated || st.leaked[i]) g_leak -= static_cast<double>(d_u);
          c[i] = d_u;
          dI[i] = d_u;
        }
      } else {
        const bool is_readout = static_cast<int>(li) == prep.readout;
        for (std::size_t i = 0; i < n; ++i) dI[i] = is_readout ? g[i] : (st.u[i] > Real(0) ? g[i] : Real(0));
      }

      const std::size_t channels = static_cast<std::size_t>(layer.out_shape.channels);
      if (layer.bias)
        for (std::size_t i = 0; i < n; ++i) d_b[li][i % channels] += dI[i];

      if (li == 0) {
        // Constant input: fold the outer product after the time loop.
        for (std::size_t i = 0; i < n; ++i) d_first_sum[i] += dI[i];
        continue;
      }
      const Real *in = steps[li - 1].s.data();
      g_in.assign(n_in, Real(0));
      if (layer.kind == LayerKind::Conv1d)
        kernels::conv_backward(in, layer.wt.data(), layer.conv, dI.data(), d_wt[li].data(), g_in.data());
      else
        kernels::fc_backward(in, static_cast<int>(n_in), layer.wt.data(), static_cast<int>(n), dI.data(),
                             d_wt[li].data(), g_in.data());
      g.swap(g_in);
    }
  }
  if (!d_first_sum.empty()) {
    const auto &layer = prep.layers[0];
    if (layer.kind == LayerKind::Conv1d)
      kernels::conv_backward<Real>(trace.input.data(), layer.wt.data(), layer.conv, d_first_sum.data(),
                                   d_wt[0].data(), nullptr);
    else
      kernels::fc_backward<Real>(trace.input.data(), layer.in_shape.size(), layer.wt.data(),
                                 layer.out_shape.size(), d_first_sum.data(), d_wt[0].data(), nullptr);
  }
  if (lif)
    for (std::size_t l = 0; l < L; ++l)
      for (Real c : carry[l]) g_vr += static_cast<double>(c); // v(-1) = v_reset

  // Back to file layout.
  for (std::size_t l = 0; l < L; ++l) {
    const auto &ls = spec.layers[l];
    const auto &e = layout.entries[l];
    Real *gw = grad.params.data() + e.weight_offset;
    if (ls.kind == LayerKind::Conv1d) {
      for (int co = 0; co < ls.out_channels; ++co)
        for (int ci = 0; ci < ls.in_channels; ++ci)
          for (int k = 0; k < ls.kernel; ++k)
            gw[(co * ls.in_channels + ci) * ls.kernel + k] +=
                d_wt[l][static_cast<std::size_t>((k * ls.in_channels + ci) * ls.out_channels + co)];
    } else if (ls.kind == LayerKind::FC) {
      for (int o = 0; o < ls.out_features; ++o)
        for (int i = 0; i < ls.in_features; ++i)
          gw[o * ls.in_features + i] += d_wt[l][static_cast<std::size_t>(i * ls.out_features + o)];
    }
    for (std::size_t b = 0; b < e.bias_count; ++b) grad.params[e.bias_offset + b] += d_b[l][b];
  }
  grad.v_threshold += g_th;
  grad.v_reset += g_vr;
  grad.delta_v += g_leak;
  return parts;
}

} // namespace lcsnn
