#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>

// Layer kernels over position-major activations: element (position x,
// channel c) of a [length][channels] tensor lives at x * channels + c.
// Runtime weights are transposed so the innermost loop runs over output
// channels: conv [k][in][out], fc [in][out].

namespace lcsnn::kernels {

struct ConvGeom {
  int in_length, in_channels, out_length, out_channels, kernel, stride, padding;
};

/// out += conv(in). With kSpikes the input must hold only -1, 0, +1 and each
/// tap is a conditional add or subtract of a weight row; otherwise it is a
/// multiply-accumulate. Zero inputs are skipped either way.
template <bool kSpikes, typename Real>
inline void conv_forward(const Real *in, const Real *wt, const ConvGeom &g, Real *out) {
  const int cin = g.in_channels, cout = g.out_channels;
  for (int x = 0; x < g.out_length; ++x) {
    Real *o = out + static_cast<std::ptrdiff_t>(x) * cout;
    for (int k = 0; k < g.kernel; ++k) {
      const int j = x * g.stride + k - g.padding;
      if (j < 0 || j >= g.in_length) continue;
      const Real *irow = in + static_cast<std::ptrdiff_t>(j) * cin;
      for (int ci = 0; ci < cin; ++ci) {
        const Real v = irow[ci];
        if (v == Real(0)) continue;
        const Real *w = wt + static_cast<std::ptrdiff_t>(k * cin + ci) * cout;
        if constexpr (kSpikes) {
          if (v > Real(0))
            for (int co = 0; co < cout; ++co) o[co] += w[co];
          else
            for (int co = 0; co < cout; ++co) o[co] -= w[co];
        } else {
          for (int co = 0; co < cout; ++co) o[co] += v * w[co];
        }
      }
    }
  }
}

/// Accumulates weight gradients (transposed layout) and, when d_in is not
/// null, input gradients, for upstream gradient d_out.
template <typename Real>
inline void conv_backward(const Real *in, const Real *wt, const ConvGeom &g, const Real *d_out,
                          Real *d_wt, Real *d_in) {
  const int cin = g.in_channels, cout = g.out_channels;
  for (int x = 0; x < g.out_length; ++x) {
    const Real *dy = d_out + static_cast<std::ptrdiff_t>(x) * cout;
    bool any = false;
    for (int co = 0; co < cout; ++co) any |= dy[co] != Real(0);
    if (!any) continue;
    for (int k = 0; k < g.kernel; ++k) {
      const int j = x * g.stride + k - g.padding;
      if (j < 0 || j >= g.in_length) continue;
      const Real *irow = in + static_cast<std::ptrdiff_t>(j) * cin;
      for (int ci = 0; ci < cin; ++ci) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(k * cin + ci) * cout;
        const Real v = irow[ci];
        if (v != Real(0)) {
          Real *dw = d_wt + row;
          for (int co = 0; co < cout; ++co) dw[co] += v * dy[co];
        }
        if (d_in) {
          const Real *w = wt + row;
          Real acc = 0;
          for (int co = 0; co < cout; ++co) acc += w[co] * dy[co];
          d_in[static_cast<std::ptrdiff_t>(j) * cin + ci] += acc;
        }
      }
    }
  }
}

template <bool kSpikes, typename Real>
inline void fc_forward(const Real *in, int n_in, const Real *wt, int n_out, Real *out) {
  for (int i = 0; i < n_in; ++i) {
    const Real v = in[i];
    if (v == Real(0)) continue;
    const Real *w = wt + static_cast<std::ptrdiff_t>(i) * n_out;
    if constexpr (kSpikes) {
      if (v > Real(0))
        for (int o = 0; o < n_out; ++o) out[o] += w[o];
      else
        for (int o = 0; o < n_out; ++o) out[o] -= w[o];
    } else {
      for (int o = 0; o < n_out; ++o) out[o] += v * w[o];
    }
  }
}

template <typename Real>
inline void fc_backward(const Real *in, int n_in, const Real *wt, int n_out, const Real *d_out,
                        Real *d_wt, Real *d_in) {
  bool any = false;
  for (int o = 0; o < n_out; ++o) any |= d_out[o] != Real(0);
  if (!any) return;
  for (int i = 0; i < n_in; ++i) {
    const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(i) * n_out;
    const Real v = in[i];
    if (v != Real(0)) {
      Real *dw = d_wt + row;
      for (int o = 0; o < n_out; ++o) dw[o] += v * d_out[o];
    }
    if (d_in) {
      const Real *w = wt + row;
      Real acc = 0;
      for (int o = 0; o < n_out; ++o) acc += w[o] * d_out[o];
      d_in[i] += acc;
    }
  }
}

/// Max over each window, per channel; argmax keeps the first maximum.
template <typename Real>
inline void maxpool_forward(const Real *in, int in_length, int channels, int kernel, int stride,
                            int out_length, Real *out, std::int32_t *argmax) {
  (void)in_length;
  for (int x = 0; x < out_length; ++x) {
    for (int c = 0; c < channels; ++c) {
      std::int32_t best = (x * stride) * channels + c;
      Real m = in[best];
      for (int k = 1; k < kernel; ++k) {
        const std::int32_t idx = (x * stride + k) * channels + c;
        if (in[idx] > m) {
          m = in[idx];
          best = idx;
        }
      }
      out[x * channels + c] = m;
      if (argmax) argmax[x * channels + c] = best;
    }
  }
}

} // namespace lcsnn::kernels
