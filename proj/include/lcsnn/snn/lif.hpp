#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/snn/network.hpp"

namespace lcsnn {

/// Result of one membrane update.
template <typename Real> struct LifUpdate {
  Real pre_clamp; // v + input - leak
  Real potential; // clamped at v_reset from below
  bool spike;
  Real next; // v_reset after a spike, else potential
};

/// One step of a single neuron. `has_input` gates the leak in WhenNoInput
/// mode and is ignored otherwise.
template <typename Real>
inline LifUpdate<Real> lif_neuron_step(Real v, Real input, const LifParams &p, LeakMode mode,
                                       bool has_input) {
  const Real leak = (mode == LeakMode::Always || !has_input) ? static_cast<Real>(p.delta_v) : Real(0);
  const Real u = v + input - leak;
  const Real up = std::max(u, static_cast<Real>(p.v_reset));
  const bool spike = up >= static_cast<Real>(p.v_threshold);
  return {u, up, spike, spike ? static_cast<Real>(p.v_reset) : up};
}

/// Membrane potentials of a layer of neurons.
struct LifState {
  std::vector<double> v_mem;

  static LifState at_rest(std::size_t n, const LifParams &p) { return {std::vector<double>(n, p.v_reset)}; }
};

/// Advances every neuron by one step; returns the {0,1} output spikes.
inline std::vector<std::uint8_t> lif_step(LifState &state, std::span<const double> weighted_input,
                                          const LifParams &params, LeakMode mode = LeakMode::Always) {
  if (weighted_input.size() != state.v_mem.size()) throw ShapeError("input width differs from layer width");
  std::vector<std::uint8_t> spikes(state.v_mem.size(), 0);
  for (std::size_t i = 0; i < state.v_mem.size(); ++i) {
    const auto r = lif_neuron_step<double>(state.v_mem[i], weighted_input[i], params, mode,
                                           weighted_input[i] != 0.0);
    spikes[i] = r.spike ? 1 : 0;
    state.v_mem[i] = r.next;
  }
  return spikes;
}

} // namespace lcsnn
