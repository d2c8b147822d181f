#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/snn/network.hpp"

namespace lcsnn {

enum class SurrogateKind { Rectangular, FastSigmoid, Arctan };

/// Pseudo-derivative of the spike step H(x), x = v - v_threshold. Every kind
/// is the exact derivative of a smooth or piecewise-linear primitive that
/// rises from 0 to 1, so the derivative integrates to 1.
///
///   Rectangular(a):  primitive clamp((x + a) / 2a, 0, 1)
///                    derivative 1/(2a) for |x| < a, else 0
///   FastSigmoid(k):  primitive 1/2 + (k x / 2) / (2 (1 + k |x| / 2))
///                    derivative (k/4) / (1 + k |x| / 2)^2, peak k/4 (the
///                    peak slope of the logistic sigmoid with steepness k)
///   Arctan(a):       primitive 1/2 + atan(pi a x / 2) / pi
///                    derivative (a/2) / (1 + (pi a x / 2)^2), peak a/2
struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::Rectangular;
  double scale = 0.5; // width for Rectangular, steepness otherwise
  /// Pass gradient through the clamp at v_reset as if it were inactive.
  /// Off, a neuron held at the clamp receives no gradient at all.
  bool clamp_straight_through = false;

  void validate() const {
    if (!(scale > 0.0)) throw ConfigError("surrogate width/steepness must be positive");
  }

  template <typename Real> Real derivative(Real x) const {
    constexpr double pi = 3.14159265358979323846;
    switch (kind) {
    case SurrogateKind::Rectangular:
      return std::abs(x) < static_cast<Real>(scale) ? static_cast<Real>(1.0 / (2.0 * scale)) : Real(0);
    case SurrogateKind::FastSigmoid: {
      const Real d = Real(1) + static_cast<Real>(scale / 2) * std::abs(x);
      return static_cast<Real>(scale / 4) / (d * d);
    }
    case SurrogateKind::Arctan: {
      const Real z = static_cast<Real>(pi * scale / 2) * x;
      return static_cast<Real>(scale / 2) / (Real(1) + z * z);
    }
    }
    return Real(0);
  }

  template <typename Real> Real primitive(Real x) const {
    constexpr double pi = 3.14159265358979323846;
    switch (kind) {
    case SurrogateKind::Rectangular: {
      const Real y = (x + static_cast<Real>(scale)) / static_cast<Real>(2 * scale);
      return std::clamp(y, Real(0), Real(1));
    }
    case SurrogateKind::FastSigmoid: {
      const Real h = static_cast<Real>(scale / 2) * x;
      return Real(0.5) + h / (Real(2) * (Real(1) + std::abs(h)));
    }
    case SurrogateKind::Arctan:
      return Real(0.5) + std::atan(static_cast<Real>(pi * scale / 2) * x) / static_cast<Real>(pi);
    }
    return Real(0);
  }
};

/// Surrogate derivative at membrane potential v.
inline double surrogate_grad(double v, const LifParams &params, const SurrogateSpec &spec) {
  return spec.derivative(v - params.v_threshold);
}

inline std::string to_string(SurrogateKind k) {
  switch (k) {
  case SurrogateKind::Rectangular: return "rectangular";
  case SurrogateKind::FastSigmoid: return "fast_sigmoid";
  case SurrogateKind::Arctan: return "arctan";
  }
  return "?";
}

inline SurrogateKind surrogate_kind_from_string(const std::string &s) {
  if (s == "rectangular") return SurrogateKind::Rectangular;
  if (s == "fast_sigmoid") return SurrogateKind::FastSigmoid;
  if (s == "arctan") return SurrogateKind::Arctan;
  throw ConfigError("unknown surrogate '" + s + "'");
}

inline void to_json(nlohmann::json &j, const SurrogateSpec &s) {
  j = {{"kind", to_string(s.kind)}, {"scale", s.scale},
       {"clamp_gradient", s.clamp_straight_through ? "straight_through" : "exact"}};
}

inline void from_json(const nlohmann::json &j, SurrogateSpec &s) {
  s.kind = surrogate_kind_from_string(j.value("kind", std::string("rectangular")));
  s.scale = j.value("scale", 0.5);
  const auto clamp = j.value("clamp_gradient", std::string("exact"));
  if (clamp != "exact" && clamp != "straight_through") throw ConfigError("unknown clamp_gradient '" + clamp + "'");
  s.clamp_straight_through = clamp == "straight_through";
}

} // namespace lcsnn
