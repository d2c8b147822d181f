#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lcsnn/common/errors.hpp"

namespace lcsnn {

enum class OptimizerKind { SGD, Adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(const std::string &s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

/// Plain SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8) over a flat vector.
/// State is kept in the parameter type so a float checkpoint restores it
/// exactly.
template <typename Real> class Optimizer {
public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr, std::size_t n) : kind_(kind), lr_(lr) {
    if (kind == OptimizerKind::Adam) {
      m_.assign(n, Real(0));
      v_.assign(n, Real(0));
    }
  }

  void step(std::vector<Real> &params, const std::vector<Real> &grad) {
    ++t_;
    if (kind_ == OptimizerKind::SGD) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= static_cast<Real>(lr_) * grad[i];
      return;
    }
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    const Real step = static_cast<Real>(lr_ * std::sqrt(c2) / c1);
    const Real eps = static_cast<Real>(kEps * std::sqrt(c2));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Real g = grad[i];
      m_[i] = static_cast<Real>(kBeta1) * m_[i] + static_cast<Real>(1 - kBeta1) * g;
      v_[i] = static_cast<Real>(kBeta2) * v_[i] + static_cast<Real>(1 - kBeta2) * g * g;
      params[i] -= step * m_[i] / (std::sqrt(v_[i]) + eps);
    }
  }

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  long long steps() const { return t_; }
  const std::vector<Real> &first_moment() const { return m_; }
  const std::vector<Real> &second_moment() const { return v_; }

  void restore(long long steps, std::vector<Real> m, std::vector<Real> v) {
    t_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
  }

private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  OptimizerKind kind_ = OptimizerKind::Adam;
  double lr_ = 1e-3;
  long long t_ = 0;
  std::vector<Real> m_, v_;
};

/// Adam/SGD for a handful of double scalars (trainable LIF constants).
class ScalarOptimizer {
public:
  ScalarOptimizer() = default;
  ScalarOptimizer(OptimizerKind kind, double lr, std::size_t n) : inner_(kind, lr, n) {}

  void step(std::vector<double> &x, const std::vector<double> &g) { inner_.step(x, g); }
  Optimizer<double> &inner() { return inner_; }
  const Optimizer<double> &inner() const { return inner_; }

private:
  Optimizer<double> inner_;
};

} // namespace lcsnn
