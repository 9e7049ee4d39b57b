#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ucil/matrix.hpp"

namespace ucil {

/// Adam with bias correction. State is keyed by position, so the parameter
/// order passed to step() must be stable across steps.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<const std::pair<Matrix*, const Matrix*>> params_and_grads) {
    if (m_.empty()) {
      m_.reserve(params_and_grads.size());
      v_.reserve(params_and_grads.size());
      for (const auto& [p, g] : params_and_grads) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
    }
    if (m_.size() != params_and_grads.size())
      throw std::invalid_argument("Adam: parameter count changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params_and_grads.size(); ++k) {
      Matrix& p = *params_and_grads[k].first;
      const Matrix& g = *params_and_grads[k].second;
      Matrix& m = m_[k];
      Matrix& v = v_[k];
      if (!p.same_shape(g) || !p.same_shape(m))
        throw std::invalid_argument("Adam: shape mismatch at parameter " + std::to_string(k));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g.data()[i];
        m.data()[i] = beta1_ * m.data()[i] + (1.0 - beta1_) * gi;
        v.data()[i] = beta2_ * v.data()[i] + (1.0 - beta2_) * gi * gi;
        const double mhat = m.data()[i] / bc1;
        const double vhat = v.data()[i] / bc2;
        p.data()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace ucil
