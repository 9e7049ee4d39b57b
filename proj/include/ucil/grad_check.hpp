#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucil/matrix.hpp"

namespace ucil {

/// Named handle on a parameter matrix owned elsewhere.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t flagged = 0;   // entries with relative error above tol
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_error = 0.0;
  double tol = 0.0;

  bool ok() const {
    for (const auto& p : params)
      if (p.flagged > 0) return false;
    return true;
  }
};

struct GradCheckOptions {
  double step = 1e-5;          // central-difference half step
  double tol = 1e-4;           // relative-error threshold for flagging
  double denom_floor = 1e-3;   // gradients below this magnitude compare absolutely
};

/// Central finite-difference comparison of analytic gradients.
/// `loss_fn` evaluates the scalar loss at the parameters' current storage;
/// `grad_fn` returns analytic gradients aligned with `params`. Both are
/// re-invoked as entries get perturbed in place. Throws on a non-finite loss
/// at any probe point.
inline GradCheckReport grad_check(std::span<const ParamRef> params,
                                  const std::function<double()>& loss_fn,
                                  const std::function<std::vector<Matrix>()>& grad_fn,
                                  GradCheckOptions opt = {}) {
  GradCheckReport report;
  report.tol = opt.tol;
  const std::vector<Matrix> grads = grad_fn();
  if (grads.size() != params.size())
    throw std::invalid_argument("grad_check: grad_fn returned wrong parameter count");

  const double h = opt.step;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& theta = *params[p].value;
    const Matrix& g = grads[p];
    if (!theta.same_shape(g))
      throw std::invalid_argument("grad_check: gradient shape mismatch for " + params[p].name);

    GradCheckEntry entry;
    entry.name = params[p].name;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta.data()[i];
      theta.data()[i] = saved + h;
      const double lp = loss_fn();
      theta.data()[i] = saved - h;
      const double lm = loss_fn();
      theta.data()[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw std::runtime_error("grad_check: non-finite loss at probe point for " +
                                 params[p].name);
      const double fd = (lp - lm) / (2.0 * h);
      const double an = g.data()[i];
      const double denom = std::max({opt.denom_floor, std::abs(fd), std::abs(an)});
      const double rel = std::abs(fd - an) / denom;
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      if (rel > opt.tol) ++entry.flagged;
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ucil
