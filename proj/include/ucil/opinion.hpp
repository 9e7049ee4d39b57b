#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucil/matrix.hpp"
#include "ucil/special.hpp"

namespace ucil {

/// Raised when two opinions are in (near-)total conflict and Dempster's rule
/// degenerates (normalizer 1 - T underflows).
class FusionDegenerateError : public std::runtime_error {
 public:
  explicit FusionDegenerateError(const std::string& what) : std::runtime_error(what) {}
};

/// Subjective-logic mass over C mutually exclusive classes: nonnegative
/// per-class beliefs plus a scalar uncertainty, summing to one.
struct Opinion {
  std::vector<double> beliefs;
  double uncertainty = 1.0;

  std::size_t classes() const { return beliefs.size(); }

  static Opinion vacuous(std::size_t classes) {
    Opinion m;
    m.beliefs.assign(classes, 0.0);
    m.uncertainty = 1.0;
    return m;
  }

  double mass_sum() const {
    double s = uncertainty;
    for (double b : beliefs) s += b;
    return s;
  }
};

/// e >= 0 per class; alpha = e + 1, S = sum(alpha), b = e/S, u = C/S.
inline Opinion evidence_to_opinion(std::span<const double> evidence) {
  const std::size_t c = evidence.size();
  if (c == 0) throw std::invalid_argument("evidence_to_opinion: empty evidence");
  double strength = static_cast<double>(c);
  for (double e : evidence) {
    if (!(e >= 0.0)) throw std::invalid_argument("evidence_to_opinion: negative evidence entry");
    strength += e;
  }
  Opinion m;
  m.beliefs.resize(c);
  for (std::size_t i = 0; i < c; ++i) m.beliefs[i] = evidence[i] / strength;
  m.uncertainty = static_cast<double>(c) / strength;
  return m;
}

/// Inverse map: S = C/u, e = b*S, alpha = e + 1. Rejects u = 0.
inline std::vector<double> opinion_to_alpha(const Opinion& m) {
  if (!(m.uncertainty > 0.0))
    throw std::invalid_argument("opinion_to_alpha: zero uncertainty (infinite evidence)");
  const double strength = static_cast<double>(m.classes()) / m.uncertainty;
  std::vector<double> alpha(m.classes());
  for (std::size_t i = 0; i < m.classes(); ++i) alpha[i] = m.beliefs[i] * strength + 1.0;
  return alpha;
}

/// Dempster's rule for two opinions over the same class set.
inline Opinion dempster_combine(const Opinion& a, const Opinion& b) {
  const std::size_t c = a.classes();
  if (c != b.classes()) throw std::invalid_argument("dempster_combine: class count mismatch");
  double sa = 0.0, sb = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    sa += a.beliefs[i];
    sb += b.beliefs[i];
    dot += a.beliefs[i] * b.beliefs[i];
  }
  const double conflict = sa * sb - dot;
  const double norm = 1.0 - conflict;
  if (norm < 1e-12)
    throw FusionDegenerateError("dempster_combine: total conflict (T -> 1)");
  Opinion out;
  out.beliefs.resize(c);
  for (std::size_t i = 0; i < c; ++i)
    out.beliefs[i] =
        (a.beliefs[i] * b.beliefs[i] + a.beliefs[i] * b.uncertainty + b.beliefs[i] * a.uncertainty) /
        norm;
  out.uncertainty = a.uncertainty * b.uncertainty / norm;
  return out;
}

/// Left fold of dempster_combine over one opinion per view.
inline Opinion combine_views(std::span<const Opinion> opinions) {
  if (opinions.empty()) throw std::invalid_argument("combine_views: no opinions");
  Opinion acc = opinions[0];
  for (std::size_t v = 1; v < opinions.size(); ++v) {
    try {
      acc = dempster_combine(acc, opinions[v]);
    } catch (const FusionDegenerateError&) {
      throw FusionDegenerateError("combine_views: total conflict fusing views [0.." +
                                  std::to_string(v - 1) + "] with view " + std::to_string(v));
    }
  }
  return acc;
}

/// Dirichlet cross-entropy error for one sample, in closed form:
/// psi(S) - psi(alpha_y) with S = sum(alpha). Requires alpha entries >= 1.
inline double error_loss(std::span<const double> alpha, std::size_t true_class) {
  if (true_class >= alpha.size()) throw std::invalid_argument("error_loss: label out of range");
  double strength = 0.0;
  for (double a : alpha) {
    if (!(a >= 1.0)) throw std::invalid_argument("error_loss: alpha entry below 1");
    strength += a;
  }
  return digamma(strength) - digamma(alpha[true_class]);
}

inline double error_loss_mean(const Matrix& alphas, std::span<const int> labels) {
  if (alphas.rows() != labels.size())
    throw std::invalid_argument("error_loss_mean: one label per row required");
  double acc = 0.0;
  for (std::size_t i = 0; i < alphas.rows(); ++i)
    acc += error_loss(std::span<const double>(alphas.row(i), alphas.cols()),
                      static_cast<std::size_t>(labels[i]));
  return acc / static_cast<double>(alphas.rows());
}

/// KL(Dir(alpha) || Dir(1)) in closed form.
inline double dirichlet_kl_to_uniform(std::span<const double> alpha) {
  const std::size_t c = alpha.size();
  double s = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw std::invalid_argument("dirichlet_kl_to_uniform: nonpositive alpha");
    s += a;
  }
  double kl = std::lgamma(s) - std::lgamma(static_cast<double>(c));
  const double psi_s = digamma(s);
  for (double a : alpha) kl += -std::lgamma(a) + (a - 1.0) * (digamma(a) - psi_s);
  return kl;
}

/// Per-class uncertainty, refreshed from the training split once per epoch.
struct UncertaintyTable {
  std::vector<double> values;
  int epoch = 0;

  static UncertaintyTable initial(std::size_t classes, double epsilon) {
    UncertaintyTable t;
    t.values.assign(classes, 1.0 - epsilon);
    t.epoch = 0;
    return t;
  }
};

/// u_c = mean fused uncertainty over training samples of class c.
inline UncertaintyTable update_class_uncertainty(std::span<const double> sample_uncertainty,
                                                 std::span<const int> labels,
                                                 std::span<const std::size_t> train_indices,
                                                 std::size_t classes, int epoch) {
  std::vector<double> sums(classes, 0.0);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i : train_indices) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::invalid_argument("update_class_uncertainty: label out of range");
    sums[static_cast<std::size_t>(y)] += sample_uncertainty[i];
    counts[static_cast<std::size_t>(y)] += 1;
  }
  UncertaintyTable table;
  table.values.resize(classes);
  table.epoch = epoch;
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0)
      throw std::invalid_argument("update_class_uncertainty: class " + std::to_string(c) +
                                  " has no training samples");
    table.values[c] = sums[c] / static_cast<double>(counts[c]);
  }
  return table;
}

}  // namespace ucil
