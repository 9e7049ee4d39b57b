#pragma once

#include <cmath>
#include <iostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucil/matrix.hpp"

namespace ucil {

enum class PrototypeMode { learned, centroid };

inline const char* prototype_mode_name(PrototypeMode m) {
  return m == PrototypeMode::learned ? "learned" : "centroid";
}

inline PrototypeMode prototype_mode_from_name(const std::string& s) {
  if (s == "learned") return PrototypeMode::learned;
  if (s == "centroid") return PrototypeMode::centroid;
  throw std::invalid_argument("unknown prototype mode '" + s + "' (expected learned|centroid)");
}

enum class MarginPolicyKind { none, fixed, error_rate, uncertainty };

inline const char* margin_policy_name(MarginPolicyKind k) {
  switch (k) {
    case MarginPolicyKind::none: return "none";
    case MarginPolicyKind::fixed: return "fixed";
    case MarginPolicyKind::error_rate: return "error_rate";
    case MarginPolicyKind::uncertainty: return "uncertainty";
  }
  return "?";
}

inline MarginPolicyKind margin_policy_from_name(const std::string& s) {
  for (MarginPolicyKind k : {MarginPolicyKind::none, MarginPolicyKind::fixed,
                             MarginPolicyKind::error_rate, MarginPolicyKind::uncertainty})
    if (s == margin_policy_name(k)) return k;
  throw std::invalid_argument("unknown margin policy '" + s +
                              "' (expected none|fixed|error_rate|uncertainty)");
}

/// Chooses the per-class additive margin of the contrastive loss:
/// none -> 0, fixed -> m, error_rate -> scale * err_c, uncertainty -> beta * u_c.
struct MarginPolicy {
  MarginPolicyKind kind = MarginPolicyKind::uncertainty;
  double fixed_margin = 0.1;
  double error_scale = 0.1;
  double beta = 0.1;

  double margin_for(int label, std::span<const double> class_uncertainty,
                    std::span<const double> class_error_rate) const {
    double m = 0.0;
    switch (kind) {
      case MarginPolicyKind::none: m = 0.0; break;
      case MarginPolicyKind::fixed: m = fixed_margin; break;
      case MarginPolicyKind::error_rate:
        m = error_scale * class_error_rate[static_cast<std::size_t>(label)];
        break;
      case MarginPolicyKind::uncertainty:
        m = beta * class_uncertainty[static_cast<std::size_t>(label)];
        break;
    }
    if (m < 0.0)
      throw std::invalid_argument("MarginPolicy: produced a negative margin");
    return m;
  }
};

namespace detail {

inline void require_unit_rows(const Matrix& m, double tol, const char* what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) sq += r[j] * r[j];
    if (std::abs(std::sqrt(sq) - 1.0) > tol)
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " is not unit-norm");
  }
}

}  // namespace detail

/// Epoch-frozen class centroids: row c is the normalized mean of the
/// normalized training embeddings of class c. A class whose embeddings
/// cancel to a zero mean keeps its previous row and logs a warning.
inline Matrix update_centroids(const Matrix& embed_norm, std::span<const int> labels,
                               std::span<const std::size_t> train_indices, int classes,
                               const Matrix& previous, std::ostream* warnings = &std::cerr) {
  const std::size_t d = embed_norm.cols();
  if (previous.rows() != static_cast<std::size_t>(classes) || previous.cols() != d)
    throw std::invalid_argument("update_centroids: previous bank shape mismatch");
  Matrix sums(static_cast<std::size_t>(classes), d);
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (std::size_t i : train_indices) {
    const int y = labels[i];
    if (y < 0 || y >= classes)
      throw std::invalid_argument("update_centroids: label out of range");
    double* dst = sums.row(static_cast<std::size_t>(y));
    const double* src = embed_norm.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    counts[static_cast<std::size_t>(y)] += 1;
  }
  Matrix bank(static_cast<std::size_t>(classes), d);
  for (int c = 0; c < classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw std::invalid_argument("update_centroids: class " + std::to_string(c) +
                                  " has no training samples");
    const double* s = sums.row(static_cast<std::size_t>(c));
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += s[j] * s[j];
    norm = std::sqrt(norm);
    double* dst = bank.row(static_cast<std::size_t>(c));
    if (norm < 1e-12) {
      if (warnings)
        (*warnings) << "update_centroids: class " << c
                    << " has a degenerate (zero) mean; keeping previous centroid\n";
      const double* prev = previous.row(static_cast<std::size_t>(c));
      std::copy(prev, prev + d, dst);
    } else {
      for (std::size_t j = 0; j < d; ++j) dst[j] = s[j] / norm;
    }
  }
  return bank;
}

/// Per-class training error rate, for the error-rate margin ablation.
inline std::vector<double> error_rate_table(std::span<const int> preds,
                                            std::span<const int> labels,
                                            std::span<const std::size_t> train_indices,
                                            int classes) {
  std::vector<std::size_t> total(static_cast<std::size_t>(classes), 0);
  std::vector<std::size_t> wrong(static_cast<std::size_t>(classes), 0);
  for (std::size_t i : train_indices) {
    const int y = labels[i];
    if (y < 0 || y >= classes)
      throw std::invalid_argument("error_rate_table: label out of range");
    total[static_cast<std::size_t>(y)] += 1;
    if (preds[i] != y) wrong[static_cast<std::size_t>(y)] += 1;
  }
  std::vector<double> rates(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    if (total[static_cast<std::size_t>(c)] == 0)
      throw std::invalid_argument("error_rate_table: class " + std::to_string(c) +
                                  " has no training samples");
    rates[static_cast<std::size_t>(c)] = static_cast<double>(wrong[static_cast<std::size_t>(c)]) /
                                         static_cast<double>(total[static_cast<std::size_t>(c)]);
  }
  return rates;
}

/// Renormalizes prototype rows to unit norm in place (learned mode, applied
/// after every optimizer step).
inline void renormalize_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* r = m.row(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) sq += r[j] * r[j];
    const double n = std::sqrt(sq);
    if (n > 1e-12)
      for (std::size_t j = 0; j < m.cols(); ++j) r[j] /= n;
  }
}

}  // namespace ucil
