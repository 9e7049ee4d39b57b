#pragma once

#include <span>
#include <vector>

#include "ucil/prototypes.hpp"
#include "ucil/tape.hpp"

namespace ucil {

/// Margin contrastive loss over class prototypes, mean over the batch of
///   log[1 + sum_{c != y_i} exp(margin_i + (S(z_i,p_c) - S(z_i,p_y_i))/tau)]
/// with S the dot product (cosine on unit rows). margin_i = 0 recovers the
/// plain prototype softmax loss. Inputs must be unit-norm rows; prototypes
/// may be a leaf (learned) or a constant (centroid mode).
inline Var ucl_loss(Tape& t, Var z_norm, std::span<const int> labels, Var prototypes,
                    std::span<const double> margins, double tau = 1.0) {
  const Matrix& z = t.value(z_norm);
  const Matrix& p = t.value(prototypes);
  const std::size_t batch = z.rows();
  const std::size_t classes = p.rows();
  detail::require_shape(z.cols() == p.cols(), "ucl_loss: embedding/prototype dim mismatch");
  detail::require_shape(labels.size() == batch, "ucl_loss: one label per row required");
  detail::require_shape(margins.size() == batch, "ucl_loss: one margin per row required");
  if (!(tau > 0.0)) throw std::invalid_argument("ucl_loss: tau must be positive");
  detail::require_unit_rows(z, 1e-6, "ucl_loss: embeddings");
  // looser than the embedding check: finite-difference probes of learned
  // prototypes move them slightly off the unit sphere
  detail::require_unit_rows(p, 1e-4, "ucl_loss: prototypes");

  std::vector<std::size_t> label_cols(batch);
  Matrix margin_rows(batch, classes);
  Matrix keep(batch, classes);
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw std::invalid_argument("ucl_loss: label out of range");
    if (margins[i] < 0.0) throw std::invalid_argument("ucl_loss: negative margin");
    label_cols[i] = static_cast<std::size_t>(labels[i]);
    for (std::size_t c = 0; c < classes; ++c) {
      margin_rows(i, c) = margins[i];
      keep(i, c) = c == label_cols[i] ? 0.0 : 1.0;
    }
  }

  Var sims = t.matmul_nt(z_norm, prototypes);
  if (tau != 1.0) sims = t.mul_scalar(sims, 1.0 / tau);
  Var own = t.pick_per_row(sims, label_cols);
  Var gap = t.sub(sims, t.broadcast_col(own, classes));
  Var exponent = t.add(gap, t.constant(std::move(margin_rows)));
  Var terms = t.mul(t.exp(exponent), t.constant(std::move(keep)));
  Var per_sample = t.log(t.add_scalar(t.rowsum(terms), 1.0));
  return t.mean(per_sample);
}

/// Cross-view consistency of the batch similarity structure: for every view
/// pair, the (entry-mean or raw) squared Frobenius distance between the two
/// Gram matrices of the normalized batch embeddings, summed over pairs.
inline Var common_loss(Tape& t, std::span<const Var> z_norm_views, bool entry_mean = true) {
  if (z_norm_views.size() < 2)
    throw std::invalid_argument("common_loss: need at least two views");
  const std::size_t batch = t.value(z_norm_views[0]).rows();
  for (Var v : z_norm_views)
    detail::require_shape(t.value(v).rows() == batch, "common_loss: batch size mismatch");

  std::vector<Var> grams;
  grams.reserve(z_norm_views.size());
  for (Var v : z_norm_views) grams.push_back(t.matmul_nt(v, v));

  Var total = t.scalar(0.0);
  for (std::size_t a = 0; a < grams.size(); ++a)
    for (std::size_t b = a + 1; b < grams.size(); ++b) {
      Var d = t.sub(grams[a], grams[b]);
      Var sq = t.mul(d, d);
      total = t.add(total, entry_mean ? t.mean(sq) : t.sum(sq));
    }
  return total;
}

}  // namespace ucil
