#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ucil/binding.hpp"
#include "ucil/matrix.hpp"
#include "ucil/opinion.hpp"
#include "ucil/tape.hpp"

namespace ucil {

/// Two-layer evidential classifier head (d -> hidden -> C, ReLU between).
/// Softplus on the output logits keeps the emitted evidence nonnegative.
struct EdlHead {
  Matrix w1;  // d x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x C
  Matrix b2;  // 1 x C

  static EdlHead make(std::size_t d, std::size_t hidden, std::size_t classes, Rng& rng) {
    EdlHead h;
    auto glorot = [&rng](std::size_t in, std::size_t out) {
      Matrix m(in, out);
      const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
      for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-lim, lim);
      return m;
    };
    h.w1 = glorot(d, hidden);
    h.b1 = Matrix(1, hidden);
    h.w2 = glorot(hidden, classes);
    h.b2 = Matrix(1, classes);
    return h;
  }
};

/// Evidence e >= 0 for a batch of embeddings.
inline Var edl_evidence(Binding& binding, EdlHead& head, Var z) {
  Tape& t = binding.tape();
  Var w1 = binding.bind(head.w1);
  Var b1 = binding.bind(head.b1);
  Var w2 = binding.bind(head.w2);
  Var b2 = binding.bind(head.b2);
  Var hidden = t.relu(t.add_rowvec(t.matmul(z, w1), b1));
  Var logits = t.add_rowvec(t.matmul(hidden, w2), b2);
  return t.softplus(logits);
}

/// Batched opinion on the tape: beliefs B x C, uncertainty B x 1.
struct TapeOpinion {
  Var beliefs;
  Var uncertainty;
};

/// Batched Dirichlet parameters: alpha B x C, strength B x 1.
struct TapeDirichlet {
  Var alpha;
  Var strength;
};

/// alpha = e + 1, S = sum(alpha), b = e/S, u = C/S.
inline TapeOpinion opinion_from_evidence(Tape& t, Var evidence) {
  const std::size_t classes = t.value(evidence).cols();
  Var strength = t.add_scalar(t.rowsum(evidence), static_cast<double>(classes));
  Var beliefs = t.div(evidence, t.broadcast_col(strength, classes));
  Var uncertainty = t.sdiv(static_cast<double>(classes), strength);
  return TapeOpinion{beliefs, uncertainty};
}

/// Dempster's rule applied rowwise to two batched opinions. Throws
/// FusionDegenerateError naming the offending samples when 1 - T underflows.
inline TapeOpinion dempster_combine_tape(Tape& t, const TapeOpinion& a, const TapeOpinion& b,
                                         std::span<const std::size_t> sample_ids = {}) {
  const std::size_t classes = t.value(a.beliefs).cols();
  detail::require_shape(t.value(b.beliefs).cols() == classes,
                        "dempster_combine_tape: class count mismatch");
  Var sa = t.rowsum(a.beliefs);
  Var sb = t.rowsum(b.beliefs);
  Var dot = t.rowsum(t.mul(a.beliefs, b.beliefs));
  Var conflict = t.sub(t.mul(sa, sb), dot);
  Var norm = t.rsub_scalar(1.0, conflict);

  const Matrix& nv = t.value(norm);
  std::string degenerate;
  for (std::size_t i = 0; i < nv.rows(); ++i) {
    if (nv(i, 0) < 1e-12) {
      if (!degenerate.empty()) degenerate += ", ";
      degenerate += std::to_string(i < sample_ids.size() ? sample_ids[i] : i);
    }
  }
  if (!degenerate.empty())
    throw FusionDegenerateError("dempster_combine_tape: total conflict for samples [" +
                                degenerate + "]");

  Var ub = t.broadcast_col(b.uncertainty, classes);
  Var ua = t.broadcast_col(a.uncertainty, classes);
  Var numer = t.add(t.mul(a.beliefs, b.beliefs),
                    t.add(t.mul(a.beliefs, ub), t.mul(b.beliefs, ua)));
  Var beliefs = t.div(numer, t.broadcast_col(norm, classes));
  Var uncertainty = t.div(t.mul(a.uncertainty, b.uncertainty), norm);
  return TapeOpinion{beliefs, uncertainty};
}

/// Left fold over the per-view opinions.
inline TapeOpinion combine_views_tape(Tape& t, std::span<const TapeOpinion> views,
                                      std::span<const std::size_t> sample_ids = {}) {
  if (views.empty()) throw std::invalid_argument("combine_views_tape: no views");
  TapeOpinion acc = views[0];
  for (std::size_t v = 1; v < views.size(); ++v)
    acc = dempster_combine_tape(t, acc, views[v], sample_ids);
  return acc;
}

/// Reconstructs fused Dirichlet parameters: S = C/u, alpha = b*S + 1.
inline TapeDirichlet dirichlet_from_opinion(Tape& t, const TapeOpinion& m) {
  const std::size_t classes = t.value(m.beliefs).cols();
  Var strength = t.sdiv(static_cast<double>(classes), m.uncertainty);
  Var alpha = t.add_scalar(t.mul(m.beliefs, t.broadcast_col(strength, classes)), 1.0);
  return TapeDirichlet{alpha, strength};
}

/// Dirichlet cross-entropy error, mean over the batch of
/// psi(S_i) - psi(alpha_{i,y_i}).
inline Var error_loss_tape(Tape& t, const TapeDirichlet& d, std::span<const int> labels) {
  const Matrix& alpha = t.value(d.alpha);
  detail::require_shape(labels.size() == alpha.rows(), "error_loss_tape: one label per row");
  std::vector<std::size_t> cols(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= alpha.cols())
      throw std::invalid_argument("error_loss_tape: label out of range");
    cols[i] = static_cast<std::size_t>(labels[i]);
  }
  Var dg_alpha = t.digamma(d.alpha);
  Var dg_strength = t.digamma(d.strength);
  return t.mean(t.sub(dg_strength, t.pick_per_row(dg_alpha, std::move(cols))));
}

/// Annealing coefficient of the calibration loss, 1-based epoch index.
inline double annealing_coefficient(int epoch) {
  return std::min(1.0, static_cast<double>(epoch) / 25.0);
}

/// Argmax of fused beliefs per row; ties break to the lowest class index.
inline std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.cols(); ++j)
      if (r[j] > r[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

/// Uncertainty calibration loss on the fused opinion. Correct predictions
/// are pushed toward more total evidence, wrong ones toward the uniform
/// Dirichlet; the whole term is annealed by min(1, epoch/25) and averaged
/// over the batch.
inline Var euc_loss_tape(Tape& t, const TapeOpinion& fused, const TapeDirichlet& d,
                         std::span<const int> preds, std::span<const int> labels, int epoch) {
  const Matrix& alpha = t.value(d.alpha);
  const std::size_t batch = alpha.rows();
  const std::size_t classes = alpha.cols();
  detail::require_shape(preds.size() == batch && labels.size() == batch,
                        "euc_loss_tape: preds/labels must match batch");

  Matrix correct(batch, 1), wrong(batch, 1), onehot(batch, classes), keep(batch, classes);
  for (std::size_t i = 0; i < batch; ++i) {
    const bool ok = preds[i] == labels[i];
    correct(i, 0) = ok ? 1.0 : 0.0;
    wrong(i, 0) = ok ? 0.0 : 1.0;
    for (std::size_t j = 0; j < classes; ++j) {
      const bool is_y = j == static_cast<std::size_t>(labels[i]);
      onehot(i, j) = is_y ? 1.0 : 0.0;
      keep(i, j) = is_y ? 0.0 : 1.0;
    }
  }
  Var mc = t.constant(std::move(correct));
  Var mw = t.constant(std::move(wrong));
  Var y = t.constant(std::move(onehot));
  Var not_y = t.constant(std::move(keep));

  // accurate-and-certain term: -max(p) log(1 - u)
  Var p = t.div(d.alpha, t.broadcast_col(d.strength, classes));
  Var max_p = t.row_max(p);
  Var log_conf = t.log_clamped(t.rsub_scalar(1.0, fused.uncertainty), 1e-12);
  Var ac_term = t.mul_scalar(t.sum(t.mul(t.mul(mc, max_p), log_conf)), -1.0);

  // inaccurate-and-uncertain term: KL(Dir(alpha~) || Dir(1)) with the true
  // class evidence removed
  Var alpha_tilde = t.add(y, t.mul(not_y, d.alpha));
  Var s_tilde = t.rowsum(alpha_tilde);
  Var kl = t.sub(t.lgamma(s_tilde), t.rowsum(t.lgamma(alpha_tilde)));
  Var centered = t.sub(t.digamma(alpha_tilde), t.broadcast_col(t.digamma(s_tilde), classes));
  kl = t.add(kl, t.rowsum(t.mul(t.add_scalar(alpha_tilde, -1.0), centered)));
  kl = t.add_scalar(kl, -std::lgamma(static_cast<double>(classes)));
  Var iu_term = t.sum(t.mul(mw, kl));

  const double scale = annealing_coefficient(epoch) / static_cast<double>(batch);
  return t.mul_scalar(t.add(ac_term, iu_term), scale);
}

}  // namespace ucil
