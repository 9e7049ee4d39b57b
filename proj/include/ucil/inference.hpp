#pragma once

#include <array>
#include <vector>

#include "ucil/dataset.hpp"
#include "ucil/edl.hpp"
#include "ucil/model.hpp"
#include "ucil/temporal_gnn.hpp"

namespace ucil {

/// No-grad full-graph forward: per-view embeddings plus fused predictions
/// and per-sample fused uncertainty for every node.
struct FusedInference {
  Matrix beliefs;                    // N x C
  std::vector<double> uncertainty;   // N
  std::vector<int> preds;            // N
  std::array<Matrix, 3> embed_norm;  // per view, N x d
};

inline FusedInference infer(Model& model, const SplitDataset& ds) {
  Tape t;
  Binding binding(t, /*track=*/false);
  Var features = t.constant(ds.features);

  std::array<TapeOpinion, 3> opinions;
  FusedInference out;
  for (std::size_t v = 0; v < 3; ++v) {
    EncodedView enc = encode(binding, model.encoders[v], ds.graphs[v], features);
    Var evidence = edl_evidence(binding, model.heads[v], enc.embed);
    opinions[v] = opinion_from_evidence(t, evidence);
    out.embed_norm[v] = t.value(enc.embed_norm);
  }
  TapeOpinion fused = combine_views_tape(t, opinions);
  out.beliefs = t.value(fused.beliefs);
  const Matrix& u = t.value(fused.uncertainty);
  out.uncertainty.resize(u.rows());
  for (std::size_t i = 0; i < u.rows(); ++i) out.uncertainty[i] = u(i, 0);
  out.preds = argmax_rows(out.beliefs);
  return out;
}

}  // namespace ucil
