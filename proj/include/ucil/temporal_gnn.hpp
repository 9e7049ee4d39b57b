#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ucil/binding.hpp"
#include "ucil/matrix.hpp"
#include "ucil/tape.hpp"
#include "ucil/view_graph.hpp"

namespace ucil {

/// One propagation layer: linear transform, temporally weighted neighbor
/// aggregation, activation. The decay projector maps the transformed state
/// to a scalar rate; softplus keeps the rate nonnegative so older messages
/// never receive amplified weight.
struct TemporalGnnLayer {
  Matrix weight;        // d_in x d_out
  Matrix decay_weight;  // d_out x 1
  Matrix decay_bias;    // 1 x 1
  bool relu_output = true;

  static TemporalGnnLayer make(std::size_t d_in, std::size_t d_out, bool relu_output, Rng& rng) {
    TemporalGnnLayer l;
    l.relu_output = relu_output;
    const double lim = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    l.weight = Matrix(d_in, d_out);
    for (std::size_t i = 0; i < l.weight.size(); ++i)
      l.weight.data()[i] = rng.uniform(-lim, lim);
    const double dlim = std::sqrt(6.0 / static_cast<double>(d_out + 1));
    l.decay_weight = Matrix(d_out, 1);
    for (std::size_t i = 0; i < l.decay_weight.size(); ++i)
      l.decay_weight.data()[i] = rng.uniform(-dlim, dlim);
    l.decay_bias = Matrix(1, 1, 0.0);
    return l;
  }
};

/// Stack of temporal GNN layers for one view. Hidden layers use ReLU, the
/// final layer is linear; similarity consumers take the L2-normalized copy.
struct ViewEncoder {
  std::vector<TemporalGnnLayer> layers;

  std::size_t output_dim() const { return layers.back().weight.cols(); }

  static ViewEncoder make(std::size_t d_in, std::size_t d_out, int n_layers, Rng& rng) {
    if (n_layers < 1) throw std::invalid_argument("ViewEncoder: need at least one layer");
    ViewEncoder enc;
    std::size_t in = d_in;
    for (int l = 0; l < n_layers; ++l) {
      const bool relu = l + 1 < n_layers;
      enc.layers.push_back(TemporalGnnLayer::make(in, d_out, relu, rng));
      in = d_out;
    }
    return enc;
  }
};

/// Attention row for a single node: a_j = exp(-decay |t_j - t_i|) normalized
/// over the neighborhood. Weights sum to one.
inline std::vector<double> temporal_attention_weights(double decay, double t_i,
                                                      std::span<const double> neighbor_times) {
  if (neighbor_times.empty())
    throw std::invalid_argument("temporal_attention_weights: empty neighborhood");
  std::vector<double> w(neighbor_times.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = -decay * std::abs(neighbor_times[j] - t_i);
    max_logit = std::max(max_logit, w[j]);
  }
  double z = 0.0;
  for (double& x : w) {
    x = std::exp(x - max_logit);
    z += x;
  }
  for (double& x : w) x /= z;
  return w;
}

struct EncodedView {
  Var embed;       // N x d, unnormalized (feeds the evidential head)
  Var embed_norm;  // N x d, unit rows (feeds similarity losses)
};

/// Full-graph forward pass of one view encoder on the tape.
inline EncodedView encode(Binding& binding, ViewEncoder& enc, const ViewGraph& g, Var features) {
  Tape& t = binding.tape();
  if (t.value(features).rows() != g.node_count)
    throw std::invalid_argument("encode: feature rows must equal node count");
  Var h = features;
  for (auto& layer : enc.layers) {
    Var w = binding.bind(layer.weight);
    Var dw = binding.bind(layer.decay_weight);
    Var db = binding.bind(layer.decay_bias);
    Var m = t.matmul(h, w);
    Var rate = t.softplus(t.add_rowvec(t.matmul(m, dw), db));
    Var agg = t.neighbor_aggregate(m, rate, g.offsets, g.neighbors, g.timestamps);
    h = layer.relu_output ? t.relu(agg) : agg;
  }
  return EncodedView{h, t.l2_normalize_rows(h)};
}

}  // namespace ucil
