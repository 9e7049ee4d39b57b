#pragma once

#include <array>
#include <string>
#include <vector>

#include "ucil/config.hpp"
#include "ucil/edl.hpp"
#include "ucil/grad_check.hpp"
#include "ucil/temporal_gnn.hpp"

namespace ucil {

/// The full multi-view model: one temporal GNN encoder, one evidential head
/// and one prototype bank per view. Parameter initialization draws from a
/// dedicated named substream per component, so streams never shift when a
/// component is added or skipped.
struct Model {
  int input_dim = 0;
  int embed_dim = 0;
  int edl_hidden = 0;
  int classes = 0;
  PrototypeMode prototype_mode = PrototypeMode::learned;
  std::array<ViewEncoder, 3> encoders;
  std::array<EdlHead, 3> heads;
  std::array<Matrix, 3> prototypes;  // C x embed_dim, unit rows

  static Model init(const TrainConfig& config, int input_dim, int classes) {
    Model m;
    m.input_dim = input_dim;
    m.embed_dim = config.embed_dim;
    m.edl_hidden = config.edl_hidden;
    m.classes = classes;
    m.prototype_mode = config.prototype_mode;
    for (std::size_t v = 0; v < 3; ++v) {
      const std::string tag = "init/view" + std::to_string(v);
      Rng enc_rng(derive_seed(config.seed, tag + "/encoder"));
      m.encoders[v] = ViewEncoder::make(static_cast<std::size_t>(input_dim),
                                        static_cast<std::size_t>(config.embed_dim),
                                        config.gnn_layers, enc_rng);
      Rng head_rng(derive_seed(config.seed, tag + "/head"));
      m.heads[v] = EdlHead::make(static_cast<std::size_t>(config.embed_dim),
                                 static_cast<std::size_t>(config.edl_hidden),
                                 static_cast<std::size_t>(classes), head_rng);
      Rng proto_rng(derive_seed(config.seed, tag + "/prototypes"));
      Matrix p(static_cast<std::size_t>(classes), static_cast<std::size_t>(config.embed_dim));
      for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = proto_rng.normal();
      renormalize_rows(p);
      m.prototypes[v] = std::move(p);
    }
    return m;
  }

  /// Stable registry of parameter matrices. Prototypes participate only in
  /// learned mode (in centroid mode they are epoch-frozen statistics).
  std::vector<ParamRef> parameters(bool include_prototypes) {
    std::vector<ParamRef> out;
    for (std::size_t v = 0; v < 3; ++v) {
      const std::string base = "view" + std::to_string(v);
      for (std::size_t l = 0; l < encoders[v].layers.size(); ++l) {
        auto& layer = encoders[v].layers[l];
        const std::string lb = base + ".layer" + std::to_string(l);
        out.push_back({lb + ".weight", &layer.weight});
        out.push_back({lb + ".decay_weight", &layer.decay_weight});
        out.push_back({lb + ".decay_bias", &layer.decay_bias});
      }
      out.push_back({base + ".head.w1", &heads[v].w1});
      out.push_back({base + ".head.b1", &heads[v].b1});
      out.push_back({base + ".head.w2", &heads[v].w2});
      out.push_back({base + ".head.b2", &heads[v].b2});
      if (include_prototypes) out.push_back({base + ".prototypes", &prototypes[v]});
    }
    return out;
  }
};

}  // namespace ucil
