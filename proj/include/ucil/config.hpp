#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ucil/prototypes.hpp"

namespace ucil {

/// All training hyperparameters, schedules and ablation switches. Defaults
/// follow the reference setting of the method.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 1500;
  int gnn_layers = 2;
  int embed_dim = 256;
  int edl_hidden = 128;
  double beta = 0.1;         // uncertainty-margin coefficient
  double lambda1 = 1.0;      // calibration loss weight
  double lambda2 = 0.1;      // contrastive loss weight (summed over views)
  double lambda3 = 0.5;      // cross-view consistency weight
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  PrototypeMode prototype_mode = PrototypeMode::learned;
  MarginPolicyKind margin_policy = MarginPolicyKind::uncertainty;
  double margin_fixed = 0.1;       // fixed-margin ablation
  double margin_error_scale = 0.1; // error-rate-margin ablation
  bool apply_edl_per_view = false; // also apply error/calibration losses per view
  double epsilon = 1e-3;           // initial class uncertainty is 1 - epsilon
  double tau = 1.0;                // optional temperature for the plain prototype loss
  bool common_entry_mean = true;   // entry-mean vs raw Frobenius consistency
  std::uint64_t seed = 42;

  MarginPolicy policy() const {
    MarginPolicy p;
    p.kind = margin_policy;
    p.fixed_margin = margin_fixed;
    p.error_scale = margin_error_scale;
    p.beta = beta;
    return p;
  }

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
    if (gnn_layers < 1) throw std::invalid_argument("config: gnn_layers must be >= 1");
    if (embed_dim < 1 || edl_hidden < 1)
      throw std::invalid_argument("config: dimensions must be positive");
    if (beta < 0 || lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
      throw std::invalid_argument("config: loss weights must be nonnegative");
    if (!(learning_rate > 0)) throw std::invalid_argument("config: learning_rate must be > 0");
    if (!(epsilon > 0 && epsilon < 1))
      throw std::invalid_argument("config: epsilon must be in (0, 1)");
    if (!(tau > 0)) throw std::invalid_argument("config: tau must be > 0");
    if (margin_fixed < 0 || margin_error_scale < 0)
      throw std::invalid_argument("config: margins must be nonnegative");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"gnn_layers", c.gnn_layers},
                     {"embed_dim", c.embed_dim},
                     {"edl_hidden", c.edl_hidden},
                     {"beta", c.beta},
                     {"lambda1", c.lambda1},
                     {"lambda2", c.lambda2},
                     {"lambda3", c.lambda3},
                     {"learning_rate", c.learning_rate},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"prototype_mode", prototype_mode_name(c.prototype_mode)},
                     {"margin_policy", margin_policy_name(c.margin_policy)},
                     {"margin_fixed", c.margin_fixed},
                     {"margin_error_scale", c.margin_error_scale},
                     {"apply_edl_per_view", c.apply_edl_per_view},
                     {"epsilon", c.epsilon},
                     {"tau", c.tau},
                     {"common_entry_mean", c.common_entry_mean},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.gnn_layers = j.value("gnn_layers", d.gnn_layers);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.edl_hidden = j.value("edl_hidden", d.edl_hidden);
  c.beta = j.value("beta", d.beta);
  c.lambda1 = j.value("lambda1", d.lambda1);
  c.lambda2 = j.value("lambda2", d.lambda2);
  c.lambda3 = j.value("lambda3", d.lambda3);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.prototype_mode =
      prototype_mode_from_name(j.value("prototype_mode", prototype_mode_name(d.prototype_mode)));
  c.margin_policy =
      margin_policy_from_name(j.value("margin_policy", margin_policy_name(d.margin_policy)));
  c.margin_fixed = j.value("margin_fixed", d.margin_fixed);
  c.margin_error_scale = j.value("margin_error_scale", d.margin_error_scale);
  c.apply_edl_per_view = j.value("apply_edl_per_view", d.apply_edl_per_view);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.tau = j.value("tau", d.tau);
  c.common_entry_mean = j.value("common_entry_mean", d.common_entry_mean);
  c.seed = j.value("seed", d.seed);
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("config file " + path.string() + ": " + e.what());
  }
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

}  // namespace ucil
