#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ucil/adam.hpp"
#include "ucil/contrastive.hpp"
#include "ucil/dataset.hpp"
#include "ucil/edl.hpp"
#include "ucil/inference.hpp"
#include "ucil/metrics.hpp"
#include "ucil/model.hpp"

namespace ucil {

struct LossBreakdown {
  double error = 0.0;
  double euc = 0.0;
  double ucl = 0.0;     // summed over the three views, unweighted
  double common = 0.0;
  double total = 0.0;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown losses;  // means over the epoch's batches
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
  double mean_class_uncertainty = 0.0;
};

inline nlohmann::json epoch_log_to_json(const EpochLog& e) {
  return nlohmann::json{{"epoch", e.epoch},
                        {"loss_error", e.losses.error},
                        {"loss_euc", e.losses.euc},
                        {"loss_ucl", e.losses.ucl},
                        {"loss_common", e.losses.common},
                        {"loss_total", e.losses.total},
                        {"val_accuracy", e.val_accuracy},
                        {"val_macro_f1", e.val_macro_f1},
                        {"mean_class_uncertainty", e.mean_class_uncertainty}};
}

namespace detail {

template <class Fn>
auto named_loss_term(const char* term, int epoch, Fn&& fn) {
  try {
    return fn();
  } catch (const NonFiniteError& e) {
    throw std::runtime_error(std::string(term) + " became non-finite at epoch " +
                             std::to_string(epoch) + ": " + e.what());
  }
}

}  // namespace detail

/// Assembles the full objective on the tape for one batch:
///   L_Total = L_Error + lambda1 L_EUC + lambda2 sum_v L_UCL^v + lambda3 L_Common.
/// The error-rate margin ablation disables the calibration term. Returns the
/// total Var; unweighted term values land in `breakdown`.
inline Var build_total_loss(Binding& binding, Model& model, const SplitDataset& ds,
                            const TrainConfig& config, std::span<const std::size_t> batch,
                            const UncertaintyTable& table, std::span<const double> err_table,
                            int epoch, LossBreakdown* breakdown = nullptr) {
  Tape& t = binding.tape();
  if (batch.empty()) throw std::invalid_argument("build_total_loss: empty batch");
  const std::size_t classes = static_cast<std::size_t>(ds.classes);
  const MarginPolicy policy = config.policy();
  const double lambda1 =
      config.margin_policy == MarginPolicyKind::error_rate ? 0.0 : config.lambda1;

  Var features = t.constant(ds.features);
  std::vector<std::size_t> bidx(batch.begin(), batch.end());
  std::vector<int> ylab(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) ylab[k] = ds.labels[batch[k]];

  std::array<Var, 3> z_batch, z_batch_norm;
  std::array<TapeOpinion, 3> opinions;
  detail::named_loss_term("encoder forward", epoch, [&] {
    for (std::size_t v = 0; v < 3; ++v) {
      EncodedView enc = encode(binding, model.encoders[v], ds.graphs[v], features);
      z_batch[v] = t.gather_rows(enc.embed, bidx);
      z_batch_norm[v] = t.gather_rows(enc.embed_norm, bidx);
      Var evidence = edl_evidence(binding, model.heads[v], z_batch[v]);
      opinions[v] = opinion_from_evidence(t, evidence);
    }
    return 0;
  });

  TapeOpinion fused = combine_views_tape(t, opinions, bidx);
  TapeDirichlet dirichlet = dirichlet_from_opinion(t, fused);

  Var error = detail::named_loss_term("L_Error", epoch, [&] {
    Var e = error_loss_tape(t, dirichlet, ylab);
    if (config.apply_edl_per_view)
      for (std::size_t v = 0; v < 3; ++v)
        e = t.add(e, error_loss_tape(t, dirichlet_from_opinion(t, opinions[v]), ylab));
    return e;
  });
  Var total = error;

  std::optional<Var> euc;
  if (lambda1 > 0.0) {
    euc = detail::named_loss_term("L_EUC", epoch, [&] {
      const std::vector<int> preds = argmax_rows(t.value(fused.beliefs));
      Var e = euc_loss_tape(t, fused, dirichlet, preds, ylab, epoch);
      if (config.apply_edl_per_view)
        for (std::size_t v = 0; v < 3; ++v) {
          const std::vector<int> view_preds = argmax_rows(t.value(opinions[v].beliefs));
          e = t.add(e, euc_loss_tape(t, opinions[v], dirichlet_from_opinion(t, opinions[v]),
                                     view_preds, ylab, epoch));
        }
      return e;
    });
    total = t.add(total, t.mul_scalar(*euc, lambda1));
  }

  std::optional<Var> ucl_sum;
  if (config.lambda2 > 0.0) {
    ucl_sum = detail::named_loss_term("L_UCL", epoch, [&] {
      std::vector<double> margins(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k)
        margins[k] = policy.margin_for(ylab[k], table.values, err_table);
      Var acc{};
      for (std::size_t v = 0; v < 3; ++v) {
        Var protos = model.prototype_mode == PrototypeMode::learned
                         ? binding.bind(model.prototypes[v])
                         : t.constant(model.prototypes[v]);
        Var term = ucl_loss(t, z_batch_norm[v], ylab, protos, margins, config.tau);
        acc = v == 0 ? term : t.add(acc, term);
      }
      return acc;
    });
    total = t.add(total, t.mul_scalar(*ucl_sum, config.lambda2));
  }

  std::optional<Var> common;
  if (config.lambda3 > 0.0) {
    common = detail::named_loss_term("L_Common", epoch, [&] {
      return common_loss(t, z_batch_norm, config.common_entry_mean);
    });
    total = t.add(total, t.mul_scalar(*common, config.lambda3));
  }

  LossBreakdown b;
  b.error = t.scalar_value(error);
  b.euc = euc ? t.scalar_value(*euc) : 0.0;
  b.ucl = ucl_sum ? t.scalar_value(*ucl_sum) : 0.0;
  b.common = common ? t.scalar_value(*common) : 0.0;
  b.total = t.scalar_value(total);

  // the assembled total must be the weighted sum of its parts
  const double recomputed =
      b.error + lambda1 * b.euc + config.lambda2 * b.ucl + config.lambda3 * b.common;
  if (std::abs(recomputed - b.total) > 1e-9)
    throw std::logic_error("build_total_loss: objective does not match its weighted terms");
  if (breakdown) *breakdown = b;
  return total;
}

struct TrainResult {
  Model model;             // best validation-accuracy snapshot
  UncertaintyTable table;  // class uncertainties at the snapshot epoch
  int best_epoch = 0;
  double best_val_accuracy = -1.0;
  Model final_model;
  UncertaintyTable final_table;
  std::vector<EpochLog> log;
};

/// Full training driver. Per epoch: refresh epoch-frozen centroids (centroid
/// mode), optimize shuffled batches of the training split, refresh the
/// per-class uncertainty table from the full training split, evaluate the
/// validation split and keep the best snapshot.
inline TrainResult train(const SplitDataset& ds, const TrainConfig& config,
                         std::ostream* log_stream = nullptr) {
  config.validate();
  if (ds.train_idx.empty() || ds.val_idx.empty())
    throw std::invalid_argument("train: dataset must provide train and val splits");
  const std::size_t classes = static_cast<std::size_t>(ds.classes);

  Model model = Model::init(config, static_cast<int>(ds.feature_dim()), ds.classes);
  UncertaintyTable table = UncertaintyTable::initial(classes, config.epsilon);
  std::vector<double> err_table(classes, 1.0);
  Adam adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
  Rng shuffle_rng(derive_seed(config.seed, "train/shuffle"));

  TrainResult result;
  std::optional<FusedInference> last_forward;  // post-update state of the previous epoch

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.prototype_mode == PrototypeMode::centroid) {
      if (!last_forward) last_forward = infer(model, ds);
      for (std::size_t v = 0; v < 3; ++v)
        model.prototypes[v] = update_centroids(last_forward->embed_norm[v], ds.labels,
                                               ds.train_idx, ds.classes, model.prototypes[v]);
    }

    std::vector<std::size_t> order = ds.train_idx;
    shuffle_rng.shuffle(order);

    LossBreakdown epoch_losses;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::span<const std::size_t> batch(order.data() + start, stop - start);

      Tape t;
      Binding binding(t, /*track=*/true);
      LossBreakdown b;
      Var total = build_total_loss(binding, model, ds, config, batch, table, err_table, epoch, &b);
      t.backward(total);

      std::vector<std::pair<Matrix*, const Matrix*>> updates;
      updates.reserve(binding.entries().size());
      for (const auto& entry : binding.entries())
        updates.emplace_back(entry.param, &t.grad(entry.var));
      adam.step(updates);
      if (config.prototype_mode == PrototypeMode::learned)
        for (auto& p : model.prototypes) renormalize_rows(p);

      epoch_losses.error += b.error;
      epoch_losses.euc += b.euc;
      epoch_losses.ucl += b.ucl;
      epoch_losses.common += b.common;
      epoch_losses.total += b.total;
      ++batches;
    }
    const double inv_b = 1.0 / static_cast<double>(batches);
    epoch_losses.error *= inv_b;
    epoch_losses.euc *= inv_b;
    epoch_losses.ucl *= inv_b;
    epoch_losses.common *= inv_b;
    epoch_losses.total *= inv_b;

    // epoch-end refresh from the full training split, then validation
    FusedInference fwd = infer(model, ds);
    table = update_class_uncertainty(fwd.uncertainty, ds.labels, ds.train_idx, classes, epoch);
    if (config.margin_policy == MarginPolicyKind::error_rate)
      err_table = error_rate_table(fwd.preds, ds.labels, ds.train_idx, ds.classes);
    const MetricsReport val = compute_metrics(fwd, ds.labels, ds.val_idx, ds.classes, table);

    EpochLog entry;
    entry.epoch = epoch;
    entry.losses = epoch_losses;
    entry.val_accuracy = val.accuracy;
    entry.val_macro_f1 = val.macro_f1;
    double u_mean = 0.0;
    for (double u : table.values) u_mean += u;
    entry.mean_class_uncertainty = u_mean / static_cast<double>(classes);
    result.log.push_back(entry);
    if (log_stream) (*log_stream) << epoch_log_to_json(entry).dump() << '\n';

    if (val.accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = val.accuracy;
      result.best_epoch = epoch;
      result.model = model;
      result.table = table;
    }
    last_forward = std::move(fwd);
  }

  result.final_model = model;
  result.final_table = table;
  return result;
}

}  // namespace ucil
