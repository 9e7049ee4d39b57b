#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ucil/grad_check.hpp"
#include "ucil/synthetic.hpp"
#include "ucil/train.hpp"

namespace ucil {

/// Small random attributed multi-view dataset for gradient and encoder
/// checks. Every class keeps at least one training and one validation node.
inline SplitDataset make_random_dataset(std::uint64_t seed, std::size_t nodes = 16,
                                        int classes = 3, std::size_t d_in = 6) {
  Rng rng(derive_seed(seed, "random_dataset"));
  std::vector<MessageRecord> records(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    auto& r = records[i];
    r.id = static_cast<std::int64_t>(i);
    r.label = static_cast<int>(i % static_cast<std::size_t>(classes));
    r.timestamp = rng.uniform(0.0, 10.0);
    r.features.resize(d_in);
    for (double& f : r.features) f = rng.normal();
    auto tokens = [&](const char* tag) {
      std::vector<std::string> out;
      const std::size_t k = 1 + rng.index(2);
      for (std::size_t s = 0; s < k; ++s)
        out.push_back(std::string(tag) + std::to_string(rng.index(5)));
      return out;
    };
    r.hashtags = tokens("h");
    r.entities = tokens("e");
    r.users = tokens("u");
  }
  std::vector<std::size_t> train, val;
  for (std::size_t i = 0; i < nodes; ++i)
    (i + static_cast<std::size_t>(classes) < nodes ? train : val).push_back(i);
  std::vector<std::size_t> test = val;
  return dataset_from_records(std::move(records), std::move(train), std::move(val),
                              std::move(test), classes);
}

/// Runs one finite-difference comparison: `build` assembles the loss on a
/// fresh tape, binding every matrix in `params` through the Binding.
inline GradCheckReport check_problem(std::span<const ParamRef> params,
                                     const std::function<Var(Binding&)>& build,
                                     GradCheckOptions opt = {}) {
  auto loss_fn = [&]() {
    Tape t;
    Binding b(t, /*track=*/false);
    return t.scalar_value(build(b));
  };
  auto grad_fn = [&]() {
    Tape t;
    Binding b(t, /*track=*/true);
    Var loss = build(b);
    t.backward(loss);
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (const auto& p : params) {
      const Matrix* g = nullptr;
      for (const auto& e : b.entries())
        if (e.param == p.value) {
          g = &t.grad(e.var);
          break;
        }
      if (!g) throw std::logic_error("check_problem: parameter never bound: " + p.name);
      grads.push_back(*g);
    }
    return grads;
  };
  return grad_check(params, loss_fn, grad_fn, opt);
}

struct SuiteCheck {
  std::string name;
  double max_rel_error = 0.0;
  bool ok = false;
};

struct GradSuiteResult {
  std::vector<SuiteCheck> checks;
  bool ok = true;
};

/// The full analytic-vs-finite-difference suite: every loss term under every
/// margin policy, the encoder, and the assembled objective end to end.
inline GradSuiteResult run_grad_check_suite(std::uint64_t seed, double tol = 1e-4) {
  GradSuiteResult result;
  GradCheckOptions opt;
  opt.tol = tol;

  auto run = [&](const std::string& name, std::span<const ParamRef> params,
                 const std::function<Var(Binding&)>& build) {
    const GradCheckReport rep = check_problem(params, build, opt);
    result.checks.push_back({name, rep.max_rel_error, rep.ok()});
    result.ok = result.ok && rep.ok();
  };

  {  // quadratic sanity case: exact gradient, expect machine-level agreement
    Rng rng(derive_seed(seed, "suite/quadratic"));
    Matrix x(3, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    ParamRef ref{"x", &x};
    run("sum_of_squares", std::span(&ref, 1), [&](Binding& b) {
      Var v = b.bind(x);
      return b.tape().sum(b.tape().mul(v, v));
    });
  }

  {  // margin contrastive loss, all four margin policies, 4 samples x 3 classes
    Rng rng(derive_seed(seed, "suite/ucl"));
    const std::size_t batch = 4, d = 5;
    const int classes = 3;
    Matrix z_raw(batch, d), p_raw(static_cast<std::size_t>(classes), d);
    for (std::size_t i = 0; i < z_raw.size(); ++i) z_raw.data()[i] = rng.normal();
    for (std::size_t i = 0; i < p_raw.size(); ++i) p_raw.data()[i] = rng.normal();
    const std::vector<int> labels{0, 1, 2, 1};
    std::vector<double> table(static_cast<std::size_t>(classes)), errs(table.size());
    for (auto& u : table) u = rng.uniform(0.1, 0.9);
    for (auto& e : errs) e = rng.uniform(0.0, 1.0);
    for (MarginPolicyKind kind :
         {MarginPolicyKind::none, MarginPolicyKind::fixed, MarginPolicyKind::error_rate,
          MarginPolicyKind::uncertainty}) {
      MarginPolicy policy;
      policy.kind = kind;
      std::vector<double> margins(batch);
      for (std::size_t k = 0; k < batch; ++k)
        margins[k] = policy.margin_for(labels[k], table, errs);
      std::vector<ParamRef> refs{{"z_raw", &z_raw}, {"prototypes_raw", &p_raw}};
      run(std::string("ucl_policy_") + margin_policy_name(kind), refs, [&](Binding& b) {
        Tape& t = b.tape();
        Var z = t.l2_normalize_rows(b.bind(z_raw));
        Var p = t.l2_normalize_rows(b.bind(p_raw));
        return ucl_loss(t, z, labels, p, margins);
      });
    }
  }

  {  // Dirichlet cross-entropy error on random alpha
    Rng rng(derive_seed(seed, "suite/error"));
    Matrix alpha(5, 4);
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha.data()[i] = rng.uniform(1.1, 4.0);
    std::vector<int> labels(alpha.rows());
    for (auto& y : labels) y = static_cast<int>(rng.index(alpha.cols()));
    ParamRef ref{"alpha", &alpha};
    run("error_loss", std::span(&ref, 1), [&](Binding& b) {
      Tape& t = b.tape();
      Var a = b.bind(alpha);
      return error_loss_tape(t, TapeDirichlet{a, t.rowsum(a)}, labels);
    });
  }

  {  // calibration loss through three-view fusion
    Rng rng(derive_seed(seed, "suite/euc"));
    const std::size_t batch = 5;
    const int classes = 3;
    std::array<Matrix, 3> raw;
    for (auto& m : raw) {
      m = Matrix(batch, static_cast<std::size_t>(classes));
      for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    }
    std::vector<int> labels(batch);
    for (auto& y : labels) y = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    std::vector<ParamRef> refs{{"view0", &raw[0]}, {"view1", &raw[1]}, {"view2", &raw[2]}};
    run("euc_loss", refs, [&](Binding& b) {
      Tape& t = b.tape();
      std::array<TapeOpinion, 3> ops;
      for (std::size_t v = 0; v < 3; ++v)
        ops[v] = opinion_from_evidence(t, t.softplus(b.bind(raw[v])));
      TapeOpinion fused = combine_views_tape(t, ops);
      TapeDirichlet dir = dirichlet_from_opinion(t, fused);
      const std::vector<int> preds = argmax_rows(t.value(fused.beliefs));
      return euc_loss_tape(t, fused, dir, preds, labels, /*epoch=*/10);
    });
  }

  {  // cross-view consistency
    Rng rng(derive_seed(seed, "suite/common"));
    std::array<Matrix, 3> raw;
    for (auto& m : raw) {
      m = Matrix(4, 5);
      for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    }
    std::vector<ParamRef> refs{{"view0", &raw[0]}, {"view1", &raw[1]}, {"view2", &raw[2]}};
    run("common_loss", refs, [&](Binding& b) {
      Tape& t = b.tape();
      std::array<Var, 3> z;
      for (std::size_t v = 0; v < 3; ++v) z[v] = t.l2_normalize_rows(b.bind(raw[v]));
      return common_loss(t, z, /*entry_mean=*/true);
    });
  }

  {  // gradients through the temporal encoder
    SplitDataset ds = make_random_dataset(seed);
    TrainConfig cfg;
    cfg.embed_dim = 7;
    cfg.edl_hidden = 5;
    cfg.gnn_layers = 2;
    cfg.seed = seed;
    Model model = Model::init(cfg, static_cast<int>(ds.feature_dim()), ds.classes);
    std::vector<ParamRef> refs;
    for (std::size_t l = 0; l < model.encoders[0].layers.size(); ++l) {
      auto& layer = model.encoders[0].layers[l];
      const std::string base = "layer" + std::to_string(l);
      refs.push_back({base + ".weight", &layer.weight});
      refs.push_back({base + ".decay_weight", &layer.decay_weight});
      refs.push_back({base + ".decay_bias", &layer.decay_bias});
    }
    run("encoder", refs, [&](Binding& b) {
      Tape& t = b.tape();
      Var features = t.constant(ds.features);
      EncodedView enc = encode(b, model.encoders[0], ds.graphs[0], features);
      return t.mean(t.mul(enc.embed, enc.embed));
    });
  }

  {  // the assembled objective end to end, learned prototypes included
    SplitDataset ds = make_random_dataset(seed);
    TrainConfig cfg;
    cfg.embed_dim = 7;
    cfg.edl_hidden = 5;
    cfg.gnn_layers = 2;
    cfg.prototype_mode = PrototypeMode::learned;
    cfg.margin_policy = MarginPolicyKind::uncertainty;
    cfg.seed = seed;
    Model model = Model::init(cfg, static_cast<int>(ds.feature_dim()), ds.classes);
    UncertaintyTable table = UncertaintyTable::initial(static_cast<std::size_t>(ds.classes),
                                                       cfg.epsilon);
    std::vector<double> errs(static_cast<std::size_t>(ds.classes), 1.0);
    const std::vector<ParamRef> refs = model.parameters(/*include_prototypes=*/true);
    run("total_loss", refs, [&](Binding& b) {
      return build_total_loss(b, model, ds, cfg, ds.train_idx, table, errs, /*epoch=*/3);
    });
  }

  return result;
}

}  // namespace ucil
