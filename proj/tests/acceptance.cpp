// Acceptance suite: property checks plus direction-checked synthetic
// experiments, one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "ucil/ucil.hpp"

using namespace ucil;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int number, bool ok, const std::string& what, double seconds) {
  std::printf("[%s] criterion %2d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", number, what.c_str(),
              seconds);
  if (!ok) ++failures;
}

template <class Fn>
void criterion(int number, const char* name, Fn&& fn) {
  const auto t0 = Clock::now();
  bool ok = false;
  std::string detail;
  try {
    detail = fn(ok);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  report(number, ok, std::string(name) + (detail.empty() ? "" : " — " + detail), seconds);
}

Opinion random_opinion(std::size_t classes, Rng& rng) {
  std::vector<double> raw(classes + 1);
  double s = 0.0;
  for (double& x : raw) {
    x = rng.uniform(0.01, 1.0);
    s += x;
  }
  Opinion m;
  m.beliefs.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) m.beliefs[c] = raw[c] / s;
  m.uncertainty = raw[classes] / s;
  return m;
}

bool opinions_close(const Opinion& a, const Opinion& b, double tol) {
  for (std::size_t c = 0; c < a.classes(); ++c)
    if (std::abs(a.beliefs[c] - b.beliefs[c]) > tol) return false;
  return std::abs(a.uncertainty - b.uncertainty) <= tol;
}

// ---- synthetic end-to-end configuration (criteria 7-9) ----

SyntheticConfig scenario_dataset(std::uint64_t seed) {
  SyntheticConfig c;
  c.classes = 10;
  c.n_max = 200;
  c.gamma = 0.6;
  c.d_in = 32;
  c.mean_sep = 1.0;
  c.q_hashtag = 0.9;
  c.q_entity = 0.7;
  c.q_user = 0.85;
  c.val_per_class = 20;
  c.test_per_class = 30;
  c.seed = seed;
  return c;
}

TrainConfig scenario_train(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 40;
  c.batch_size = 256;
  c.embed_dim = 48;
  c.edl_hidden = 32;
  c.gnn_layers = 2;
  c.prototype_mode = PrototypeMode::centroid;
  c.margin_policy = MarginPolicyKind::uncertainty;
  c.seed = seed;
  return c;
}

struct ScenarioRun {
  MetricsReport test_full, test_base, test_noeuc;
  MetricsReport val_full;
  std::vector<int> groups_full;  // tertile grouping from the full model's table
};

ScenarioRun run_scenario_seed(std::uint64_t seed) {
  const SplitDataset ds = generate_synthetic(scenario_dataset(seed));

  TrainConfig full = scenario_train(seed);

  TrainConfig base = full;  // prototype loss without margins or calibration
  base.margin_policy = MarginPolicyKind::none;
  base.lambda1 = 0.0;

  TrainConfig noeuc = full;  // margins kept, calibration removed
  noeuc.lambda1 = 0.0;

  TrainResult r_full = train(ds, full);
  TrainResult r_base = train(ds, base);
  TrainResult r_noeuc = train(ds, noeuc);

  ScenarioRun out;
  const FusedInference fwd_full = infer(r_full.model, ds);
  out.test_full = compute_metrics(fwd_full, ds.labels, ds.test_idx, ds.classes, r_full.table);
  out.val_full = compute_metrics(fwd_full, ds.labels, ds.val_idx, ds.classes, r_full.table);
  out.test_base = evaluate(r_base.model, ds, ds.test_idx, r_base.table);
  out.test_noeuc = evaluate(r_noeuc.model, ds, ds.test_idx, r_noeuc.table);
  out.groups_full = uncertainty_groups(r_full.table.values);
  return out;
}

double group_mean_f1(const MetricsReport& m, const std::vector<int>& groups, int which) {
  double acc = 0.0;
  std::size_t k = 0;
  for (std::size_t c = 0; c < groups.size(); ++c)
    if (groups[c] == which) {
      acc += m.per_class_f1[c];
      ++k;
    }
  return k == 0 ? 0.0 : acc / static_cast<double>(k);
}

std::vector<ScenarioRun>& scenario_runs() {
  static std::vector<ScenarioRun> runs;
  if (runs.empty())
    for (std::uint64_t seed = 1; seed <= 5; ++seed) runs.push_back(run_scenario_seed(seed));
  return runs;
}

}  // namespace

int main() {
  criterion(1, "opinion algebra: mass sum, vacuous identity, commutativity, associativity",
            [](bool& ok) {
    Rng rng(20240001);
    std::size_t checked = 0;
    ok = true;
    for (std::size_t classes : {2u, 3u, 4u, 10u}) {
      const Opinion vac = Opinion::vacuous(classes);
      for (int k = 0; k < 250; ++k) {
        const Opinion a = random_opinion(classes, rng);
        const Opinion b = random_opinion(classes, rng);
        const Opinion c = random_opinion(classes, rng);
        const Opinion ab = dempster_combine(a, b);
        ok = ok && std::abs(ab.mass_sum() - 1.0) <= 1e-9;
        ok = ok && opinions_close(dempster_combine(a, vac), a, 1e-9) &&
             opinions_close(dempster_combine(vac, a), a, 1e-9);
        ok = ok && opinions_close(ab, dempster_combine(b, a), 1e-9);
        ok = ok && opinions_close(dempster_combine(ab, c),
                                  dempster_combine(a, dempster_combine(b, c)), 1e-9);
        ++checked;
      }
    }
    return std::to_string(checked) + " seeded pairs/triples, C in {2,3,4,10}";
  });

  criterion(2, "fusion matches the brute-force joint-mass oracle", [](bool& ok) {
    Rng rng(20240002);
    ok = true;
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      const std::size_t classes = 2 + rng.index(3);  // C <= 4
      std::vector<Opinion> views{random_opinion(classes, rng), random_opinion(classes, rng),
                                 random_opinion(classes, rng)};
      const Opinion fold = combine_views(views);
      const Opinion oracle = oracles::joint_mass_combine(views);
      for (std::size_t c = 0; c < classes; ++c)
        worst = std::max(worst, std::abs(fold.beliefs[c] - oracle.beliefs[c]));
      worst = std::max(worst, std::abs(fold.uncertainty - oracle.uncertainty));
    }
    ok = worst <= 1e-9;
    std::ostringstream s;
    s << "200 random 3-view instances, max deviation " << worst;
    return s.str();
  });

  criterion(3, "error loss: closed form vs Monte-Carlo and digamma hand values", [](bool& ok) {
    ok = true;
    // hand-derived values, tight tolerance
    const std::vector<double> a1{2, 1, 1}, a2{1, 1, 1}, a3{101, 1, 1};
    ok = ok && std::abs(error_loss(a1, 0) - 5.0 / 6.0) <= 1e-10;
    ok = ok && std::abs(error_loss(a2, 0) - 1.5) <= 1e-10;
    ok = ok && std::abs(error_loss(a3, 0) - (1.0 / 101.0 + 1.0 / 102.0)) <= 1e-10;

    Rng rng(20240003);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const std::size_t classes = 2 + rng.index(4);  // C <= 5
      std::vector<double> alpha(classes);
      for (double& a : alpha) a = rng.uniform(1.0, 8.0);
      const std::size_t y = rng.index(classes);
      const double mc = oracles::error_loss_monte_carlo(alpha, y, 1000000, rng);
      worst = std::max(worst, std::abs(mc - error_loss(alpha, y)));
    }
    ok = ok && worst <= 1e-2;
    std::ostringstream s;
    s << "20 alphas x 1e6 draws, max |closed - MC| = " << worst;
    return s.str();
  });

  criterion(4, "gradient suite: every loss term and the full objective at 1e-4", [](bool& ok) {
    const GradSuiteResult r = run_grad_check_suite(/*seed=*/7, /*tol=*/1e-4);
    ok = r.ok;
    std::ostringstream s;
    double worst = 0.0;
    for (const auto& c : r.checks) worst = std::max(worst, c.max_rel_error);
    s << r.checks.size() << " checks, worst rel err " << worst;
    return s.str();
  });

  criterion(5, "reduction identities: zero margin = prototype softmax; zero weights = pure error",
            [](bool& ok) {
    ok = true;
    // (a) beta = 0 (equivalently all u_c = 0) reproduces the softmax form
    Rng rng(20240005);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t batch = 1 + rng.index(8), d = 6;
      const int classes = 2 + static_cast<int>(rng.index(5));
      Matrix z(batch, d), protos(static_cast<std::size_t>(classes), d);
      for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
      for (std::size_t i = 0; i < protos.size(); ++i) protos.data()[i] = rng.normal();
      renormalize_rows(z);
      renormalize_rows(protos);
      std::vector<int> labels(batch);
      for (auto& y : labels) y = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
      MarginPolicy policy;
      policy.kind = MarginPolicyKind::uncertainty;
      policy.beta = 0.0;
      const std::vector<double> table(static_cast<std::size_t>(classes), 0.7);
      std::vector<double> margins(batch);
      for (std::size_t k = 0; k < batch; ++k)
        margins[k] = policy.margin_for(labels[k], table, table);
      Tape t;
      const double ucl =
          t.scalar_value(ucl_loss(t, t.constant(z), labels, t.constant(protos), margins));
      const double psc = oracles::psc_reference(z, labels, protos, 1.0);
      ok = ok && std::abs(ucl - psc) <= 1e-9;
    }

    // (b) lambda1 = lambda2 = lambda3 = 0 equals a pure error-loss run with
    // the representation branch fully disabled
    SyntheticConfig dc;
    dc.classes = 3;
    dc.n_max = 30;
    dc.gamma = 0.6;
    dc.d_in = 8;
    dc.mean_sep = 2.0;
    dc.val_per_class = 4;
    dc.test_per_class = 4;
    dc.seed = 77;
    const SplitDataset ds = generate_synthetic(dc);
    TrainConfig a;
    a.epochs = 8;
    a.batch_size = 64;
    a.embed_dim = 12;
    a.edl_hidden = 8;
    a.seed = 13;
    a.lambda1 = a.lambda2 = a.lambda3 = 0.0;
    a.prototype_mode = PrototypeMode::learned;
    a.margin_policy = MarginPolicyKind::uncertainty;
    TrainConfig b = a;
    b.prototype_mode = PrototypeMode::centroid;
    b.margin_policy = MarginPolicyKind::none;
    const TrainResult ra = train(ds, a);
    const TrainResult rb = train(ds, b);
    for (std::size_t i = 0; i < ra.log.size(); ++i) {
      ok = ok && ra.log[i].losses.error == rb.log[i].losses.error;
      ok = ok && ra.log[i].losses.total == ra.log[i].losses.error;
      ok = ok && ra.log[i].val_accuracy == rb.log[i].val_accuracy;
    }
    return std::string("50 loss identities + matched training traces");
  });

  criterion(6, "sparse temporal encoder equals the dense reference", [](bool& ok) {
    Rng rng(20240006);
    ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 4 + rng.index(29);  // <= 32 nodes
      std::vector<MessageRecord> records(n);
      for (std::size_t i = 0; i < n; ++i) {
        records[i].id = static_cast<std::int64_t>(i);
        records[i].label = 0;
        records[i].timestamp = rng.uniform(0.0, 15.0);
        records[i].features = {0.0};
        const std::size_t k = rng.index(3);
        for (std::size_t s = 0; s < k; ++s)
          records[i].hashtags.push_back("t" + std::to_string(rng.index(n / 2 + 1)));
      }
      const ViewGraph g = build_view_graph(records, View::hashtag);
      Matrix feats(n, 4);
      for (std::size_t i = 0; i < feats.size(); ++i) feats.data()[i] = rng.normal();
      Rng init(derive_seed(42 + static_cast<std::uint64_t>(trial), "acc6"));
      ViewEncoder enc = ViewEncoder::make(4, 5, 2, init);
      Tape t;
      Binding bind(t, false);
      const Matrix sparse = t.value(encode(bind, enc, g, t.constant(feats)).embed);
      const Matrix dense = oracles::dense_encode_reference(enc, g, feats);
      worst = std::max(worst, sparse.max_abs_diff(dense));

      // attention rows sum to one
      const std::size_t probe = rng.index(n);
      std::vector<double> times;
      for (int j : g.neighbors_of(probe))
        times.push_back(g.timestamps[static_cast<std::size_t>(j)]);
      const auto w =
          temporal_attention_weights(rng.uniform(0.0, 3.0), g.timestamps[probe], times);
      double sum = 0.0;
      for (double x : w) sum += x;
      ok = ok && std::abs(sum - 1.0) <= 1e-9;
    }
    ok = ok && worst < 1e-9;
    std::ostringstream s;
    s << "50 graphs <= 32 nodes, max |sparse - dense| = " << worst;
    return s.str();
  });

  criterion(7, "direction: full model beats the margin-free baseline on uncertain classes",
            [](bool& ok) {
    const auto& runs = scenario_runs();
    int wins = 0;
    double mean_full = 0.0, mean_base = 0.0;
    std::ostringstream s;
    for (const auto& r : runs) {
      const double f_full = group_mean_f1(r.test_full, r.groups_full, 2);
      const double f_base = group_mean_f1(r.test_base, r.groups_full, 2);
      if (f_full > f_base) ++wins;
      mean_full += r.test_full.macro_f1;
      mean_base += r.test_base.macro_f1;
      s << " [" << f_full << " vs " << f_base << "]";
    }
    mean_full /= 5.0;
    mean_base /= 5.0;
    ok = wins >= 4 && mean_full >= mean_base;
    std::ostringstream out;
    out << "uncertain-tertile wins " << wins << "/5" << s.str() << "; overall macro-F1 "
        << mean_full << " vs " << mean_base;
    return out.str();
  });

  criterion(8, "direction: removing the calibration loss degrades accuracy", [](bool& ok) {
    const auto& runs = scenario_runs();
    int wins = 0;
    std::ostringstream s;
    for (const auto& r : runs) {
      if (r.test_full.accuracy > r.test_noeuc.accuracy) ++wins;
      s << " [" << r.test_full.accuracy << " vs " << r.test_noeuc.accuracy << "]";
    }
    ok = wins >= 4;
    return "wins " + std::to_string(wins) + "/5" + s.str();
  });

  criterion(9, "direction: misclassified validation samples carry higher fused uncertainty",
            [](bool& ok) {
    const auto& runs = scenario_runs();
    int wins = 0;
    std::ostringstream s;
    for (const auto& r : runs) {
      const double gap = r.val_full.mean_uncertainty_wrong - r.val_full.mean_uncertainty_correct;
      if (std::isfinite(gap) && gap > 0.0) ++wins;
      s << " [gap " << gap << "]";
    }
    ok = wins >= 4;
    return "wins " + std::to_string(wins) + "/5" + s.str();
  });

  criterion(10, "determinism: identical seed and config give bit-identical logs and metrics",
            [](bool& ok) {
    SyntheticConfig dc;
    dc.classes = 4;
    dc.n_max = 40;
    dc.gamma = 0.6;
    dc.d_in = 8;
    dc.mean_sep = 1.5;
    dc.val_per_class = 5;
    dc.test_per_class = 5;
    dc.seed = 3;
    const SplitDataset ds = generate_synthetic(dc);
    TrainConfig c;
    c.epochs = 8;
    c.batch_size = 64;
    c.embed_dim = 12;
    c.edl_hidden = 8;
    c.prototype_mode = PrototypeMode::centroid;
    c.margin_policy = MarginPolicyKind::uncertainty;
    c.seed = 21;
    std::ostringstream log1, log2;
    const TrainResult r1 = train(ds, c, &log1);
    const TrainResult r2 = train(ds, c, &log2);
    TrainResult& m1 = const_cast<TrainResult&>(r1);
    TrainResult& m2 = const_cast<TrainResult&>(r2);
    const MetricsReport t1 = evaluate(m1.model, ds, ds.test_idx, r1.table);
    const MetricsReport t2 = evaluate(m2.model, ds, ds.test_idx, r2.table);
    ok = log1.str() == log2.str() &&
         metrics_to_json(t1).dump() == metrics_to_json(t2).dump();
    return std::string("two runs, ") + std::to_string(r1.log.size()) + " epochs each";
  });

  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "OK" : "FAILED", failures);
  return failures;
}
