#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "ucil/dataset.hpp"
#include "ucil/matrix.hpp"

namespace ucil {

/// Long-tail multi-view generator settings. Training class sizes follow
/// n_i = round(n_max * gamma^i); val/test splits are balanced; per-view
/// token assignment is tuned so the realized same-class edge ratio lands
/// within +-0.05 of q_view.
struct SyntheticConfig {
  int classes = 10;
  int n_max = 200;
  double gamma = 0.6;
  int d_in = 32;
  double mean_sep = 1.0;
  double q_hashtag = 0.9;
  double q_entity = 0.7;
  double q_user = 0.85;
  double time_delta_days = 3.0;
  double time_jitter_days = 1.0;
  int val_per_class = 20;
  int test_per_class = 30;
  std::uint64_t seed = 1;

  double q_for(View v) const {
    switch (v) {
      case View::hashtag: return q_hashtag;
      case View::entity: return q_entity;
      case View::user: return q_user;
    }
    return 1.0;
  }

  void validate() const {
    if (classes < 2) throw std::invalid_argument("synthetic: classes must be >= 2");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("synthetic: gamma must be in (0, 1]");
    if (n_max < 1) throw std::invalid_argument("synthetic: n_max must be >= 1");
    if (d_in < 1) throw std::invalid_argument("synthetic: d_in must be >= 1");
    if (val_per_class < 1 || test_per_class < 1)
      throw std::invalid_argument("synthetic: val/test per-class counts must be >= 1");
    for (View v : kAllViews)
      if (!(q_for(v) > 0.0 && q_for(v) <= 1.0))
        throw std::invalid_argument(std::string("synthetic: q_") + view_name(v) +
                                    " must be in (0, 1]");
  }
};

inline void to_json(nlohmann::json& j, const SyntheticConfig& c) {
  j = nlohmann::json{{"classes", c.classes},
                     {"n_max", c.n_max},
                     {"gamma", c.gamma},
                     {"d_in", c.d_in},
                     {"mean_sep", c.mean_sep},
                     {"q_hashtag", c.q_hashtag},
                     {"q_entity", c.q_entity},
                     {"q_user", c.q_user},
                     {"time_delta_days", c.time_delta_days},
                     {"time_jitter_days", c.time_jitter_days},
                     {"val_per_class", c.val_per_class},
                     {"test_per_class", c.test_per_class},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticConfig& c) {
  SyntheticConfig defaults;
  c.classes = j.value("classes", defaults.classes);
  c.n_max = j.value("n_max", defaults.n_max);
  c.gamma = j.value("gamma", defaults.gamma);
  c.d_in = j.value("d_in", defaults.d_in);
  c.mean_sep = j.value("mean_sep", defaults.mean_sep);
  c.q_hashtag = j.value("q_hashtag", defaults.q_hashtag);
  c.q_entity = j.value("q_entity", defaults.q_entity);
  c.q_user = j.value("q_user", defaults.q_user);
  c.time_delta_days = j.value("time_delta_days", defaults.time_delta_days);
  c.time_jitter_days = j.value("time_jitter_days", defaults.time_jitter_days);
  c.val_per_class = j.value("val_per_class", defaults.val_per_class);
  c.test_per_class = j.value("test_per_class", defaults.test_per_class);
  c.seed = j.value("seed", defaults.seed);
}

/// Named presets for the CLI.
inline SyntheticConfig synthetic_preset(const std::string& name) {
  SyntheticConfig c;
  if (name == "crisislex7") {
    c.classes = 7;
    c.n_max = 989;
    c.gamma = 0.5;
    c.d_in = 64;
    c.q_hashtag = 0.8778;
    c.q_entity = 0.9257;
    c.q_user = 0.8707;
    return c;
  }
  if (name == "longtail10") {
    c.classes = 10;
    c.n_max = 200;
    c.gamma = 0.6;
    c.d_in = 32;
    c.q_hashtag = 0.9;
    c.q_entity = 0.7;
    c.q_user = 0.85;
    return c;
  }
  throw std::invalid_argument("unknown synthetic preset '" + name +
                              "' (expected crisislex7|longtail10)");
}

/// Training-split class sizes n_i = round(n_max * gamma^i), round-half-even.
inline std::vector<int> longtail_sizes(int n_max, double gamma, int classes) {
  std::vector<int> sizes(static_cast<std::size_t>(classes));
  for (int i = 0; i < classes; ++i) {
    const double raw = static_cast<double>(n_max) * std::pow(gamma, static_cast<double>(i));
    const int n = static_cast<int>(std::nearbyint(raw));
    if (n < 1)
      throw std::invalid_argument("longtail_sizes: class " + std::to_string(i) +
                                  " rounds to zero training samples");
    sizes[static_cast<std::size_t>(i)] = n;
  }
  return sizes;
}

namespace detail {

// Precomputed per-slot uniforms so the mixing-rate search uses common random
// numbers; the realized edge quality is then (nearly) monotone in the rate.
struct TokenDraws {
  std::vector<double> choose;  // signal-vs-noise decision per slot
  std::vector<double> place;   // pair-local vs global noise decision
  std::vector<double> signal;  // index draw within the class signal pool
  std::vector<double> noise;   // index draw within the chosen noise pool
};

// Share of impure tokens drawn from the pool shared by a confusable class
// pair rather than the global pool. Pair-local noise wires the same classes
// whose feature means overlap, which is where boundary learning is contested.
inline constexpr double kPairNoiseShare = 0.6;

// Each view is blind to a fixed set of class pairs: messages of a blind pair
// draw their signal tokens from a pool shared by the whole pair, so that view
// cannot tell the two classes apart while the other views still can. This
// mirrors the wildly uneven per-view edge quality of real message graphs.
// Pair 0 (the two head classes) is never blinded, and a view with a purity
// target of 1.0 carries no blind pairs at all.
inline std::vector<int> blind_pairs(View view, int pair_count, double q_target) {
  if (q_target >= 1.0 || pair_count < 2) return {};
  std::vector<int> out;
  switch (view) {
    case View::entity:
      if (pair_count > 2) out.push_back(2);
      if (pair_count > 3) out.push_back(3);
      if (out.empty()) out.push_back(1);
      break;
    case View::user:
      out.push_back(1);
      break;
    case View::hashtag:
      if (pair_count > 3) out.push_back(3);
      break;
  }
  return out;
}

inline std::vector<std::vector<std::string>> assign_tokens(
    const TokenDraws& draws, double mix_rate, std::span<const int> labels, int slots_per_message,
    std::span<const int> signal_pool_sizes, std::span<const int> pair_pool_sizes,
    std::span<const int> blind, int noise_pool_size, const std::string& prefix) {
  const std::size_t n = labels.size();
  std::vector<std::vector<std::string>> tokens(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int pair = labels[i] / 2;
    const bool blinded = std::find(blind.begin(), blind.end(), pair) != blind.end();
    tokens[i].reserve(static_cast<std::size_t>(slots_per_message));
    for (int s = 0; s < slots_per_message; ++s) {
      const std::size_t k = i * static_cast<std::size_t>(slots_per_message) +
                            static_cast<std::size_t>(s);
      if (draws.choose[k] < mix_rate) {
        if (blinded) {
          const int pool = pair_pool_sizes[static_cast<std::size_t>(pair)];
          const int t = std::min(pool - 1, static_cast<int>(draws.signal[k] * pool));
          tokens[i].push_back(prefix + "P" + std::to_string(pair) + "s" + std::to_string(t));
        } else {
          const int pool = signal_pool_sizes[static_cast<std::size_t>(labels[i])];
          const int t = std::min(pool - 1, static_cast<int>(draws.signal[k] * pool));
          tokens[i].push_back(prefix + "c" + std::to_string(labels[i]) + "s" +
                              std::to_string(t));
        }
      } else if (draws.place[k] < kPairNoiseShare) {
        const int pool = pair_pool_sizes[static_cast<std::size_t>(pair)];
        const int t = std::min(pool - 1, static_cast<int>(draws.noise[k] * pool));
        tokens[i].push_back(prefix + "p" + std::to_string(pair) + "n" + std::to_string(t));
      } else {
        const int t =
            std::min(noise_pool_size - 1, static_cast<int>(draws.noise[k] * noise_pool_size));
        tokens[i].push_back(prefix + "g" + std::to_string(t));
      }
    }
    std::sort(tokens[i].begin(), tokens[i].end());
    tokens[i].erase(std::unique(tokens[i].begin(), tokens[i].end()), tokens[i].end());
  }
  return tokens;
}

inline double realized_quality(const std::vector<std::vector<std::string>>& tokens,
                               std::span<const int> labels, View view) {
  std::vector<MessageRecord> probe(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    probe[i].id = static_cast<std::int64_t>(i);
    probe[i].label = labels[i];
    probe[i].features = {0.0};
    switch (view) {
      case View::hashtag: probe[i].hashtags = tokens[i]; break;
      case View::entity: probe[i].entities = tokens[i]; break;
      case View::user: probe[i].users = tokens[i]; break;
    }
  }
  const ViewGraph g = build_view_graph(probe, view);
  const auto q = edge_quality(g, labels);
  return q ? *q : 1.0;  // token-free degenerate case: no impurity present
}

}  // namespace detail

/// Generates a seeded long-tail multi-view dataset. Deterministic: the same
/// config yields byte-identical records and splits.
inline SplitDataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const int C = config.classes;
  const std::vector<int> train_sizes = longtail_sizes(config.n_max, config.gamma, C);

  std::vector<int> totals(static_cast<std::size_t>(C));
  std::size_t n = 0;
  for (int c = 0; c < C; ++c) {
    totals[static_cast<std::size_t>(c)] =
        train_sizes[static_cast<std::size_t>(c)] + config.val_per_class + config.test_per_class;
    n += static_cast<std::size_t>(totals[static_cast<std::size_t>(c)]);
  }

  // labels / splits, class-major order
  std::vector<int> labels(n);
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  {
    std::size_t at = 0;
    for (int c = 0; c < C; ++c) {
      const int tr = train_sizes[static_cast<std::size_t>(c)];
      for (int k = 0; k < totals[static_cast<std::size_t>(c)]; ++k, ++at) {
        labels[at] = c;
        if (k < tr)
          train_idx.push_back(at);
        else if (k < tr + config.val_per_class)
          val_idx.push_back(at);
        else
          test_idx.push_back(at);
      }
    }
  }

  // Class-conditional Gaussian features. Means sit at radius mean_sep and
  // come in confusable pairs: classes 2k and 2k+1 share an anchor direction,
  // offset to opposite sides. With sizes sorted by the long-tail recipe this
  // pairs classes of adjacent size, so every pair's boundary is contested.
  // Non-paired classes stay near-orthogonal.
  Rng feat_rng(derive_seed(config.seed, "synthetic/features"));
  const double pair_offset = 0.25;
  auto random_unit = [&feat_rng, &config]() {
    std::vector<double> v(static_cast<std::size_t>(config.d_in));
    double norm = 0.0;
    for (double& x : v) {
      x = feat_rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  };
  std::vector<std::vector<double>> means(static_cast<std::size_t>(C));
  const int anchors = (C + 1) / 2;
  for (int k = 0; k < anchors; ++k) {
    const int first = 2 * k;
    const int second = 2 * k + 1;
    const std::vector<double> anchor = random_unit();
    std::vector<double> perp = random_unit();
    double dot = 0.0;
    for (int d = 0; d < config.d_in; ++d)
      dot += perp[static_cast<std::size_t>(d)] * anchor[static_cast<std::size_t>(d)];
    double pnorm = 0.0;
    for (int d = 0; d < config.d_in; ++d) {
      perp[static_cast<std::size_t>(d)] -= dot * anchor[static_cast<std::size_t>(d)];
      pnorm += perp[static_cast<std::size_t>(d)] * perp[static_cast<std::size_t>(d)];
    }
    pnorm = std::sqrt(pnorm);
    auto place = [&](int cls, double side) {
      std::vector<double> m(static_cast<std::size_t>(config.d_in));
      double norm = 0.0;
      for (int d = 0; d < config.d_in; ++d) {
        m[static_cast<std::size_t>(d)] =
            anchor[static_cast<std::size_t>(d)] +
            side * pair_offset * perp[static_cast<std::size_t>(d)] / pnorm;
        norm += m[static_cast<std::size_t>(d)] * m[static_cast<std::size_t>(d)];
      }
      norm = std::sqrt(norm);
      for (double& x : m) x = config.mean_sep * x / norm;
      means[static_cast<std::size_t>(cls)] = std::move(m);
    };
    if (second >= C) {
      place(first, 0.0);  // odd class count: the last class sits on its anchor
    } else {
      place(first, 1.0);
      place(second, -1.0);
    }
  }

  std::vector<MessageRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].id = static_cast<std::int64_t>(i);
    records[i].label = labels[i];
    records[i].features.resize(static_cast<std::size_t>(config.d_in));
    const auto& mu = means[static_cast<std::size_t>(labels[i])];
    for (int d = 0; d < config.d_in; ++d)
      records[i].features[static_cast<std::size_t>(d)] =
          mu[static_cast<std::size_t>(d)] + feat_rng.normal();
  }

  // timestamps: one event day per class plus Gaussian jitter
  Rng time_rng(derive_seed(config.seed, "synthetic/time"));
  for (std::size_t i = 0; i < n; ++i)
    records[i].timestamp = static_cast<double>(labels[i]) * config.time_delta_days +
                           config.time_jitter_days * time_rng.normal();

  // per-view tokens: bisect the signal/noise mixing rate until the realized
  // same-class edge ratio matches the target
  const int slots = 2;
  std::vector<int> signal_pool(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c)
    signal_pool[static_cast<std::size_t>(c)] =
        std::max(1, (totals[static_cast<std::size_t>(c)] + 5) / 6);
  const int pairs = (C + 1) / 2;
  std::vector<int> pair_pool(static_cast<std::size_t>(pairs));
  for (int k = 0; k < pairs; ++k) {
    int pair_total = totals[static_cast<std::size_t>(2 * k)];
    if (2 * k + 1 < C) pair_total += totals[static_cast<std::size_t>(2 * k + 1)];
    pair_pool[static_cast<std::size_t>(k)] = std::max(2, (pair_total + 7) / 8);
  }
  const int noise_pool = std::max(8, static_cast<int>(n) / 4);

  for (View view : kAllViews) {
    const double target = config.q_for(view);
    Rng tok_rng(derive_seed(config.seed, std::string("synthetic/tokens/") + view_name(view)));
    detail::TokenDraws draws;
    draws.choose.resize(n * static_cast<std::size_t>(slots));
    draws.place.resize(n * static_cast<std::size_t>(slots));
    draws.signal.resize(n * static_cast<std::size_t>(slots));
    draws.noise.resize(n * static_cast<std::size_t>(slots));
    for (std::size_t k = 0; k < draws.choose.size(); ++k) {
      draws.choose[k] = tok_rng.uniform();
      draws.place[k] = tok_rng.uniform();
      draws.signal[k] = tok_rng.uniform();
      draws.noise[k] = tok_rng.uniform();
    }
    const std::string prefix = std::string(view_name(view)) + "/";
    const std::vector<int> blind = detail::blind_pairs(view, pairs, target);
    auto quality_at = [&](double mix) {
      auto toks = detail::assign_tokens(draws, mix, labels, slots, signal_pool, pair_pool,
                                        blind, noise_pool, prefix);
      return detail::realized_quality(toks, labels, view);
    };

    double mix;
    if (target >= 1.0) {
      mix = 1.0;  // all-signal assignment is exactly pure
    } else {
      double lo = 0.0, hi = 1.0;
      double q_lo = quality_at(lo);
      if (target < q_lo - 0.05)
        throw std::invalid_argument(std::string("generate_synthetic: q_") + view_name(view) +
                                    "=" + std::to_string(target) +
                                    " infeasible; baseline same-class ratio is " +
                                    std::to_string(q_lo));
      mix = 1.0;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double q = quality_at(mid);
        if (std::abs(q - target) <= 0.02) {
          mix = mid;
          break;
        }
        if (q < target)
          lo = mid;
        else
          hi = mid;
        mix = mid;
      }
      const double achieved = quality_at(mix);
      if (std::abs(achieved - target) > 0.05)
        throw std::invalid_argument(std::string("generate_synthetic: q_") + view_name(view) +
                                    " target " + std::to_string(target) +
                                    " unreachable; best realized ratio " +
                                    std::to_string(achieved));
    }

    auto toks = detail::assign_tokens(draws, mix, labels, slots, signal_pool, pair_pool, blind,
                                      noise_pool, prefix);
    for (std::size_t i = 0; i < n; ++i) {
      switch (view) {
        case View::hashtag: records[i].hashtags = std::move(toks[i]); break;
        case View::entity: records[i].entities = std::move(toks[i]); break;
        case View::user: records[i].users = std::move(toks[i]); break;
      }
    }
  }

  return dataset_from_records(std::move(records), std::move(train_idx), std::move(val_idx),
                              std::move(test_idx), C);
}

}  // namespace ucil
