#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ucil/inference.hpp"
#include "ucil/opinion.hpp"

namespace ucil {

/// Evaluation summary over one split: overall and per-class accuracy/F1,
/// class grouping by uncertainty tertile, and the accuracy-vs-certainty
/// quadrant counts.
struct MetricsReport {
  std::size_t count = 0;
  double accuracy = 0.0;            // over samples
  double accuracy_balanced = 0.0;   // mean per-class accuracy
  double macro_f1 = 0.0;
  std::vector<std::size_t> per_class_count;
  std::vector<double> per_class_accuracy;
  std::vector<double> per_class_f1;
  std::vector<double> class_uncertainty;  // from the table used for grouping
  std::vector<int> class_group;           // 0 certain, 1 middle, 2 uncertain
  double group_boundary_low = 0.0;
  double group_boundary_high = 0.0;
  // mean per-class metrics inside each uncertainty group (0 if group empty)
  std::array<double, 3> group_accuracy{};
  std::array<double, 3> group_f1{};
  std::array<std::size_t, 3> group_class_count{};
  // accuracy-vs-certainty quadrants, threshold = median sample uncertainty
  std::size_t ac = 0, au = 0, ic = 0, iu = 0;
  double uncertainty_median = 0.0;
  double mean_uncertainty_correct = 0.0;  // NaN when no correct predictions
  double mean_uncertainty_wrong = 0.0;    // NaN when no wrong predictions
};

/// Tertile grouping of per-class uncertainties over [U_min, U_max]; boundary
/// ties fall into the lower-uncertainty group.
inline std::vector<int> uncertainty_groups(std::span<const double> class_uncertainty,
                                           double* boundary_low = nullptr,
                                           double* boundary_high = nullptr) {
  const auto [mn, mx] = std::minmax_element(class_uncertainty.begin(), class_uncertainty.end());
  const double lo = *mn, hi = *mx;
  const double b1 = lo + (hi - lo) / 3.0;
  const double b2 = lo + 2.0 * (hi - lo) / 3.0;
  if (boundary_low) *boundary_low = b1;
  if (boundary_high) *boundary_high = b2;
  std::vector<int> groups(class_uncertainty.size());
  for (std::size_t c = 0; c < class_uncertainty.size(); ++c) {
    const double u = class_uncertainty[c];
    groups[c] = u <= b1 ? 0 : (u <= b2 ? 1 : 2);
  }
  return groups;
}

/// Metrics from an already computed forward pass (labels are the dataset
/// labels; `indices` selects the split).
inline MetricsReport compute_metrics(const FusedInference& fwd, std::span<const int> labels,
                                     std::span<const std::size_t> indices, int classes,
                                     const UncertaintyTable& table) {
  if (indices.empty()) throw std::invalid_argument("compute_metrics: empty split");
  MetricsReport r;
  r.count = indices.size();
  const std::size_t C = static_cast<std::size_t>(classes);

  std::vector<std::size_t> tp(C, 0), fp(C, 0), fn(C, 0), n(C, 0);
  std::size_t correct_total = 0;
  double u_correct_sum = 0.0, u_wrong_sum = 0.0;
  std::size_t n_correct = 0, n_wrong = 0;
  std::vector<double> sample_u;
  sample_u.reserve(indices.size());

  for (std::size_t i : indices) {
    const int y = labels[i];
    const int p = fwd.preds[i];
    n[static_cast<std::size_t>(y)] += 1;
    if (p == y) {
      tp[static_cast<std::size_t>(y)] += 1;
      ++correct_total;
      u_correct_sum += fwd.uncertainty[i];
      ++n_correct;
    } else {
      fp[static_cast<std::size_t>(p)] += 1;
      fn[static_cast<std::size_t>(y)] += 1;
      u_wrong_sum += fwd.uncertainty[i];
      ++n_wrong;
    }
    sample_u.push_back(fwd.uncertainty[i]);
  }

  r.accuracy = static_cast<double>(correct_total) / static_cast<double>(indices.size());
  r.per_class_count = n;
  r.per_class_accuracy.resize(C);
  r.per_class_f1.resize(C);
  double acc_sum = 0.0, f1_sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double cls_acc =
        n[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(n[c]);
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    const double f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / denom;
    r.per_class_accuracy[c] = cls_acc;
    r.per_class_f1[c] = f1;
    acc_sum += cls_acc;
    f1_sum += f1;
  }
  r.accuracy_balanced = acc_sum / static_cast<double>(C);
  r.macro_f1 = f1_sum / static_cast<double>(C);

  // uncertainty-tertile groups over the per-class table
  r.class_uncertainty = table.values;
  r.class_group = uncertainty_groups(table.values, &r.group_boundary_low, &r.group_boundary_high);
  std::array<double, 3> acc_by_group{}, f1_by_group{};
  for (std::size_t c = 0; c < C; ++c) {
    const int g = r.class_group[c];
    acc_by_group[static_cast<std::size_t>(g)] += r.per_class_accuracy[c];
    f1_by_group[static_cast<std::size_t>(g)] += r.per_class_f1[c];
    r.group_class_count[static_cast<std::size_t>(g)] += 1;
  }
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t k = r.group_class_count[g];
    r.group_accuracy[g] = k == 0 ? 0.0 : acc_by_group[g] / static_cast<double>(k);
    r.group_f1[g] = k == 0 ? 0.0 : f1_by_group[g] / static_cast<double>(k);
  }

  // quadrants: certain iff sample uncertainty <= median over the split
  std::vector<double> sorted_u = sample_u;
  std::sort(sorted_u.begin(), sorted_u.end());
  const std::size_t m = sorted_u.size();
  r.uncertainty_median =
      m % 2 == 1 ? sorted_u[m / 2] : 0.5 * (sorted_u[m / 2 - 1] + sorted_u[m / 2]);
  for (std::size_t i : indices) {
    const bool accurate = fwd.preds[i] == labels[i];
    const bool certain = fwd.uncertainty[i] <= r.uncertainty_median;
    if (accurate && certain) ++r.ac;
    else if (accurate) ++r.au;
    else if (certain) ++r.ic;
    else ++r.iu;
  }

  r.mean_uncertainty_correct =
      n_correct == 0 ? std::nan("") : u_correct_sum / static_cast<double>(n_correct);
  r.mean_uncertainty_wrong =
      n_wrong == 0 ? std::nan("") : u_wrong_sum / static_cast<double>(n_wrong);
  return r;
}

inline MetricsReport evaluate(Model& model, const SplitDataset& ds,
                              std::span<const std::size_t> indices,
                              const UncertaintyTable& table) {
  const FusedInference fwd = infer(model, ds);
  return compute_metrics(fwd, ds.labels, indices, ds.classes, table);
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  auto opt = [](double v) {
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
  };
  static const char* group_names[3] = {"certain", "middle", "uncertain"};
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class_f1.size(); ++c)
    per_class.push_back({{"class", c},
                         {"count", r.per_class_count[c]},
                         {"accuracy", r.per_class_accuracy[c]},
                         {"f1", r.per_class_f1[c]},
                         {"uncertainty", r.class_uncertainty[c]},
                         {"group", group_names[r.class_group[c]]}});
  nlohmann::json groups;
  for (std::size_t g = 0; g < 3; ++g)
    groups[group_names[g]] = {{"classes", r.group_class_count[g]},
                              {"mean_accuracy", r.group_accuracy[g]},
                              {"mean_f1", r.group_f1[g]}};
  return nlohmann::json{
      {"count", r.count},
      {"accuracy", r.accuracy},
      {"accuracy_balanced", r.accuracy_balanced},
      {"macro_f1", r.macro_f1},
      {"per_class", per_class},
      {"groups", groups},
      {"group_boundaries", {r.group_boundary_low, r.group_boundary_high}},
      {"quadrants", {{"ac", r.ac}, {"au", r.au}, {"ic", r.ic}, {"iu", r.iu}}},
      {"uncertainty_median", r.uncertainty_median},
      {"mean_uncertainty_correct", opt(r.mean_uncertainty_correct)},
      {"mean_uncertainty_wrong", opt(r.mean_uncertainty_wrong)}};
}

inline void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  static const char* group_names[3] = {"certain", "middle", "uncertain"};
  out << "class,count,accuracy,f1,uncertainty,group\n";
  for (std::size_t c = 0; c < r.per_class_f1.size(); ++c)
    out << c << ',' << r.per_class_count[c] << ',' << r.per_class_accuracy[c] << ','
        << r.per_class_f1[c] << ',' << r.class_uncertainty[c] << ','
        << group_names[r.class_group[c]] << '\n';
}

}  // namespace ucil
