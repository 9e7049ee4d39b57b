#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>

#include "ucil/inference.hpp"

namespace ucil {

/// Writes per-view normalized embeddings with labels and per-sample fused
/// uncertainty as CSV, one row per (view, node), for offline plotting.
inline void export_embeddings(const std::filesystem::path& path, Model& model,
                              const SplitDataset& ds) {
  const FusedInference fwd = infer(model, ds);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_embeddings: cannot open " + path.string());
  const std::size_t d = fwd.embed_norm[0].cols();
  out << "view,node,label,uncertainty";
  for (std::size_t j = 0; j < d; ++j) out << ",e" << j;
  out << '\n';
  out << std::setprecision(17);
  for (View v : kAllViews) {
    const Matrix& z = fwd.embed_norm[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < z.rows(); ++i) {
      out << view_name(v) << ',' << i << ',' << ds.labels[i] << ',' << fwd.uncertainty[i];
      const double* r = z.row(i);
      for (std::size_t j = 0; j < d; ++j) out << ',' << r[j];
      out << '\n';
    }
  }
}

}  // namespace ucil
