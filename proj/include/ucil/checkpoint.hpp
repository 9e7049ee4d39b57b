#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ucil/model.hpp"
#include "ucil/opinion.hpp"

namespace ucil {

/// A trained model snapshot: the config it was trained with, the parameter
/// matrices, and the per-class uncertainty table from the snapshot epoch.
struct Checkpoint {
  TrainConfig config;
  Model model;
  UncertaintyTable table;
  int epoch = 0;
  double val_accuracy = 0.0;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'U', 'C', 'I', 'L', 'C', 'K', 'P', '1'};

inline void write_raw(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_raw(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Model& model = const_cast<Model&>(ckpt.model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());

  auto params = model.parameters(/*include_prototypes=*/true);
  nlohmann::json meta{{"config", ckpt.config},
                      {"input_dim", model.input_dim},
                      {"classes", model.classes},
                      {"epoch", ckpt.epoch},
                      {"val_accuracy", ckpt.val_accuracy},
                      {"table", ckpt.table.values},
                      {"table_epoch", ckpt.table.epoch}};
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& p : params)
    shapes.push_back({{"name", p.name}, {"rows", p.value->rows()}, {"cols", p.value->cols()}});
  meta["params"] = shapes;
  const std::string meta_str = meta.dump();

  detail::write_raw(out, detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  const std::uint64_t len = meta_str.size();
  detail::write_raw(out, &len, sizeof(len));
  detail::write_raw(out, meta_str.data(), meta_str.size());
  for (const auto& p : params)
    detail::write_raw(out, p.value->data(), p.value->size() * sizeof(double));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());

  char magic[8];
  detail::read_raw(in, magic, sizeof(magic));
  if (std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint file");
  std::uint64_t len = 0;
  detail::read_raw(in, &len, sizeof(len));
  std::string meta_str(len, '\0');
  detail::read_raw(in, meta_str.data(), len);
  const nlohmann::json meta = nlohmann::json::parse(meta_str);

  Checkpoint ckpt;
  ckpt.config = meta.at("config").get<TrainConfig>();
  ckpt.epoch = meta.at("epoch").get<int>();
  ckpt.val_accuracy = meta.at("val_accuracy").get<double>();
  ckpt.table.values = meta.at("table").get<std::vector<double>>();
  ckpt.table.epoch = meta.at("table_epoch").get<int>();
  ckpt.model = Model::init(ckpt.config, meta.at("input_dim").get<int>(),
                           meta.at("classes").get<int>());

  auto params = ckpt.model.parameters(/*include_prototypes=*/true);
  const auto& shapes = meta.at("params");
  if (shapes.size() != params.size())
    throw std::runtime_error("load_checkpoint: parameter list mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& s = shapes[i];
    if (s.at("name").get<std::string>() != params[i].name ||
        s.at("rows").get<std::size_t>() != params[i].value->rows() ||
        s.at("cols").get<std::size_t>() != params[i].value->cols())
      throw std::runtime_error("load_checkpoint: parameter layout mismatch at " + params[i].name);
    detail::read_raw(in, params[i].value->data(), params[i].value->size() * sizeof(double));
  }
  return ckpt;
}

}  // namespace ucil
