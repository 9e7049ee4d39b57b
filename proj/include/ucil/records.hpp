#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace ucil {

/// One attributed social message.
struct MessageRecord {
  std::int64_t id = 0;
  int label = 0;
  double timestamp = 0.0;  // days
  std::vector<std::string> hashtags;
  std::vector<std::string> entities;
  std::vector<std::string> users;
  std::vector<double> features;
};

namespace detail {

inline std::vector<std::string> read_token_array(const nlohmann::json& obj, const char* key) {
  if (!obj.contains(key)) return {};
  const auto& arr = obj.at(key);
  if (!arr.is_array()) throw std::runtime_error(std::string("field '") + key + "' is not an array");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.get<std::string>());
  return out;
}

}  // namespace detail

inline nlohmann::json record_to_json(const MessageRecord& r) {
  return nlohmann::json{{"id", r.id},
                        {"label", r.label},
                        {"timestamp", r.timestamp},
                        {"hashtags", r.hashtags},
                        {"entities", r.entities},
                        {"users", r.users},
                        {"features", r.features}};
}

/// Parses one message per line. Attribute arrays may be absent (treated as
/// empty); id, label, timestamp and features are mandatory. Reports the
/// 1-based line number on any malformed line, rejects duplicate ids and
/// inconsistent feature dimensions.
inline std::vector<MessageRecord> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_jsonl: cannot open " + path.string());

  std::vector<MessageRecord> records;
  std::unordered_set<std::int64_t> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  std::size_t feature_dim = 0;
  bool dim_known = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MessageRecord r;
    try {
      const nlohmann::json obj = nlohmann::json::parse(line);
      if (!obj.contains("id")) throw std::runtime_error("missing field 'id'");
      if (!obj.contains("label")) throw std::runtime_error("missing field 'label'");
      if (!obj.contains("timestamp")) throw std::runtime_error("missing field 'timestamp'");
      if (!obj.contains("features")) throw std::runtime_error("missing field 'features'");
      r.id = obj.at("id").get<std::int64_t>();
      r.label = obj.at("label").get<int>();
      r.timestamp = obj.at("timestamp").get<double>();
      r.features = obj.at("features").get<std::vector<double>>();
      r.hashtags = detail::read_token_array(obj, "hashtags");
      r.entities = detail::read_token_array(obj, "entities");
      r.users = detail::read_token_array(obj, "users");
    } catch (const std::exception& e) {
      throw std::runtime_error("load_jsonl: " + path.string() + " line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (!seen_ids.insert(r.id).second)
      throw std::runtime_error("load_jsonl: " + path.string() + " line " +
                               std::to_string(line_no) + ": duplicate id " +
                               std::to_string(r.id));
    if (dim_known && r.features.size() != feature_dim)
      throw std::runtime_error("load_jsonl: " + path.string() + " line " +
                               std::to_string(line_no) + ": feature dimension " +
                               std::to_string(r.features.size()) + " differs from " +
                               std::to_string(feature_dim));
    feature_dim = r.features.size();
    dim_known = true;
    records.push_back(std::move(r));
  }
  return records;
}

inline void save_jsonl(const std::filesystem::path& path,
                       const std::vector<MessageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_jsonl: cannot open " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

}  // namespace ucil
