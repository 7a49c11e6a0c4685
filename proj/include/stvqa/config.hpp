#pragma once
// Flat key=value configuration with [section] grouping, diff-friendly in
// experiment logs. Keys are "section.key" internally; serialization is
// canonical (sorted) so identical configs are byte-identical on disk.

#include <cstdint>
#include <map>
#include <string>

#include "stvqa/model.hpp"

namespace stvqa {

struct KvConfig {
  std::map<std::string, std::string> values;

  static KvConfig parse_text(const std::string& text);
  static KvConfig load(const std::string& path);
  std::string to_text() const;
  void save(const std::string& path) const;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values[key] = value; }
  void set_int(const std::string& key, std::int64_t v) { values[key] = std::to_string(v); }
  void set_double(const std::string& key, double v);

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;  // throws naming the key
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  // apply a "key=value" override (the --set flag)
  void apply_override(const std::string& assignment);
};

// ModelConfig <-> kv (vocabulary stored as a space-joined token list)
KvConfig model_config_to_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const KvConfig& kv);

}  // namespace stvqa
