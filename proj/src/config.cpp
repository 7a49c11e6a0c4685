#include "stvqa/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stvqa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text) {
  KvConfig kv;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    kv.values[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

std::string KvConfig::to_text() const {
  std::string out, current_section;
  bool first = true;
  for (const auto& [key, value] : values) {  // std::map keeps keys sorted
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string bare = dot == std::string::npos ? key : key.substr(dot + 1);
    if (section != current_section || first) {
      if (!first) out += '\n';
      if (!section.empty()) out += "[" + section + "]\n";
      current_section = section;
      first = false;
    }
    out += bare + "=" + value + "\n";
  }
  return out;
}

void KvConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << to_text();
}

void KvConfig::set_double(const std::string& key, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  values[key] = buf;
}

std::string KvConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::string KvConfig::require(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw std::runtime_error("missing required config key '" + key + "'");
  return it->second;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (...) {
    throw std::runtime_error("config key '" + key + "' is not an integer: " + it->second);
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw std::runtime_error("config key '" + key + "' is not a number: " + it->second);
  }
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (...) {
    throw std::runtime_error("config key '" + key + "' is not an unsigned integer: " + it->second);
  }
}

void KvConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::runtime_error("override must be key=value, got '" + assignment + "'");
  values[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

// ---------------------------------------------------------------------------

KvConfig model_config_to_kv(const ModelConfig& cfg) {
  KvConfig kv;
  kv.set("model.variant", variant_name(cfg.variant));
  kv.set_int("model.hidden_dim", cfg.hidden_dim);
  kv.set_int("model.embedding_dim", cfg.embedding_dim);
  kv.set_int("model.attention_hidden", cfg.attention_hidden);
  kv.set_int("model.grid", cfg.grid);
  kv.set_int("model.frame_channels", cfg.frame_channels);
  kv.set_int("model.clip_channels", cfg.clip_channels);
  kv.set_double("model.dropout_rate", cfg.dropout_rate);
  kv.set_double("model.ln_eps", cfg.ln_eps);
  std::string vocab;
  for (const auto& w : cfg.vocab.words) {
    if (!vocab.empty()) vocab += ' ';
    vocab += w;
  }
  kv.set("model.vocab", vocab);
  return kv;
}

ModelConfig model_config_from_kv(const KvConfig& kv) {
  ModelConfig cfg;
  cfg.variant = variant_from_string(kv.get("model.variant", "concat"));
  cfg.hidden_dim = static_cast<int>(kv.get_int("model.hidden_dim", cfg.hidden_dim));
  cfg.embedding_dim = static_cast<int>(kv.get_int("model.embedding_dim", cfg.embedding_dim));
  cfg.attention_hidden = static_cast<int>(kv.get_int("model.attention_hidden", cfg.attention_hidden));
  cfg.grid = static_cast<int>(kv.get_int("model.grid", cfg.grid));
  cfg.frame_channels = static_cast<int>(kv.get_int("model.frame_channels", cfg.frame_channels));
  cfg.clip_channels = static_cast<int>(kv.get_int("model.clip_channels", cfg.clip_channels));
  cfg.dropout_rate = kv.get_double("model.dropout_rate", cfg.dropout_rate);
  cfg.ln_eps = kv.get_double("model.ln_eps", cfg.ln_eps);
  std::istringstream vs(kv.get("model.vocab", ""));
  std::string w;
  cfg.vocab.words.clear();
  while (vs >> w) cfg.vocab.words.push_back(w);
  return cfg;
}

}  // namespace stvqa
