#include "stvqa/manifest.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace stvqa {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Feature blobs
// ---------------------------------------------------------------------------

namespace {

constexpr char kFeatureMagic[4] = {'S', 'T', 'V', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "feature blob writer assumes a little-endian host");

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::ifstream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error(std::string("feature blob truncated at ") + what);
  return v;
}

void put_f32_array(std::ofstream& out, const std::vector<double>& data) {
  put<std::uint64_t>(out, data.size());
  for (double v : data) put<float>(out, static_cast<float>(v));
}

std::vector<double> take_f32_array(std::ifstream& in, const char* what) {
  const auto n = take<std::uint64_t>(in, what);
  std::vector<double> out(n);
  for (auto& v : out) v = static_cast<double>(take<float>(in, what));
  return out;
}

}  // namespace

void write_features(const std::string& path, const VideoFeatures& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write features: " + path);
  out.write(kFeatureMagic, sizeof kFeatureMagic);
  put<std::uint32_t>(out, kFeatureVersion);
  put<std::int32_t>(out, f.T);
  put<std::int32_t>(out, f.G);
  put<std::int32_t>(out, f.Cf);
  put<std::int32_t>(out, f.Cs);
  put_f32_array(out, f.frame_grid);
  put_f32_array(out, f.clip_grid);
  if (!out) throw std::runtime_error("write failed for features: " + path);
}

VideoFeatures read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open features: " + path);
  char magic[4];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kFeatureMagic, sizeof magic) != 0)
    throw std::runtime_error("not a feature blob (bad magic): " + path);
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kFeatureVersion)
    throw std::runtime_error("feature blob version " + std::to_string(version) + " unsupported");
  const int T = take<std::int32_t>(in, "T");
  const int G = take<std::int32_t>(in, "G");
  const int Cf = take<std::int32_t>(in, "Cf");
  const int Cs = take<std::int32_t>(in, "Cs");
  auto frame = take_f32_array(in, "frame grid");
  auto clip = take_f32_array(in, "clip grid");
  return VideoFeatures::from_grids(T, G, Cf, Cs, std::move(frame), std::move(clip));
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

namespace {

json item_to_json(const QAItem& it, const std::string& feature_path) {
  json j;
  j["id"] = it.id;
  j["episode"] = it.episode_id;
  j["task"] = task_name(it.task);
  j["question"] = it.question;
  if (!feature_path.empty()) j["features"] = feature_path;
  switch (it.task) {
    case Task::count:
      j["count_label"] = it.count_label;
      break;
    case Task::action:
    case Task::transition:
      j["candidates"] = it.candidates;
      j["gold_index"] = it.gold_index;
      break;
    case Task::frameqa:
      j["gold_word"] = it.gold_word;
      break;
  }
  return j;
}

QAItem item_from_json(const json& j) {
  QAItem it;
  it.id = j.at("id").get<std::string>();
  it.episode_id = j.at("episode").get<std::string>();
  it.task = task_from_string(j.at("task").get<std::string>());
  it.question = j.at("question").get<std::vector<std::string>>();
  switch (it.task) {
    case Task::count:
      it.count_label = j.at("count_label").get<int>();
      break;
    case Task::action:
    case Task::transition:
      it.candidates = j.at("candidates").get<std::vector<std::vector<std::string>>>();
      it.gold_index = j.at("gold_index").get<int>();
      break;
    case Task::frameqa:
      it.gold_word = j.at("gold_word").get<std::string>();
      break;
  }
  return it;
}

}  // namespace

void write_manifest(const std::string& manifest_path, const std::string& features_dir,
                    const Dataset& data) {
  const fs::path mdir = fs::path(manifest_path).parent_path();
  fs::create_directories(mdir.empty() ? "." : mdir);
  fs::create_directories(features_dir);

  std::map<std::string, std::string> feature_paths;  // episode id -> relative path
  for (const auto& [ep, feats] : data.features) {
    const fs::path rel = fs::path(features_dir).lexically_relative(mdir.empty() ? "." : mdir) /
                         (ep + ".stvf");
    const fs::path abs = fs::path(features_dir) / (ep + ".stvf");
    write_features(abs.string(), feats);
    feature_paths[ep] = rel.generic_string();
  }

  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path);
  for (const auto& it : data.items) {
    auto fp = feature_paths.find(it.episode_id);
    out << item_to_json(it, fp == feature_paths.end() ? "" : fp->second).dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for manifest: " + manifest_path);
}

Dataset read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(manifest_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    QAItem it = item_from_json(j);
    if (j.contains("features") && !data.features.count(it.episode_id)) {
      const fs::path fpath = base / j.at("features").get<std::string>();
      data.features.emplace(it.episode_id, read_features(fpath.string()));
    }
    data.items.push_back(std::move(it));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

void write_corpus(const std::string& path, const std::vector<PhraseRecord>& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus: " + path);
  for (const auto& r : corpus) {
    json j;
    j["episode"] = r.episode_id;
    j["subject"] = r.subject;
    j["verb"] = r.verb;
    j["object"] = r.object;
    j["phrase"] = r.phrase;
    out << j.dump() << '\n';
  }
}

std::vector<PhraseRecord> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);
  std::vector<PhraseRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    PhraseRecord r;
    r.episode_id = j.at("episode").get<std::string>();
    r.subject = j.at("subject").get<std::string>();
    r.verb = j.at("verb").get<std::string>();
    r.object = j.at("object").get<std::string>();
    r.phrase = j.at("phrase").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction dumps
// ---------------------------------------------------------------------------

void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions: " + path);
  for (const auto& r : records) {
    json j;
    j["item"] = r.item_id;
    j["task"] = task_name(r.task);
    j["variant"] = variant_name(r.variant);
    switch (r.task) {
      case Task::count:
        j["predicted"] = r.count_pred;
        j["gold"] = r.count_gold;
        break;
      case Task::action:
      case Task::transition:
        j["predicted"] = r.pred_index;
        j["gold"] = r.gold_index;
        j["scores"] = r.scores;
        break;
      case Task::frameqa: {
        j["predicted"] = r.pred_word;
        j["gold"] = r.gold_word;
        json topk = json::array();
        for (const auto& [w, p] : r.topk) topk.push_back(json{{"word", w}, {"p", p}});
        j["topk"] = topk;
        break;
      }
    }
    out << j.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions: " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    PredictionRecord r;
    r.item_id = j.at("item").get<std::string>();
    r.task = task_from_string(j.at("task").get<std::string>());
    r.variant = variant_from_string(j.at("variant").get<std::string>());
    switch (r.task) {
      case Task::count:
        r.count_pred = j.at("predicted").get<double>();
        r.count_gold = j.at("gold").get<int>();
        break;
      case Task::action:
      case Task::transition:
        r.pred_index = j.at("predicted").get<int>();
        r.gold_index = j.at("gold").get<int>();
        if (j.contains("scores")) r.scores = j.at("scores").get<std::vector<double>>();
        break;
      case Task::frameqa:
        r.pred_word = j.at("predicted").get<std::string>();
        r.gold_word = j.at("gold").get<std::string>();
        if (j.contains("topk"))
          for (const auto& t : j.at("topk"))
            r.topk.emplace_back(t.at("word").get<std::string>(), t.at("p").get<double>());
        break;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace stvqa
