#include "stvqa/dataset.hpp"

#include <stdexcept>

namespace stvqa {

const VideoFeatures& Dataset::features_for(const QAItem& item) const {
  auto it = features.find(item.episode_id);
  if (it == features.end())
    throw std::out_of_range("no features for episode '" + item.episode_id + "'");
  return it->second;
}

std::vector<std::string> Dataset::collect_tokens() const {
  std::vector<std::string> toks;
  for (const auto& item : items) {
    toks.insert(toks.end(), item.question.begin(), item.question.end());
    for (const auto& cand : item.candidates) toks.insert(toks.end(), cand.begin(), cand.end());
    if (!item.gold_word.empty()) toks.push_back(item.gold_word);
  }
  return toks;
}

std::vector<const QAItem*> Dataset::items_for(Task t) const {
  std::vector<const QAItem*> out;
  for (const auto& item : items)
    if (item.task == t) out.push_back(&item);
  return out;
}

}  // namespace stvqa
