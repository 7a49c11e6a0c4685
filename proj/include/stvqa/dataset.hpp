#pragma once
// In-memory dataset: QA items plus per-episode features.

#include <map>
#include <string>
#include <vector>

#include "stvqa/model.hpp"

namespace stvqa {

struct Dataset {
  std::vector<QAItem> items;
  std::map<std::string, VideoFeatures> features;  // keyed by episode id

  const VideoFeatures& features_for(const QAItem& item) const;
  std::vector<std::string> collect_tokens() const;  // question + candidates + gold words
  Vocab build_vocab() const { return Vocab::build(collect_tokens()); }
  std::vector<const QAItem*> items_for(Task t) const;
};

}  // namespace stvqa
