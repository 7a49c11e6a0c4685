#pragma once
// On-disk dataset format: line-delimited JSON manifests referencing binary
// feature blobs (little-endian float32 arrays with shape headers, grids only;
// pooled views are derived on load so they stay exact spatial means).
// Prediction dumps and the phrase corpus use the same line-delimited form.

#include <string>
#include <vector>

#include "stvqa/dataset.hpp"
#include "stvqa/eval.hpp"
#include "stvqa/qagen.hpp"

namespace stvqa {

// feature blob (.stvf)
void write_features(const std::string& path, const VideoFeatures& f);
VideoFeatures read_features(const std::string& path);

// manifest (.jsonl); feature paths inside are relative to the manifest's dir
void write_manifest(const std::string& manifest_path, const std::string& features_dir,
                    const Dataset& data);
Dataset read_manifest(const std::string& manifest_path);

// phrase corpus (.jsonl)
void write_corpus(const std::string& path, const std::vector<PhraseRecord>& corpus);
std::vector<PhraseRecord> read_corpus(const std::string& path);

// prediction dump (.jsonl)
void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::string& path);

}  // namespace stvqa
