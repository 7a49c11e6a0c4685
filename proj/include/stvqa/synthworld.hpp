#pragma once
// Procedural episode generator. Episodes carry an exact latent track (action
// segments, repetition bursts, one needle frame for transition/frameqa);
// rendering maps world symbols to fixed random prototype vectors from a
// seeded codebook and places them at role-assigned grid cells, so spatial
// attention has something to find. The clip stream is a sliding 16-frame
// window average over raw frames with first/last padding; pooled views are
// exact spatial means of the grids.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stvqa/dataset.hpp"
#include "stvqa/qagen.hpp"

namespace stvqa {

// ---------------------------------------------------------------------------
// World vocabulary (pre-lemmatized by construction)
// ---------------------------------------------------------------------------
struct WorldAction {
  std::string verb;
  std::string object;  // may be empty
  std::string phrase() const { return object.empty() ? verb : verb + " " + object; }
};

struct WorldLexicon {
  std::vector<std::string> subjects;
  std::vector<WorldAction> actions;               // askable
  std::vector<std::string> background_verbs;      // fillers, disjoint from askable verbs
  std::vector<std::string> attributes;            // frameqa answer words

  static const WorldLexicon& standard();
  std::vector<std::string> verb_vocab() const;    // askable verbs
  std::vector<PhraseRecord> corpus() const;       // one record per action
};

// ---------------------------------------------------------------------------
// Generation / rendering configuration
// ---------------------------------------------------------------------------
struct EpisodeConfig {
  int steps = 16;          // sampled length T
  int filler_segments = 3;
  int needle_margin = 2;   // needle stays this many steps from both ends
  int action_count = 0;    // 0 = full askable lexicon, else the first K actions
  // label distribution over counts 0..10 (need not be normalized)
  std::vector<double> count_weights = {0.1, 0.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
};

struct RenderSpec {
  int grid = 3;             // G
  int frame_channels = 16;  // C_f
  int clip_channels = 8;    // C_s
  int frames_per_beat = 4;  // burst length in raw frames
  int stride = 4;           // raw frames per sampled step
  int window = 16;          // clip averaging window
  double noise = 0.0;       // additive gaussian sigma
  double needle_gain = 2.0; // visual salience of the needle-frame flash
  std::uint64_t codebook_seed = 0;
};

// ---------------------------------------------------------------------------
// Latent episode
// ---------------------------------------------------------------------------
struct Segment {
  int begin = 0, end = 0;  // raw-frame span [begin, end)
  int action = -1;         // askable action id, or
  int background = -1;     // background action id
  int repeats = 0;         // > 0: rendered as that many evenly spaced bursts
  std::vector<int> attributes;  // attribute ids visible during the span
};

struct SyntheticEpisode {
  std::string id;
  Task task = Task::count;
  int steps = 0;
  int stride = 0;
  int subject = 0;
  std::vector<Segment> segments;
  int needle_step = -1;     // sampled index (transition/frameqa)
  int gold_attribute = -1;  // frameqa
  int prev_state = -1;      // transition: action ids
  int next_state = -1;
  int repeat_action = -1;   // count/action
  int repeat_count = 0;     // 0..10
  std::uint64_t seed = 0;

  int raw_length() const { return steps * stride; }
  bool has_repetition() const { return repeat_action >= 0 && repeat_count >= 1; }
};

SyntheticEpisode generate_episode(Task task, const EpisodeConfig& cfg, const RenderSpec& spec,
                                  std::uint64_t seed);

// Pre-window, pre-sampling symbol render: raw per-frame grids for both
// streams. Exposed so window/padding behavior can be checked against a
// direct oracle.
struct RawRender {
  int raw_length = 0;
  std::vector<double> frame;  // raw * G*G * Cf
  std::vector<double> clip;   // raw * G*G * Cs
};
RawRender render_raw(const SyntheticEpisode& ep, const RenderSpec& spec);

VideoFeatures render_features(const SyntheticEpisode& ep, const RenderSpec& spec);

// ---------------------------------------------------------------------------
// QA derivation
// ---------------------------------------------------------------------------
struct QaGenHooks {
  const WorldLexicon* lexicon = nullptr;
  const EmbeddingProvider* embeddings = nullptr;
  const std::vector<PhraseRecord>* corpus = nullptr;
  const std::vector<std::string>* verb_vocab = nullptr;
  // count questions available for zero-count pairing; empty pool means
  // count-0 episodes yield no count item
  const std::vector<std::vector<std::string>>* zero_question_pool = nullptr;
  // uniform random distractors instead of embedding-mined ones; removes the
  // answer-only bias of similarity mining so multiple choice is unsolvable
  // from the candidate list alone (used by the needle datasets)
  bool uniform_distractors = false;
};

std::vector<QAItem> derive_qa(const SyntheticEpisode& ep, const QaGenHooks& hooks);

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------
struct DatasetConfig {
  std::map<Task, int> train_items;  // requested item counts per task
  std::map<Task, int> test_items;
  double zero_count_fraction = 0.1;  // exact quota of count items with label 0
  bool uniform_distractors = false;
  EpisodeConfig episode;
  RenderSpec render;
};

struct DatasetBundle {
  Dataset train;
  Dataset test;
  std::vector<PhraseRecord> corpus;
  std::vector<SyntheticEpisode> episodes;  // all, both splits
};

DatasetBundle build_dataset(const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace stvqa
