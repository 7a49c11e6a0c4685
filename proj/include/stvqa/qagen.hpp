#pragma once
// Template question/answer generation and multiple-choice distractor mining
// over a phrase corpus with a pluggable embedding provider.

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "stvqa/model.hpp"
#include "stvqa/rng.hpp"

namespace stvqa {

struct PhraseRecord {
  std::string subject;
  std::string verb;    // lemma, non-empty
  std::string object;  // possibly empty
  std::string phrase;  // full phrase text, non-empty
  std::string episode_id;
};

// ---------------------------------------------------------------------------
// Embedding providers
// ---------------------------------------------------------------------------

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> word_vec(const std::string& word) const = 0;
  virtual std::vector<double> phrase_vec(const std::string& phrase) const = 0;
  virtual int dim() const = 0;
};

// Deterministic pseudo-embeddings: unit vectors seeded by the word hash;
// phrases are the normalized mean of their word vectors.
class HashedEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashedEmbeddingProvider(int dim = 16, std::uint64_t seed = 0);
  std::vector<double> word_vec(const std::string& word) const override;
  std::vector<double> phrase_vec(const std::string& phrase) const override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  std::uint64_t seed_;
};

// Pretrained-style import ("token v1 ... vE" rows). Unknown words fall back
// to hashed vectors of the same dimension; zero rows get a deterministic
// perturbation so cosines stay well-defined.
class TextEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit TextEmbeddingProvider(const std::string& path, std::uint64_t seed = 0);
  std::vector<double> word_vec(const std::string& word) const override;
  std::vector<double> phrase_vec(const std::string& phrase) const override;
  int dim() const override { return fallback_.dim(); }

 private:
  std::unordered_map<std::string, std::vector<double>> rows_;
  HashedEmbeddingProvider fallback_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

enum class TemplateKind { count, action, transition_before, transition_after, frameqa };

struct TemplateSlots {
  std::string subject;
  std::string verb;
  std::string object;      // may be empty
  int repeat = -1;
  std::string prev_state;  // transition
  std::string next_state;  // transition
  std::string attribute;   // frameqa
};

struct QAText {
  std::vector<std::string> question;
  std::vector<std::string> answer;
};

QAText instantiate_template(TemplateKind kind, const TemplateSlots& slots);

struct ParsedQuestion {
  TemplateKind kind;
  TemplateSlots slots;  // fields recovered from the question only
};
ParsedQuestion parse_question(const std::vector<std::string>& question);

// ---------------------------------------------------------------------------
// Distractor mining
// ---------------------------------------------------------------------------

// Greedy pick of 4 verbs: each must lie strictly below the 50th percentile of
// all vocab-to-answer cosine similarities; the first pick minimizes similarity
// to the answer verb, later picks minimize mean similarity to the already
// picked set. Ties break lexicographically.
std::vector<std::string> select_distractor_verbs(const std::string& answer_verb,
                                                 const std::vector<std::string>& verb_vocab,
                                                 const EmbeddingProvider& emb);

// For each chosen verb, the corpus phrase with that verb maximizing phrase
// cosine similarity to the anchor; ties break lexicographically by phrase.
std::vector<PhraseRecord> select_candidate_phrases(const std::vector<std::string>& chosen_verbs,
                                                   const std::vector<PhraseRecord>& corpus,
                                                   const EmbeddingProvider& emb,
                                                   const std::string& anchor_phrase);

// ---------------------------------------------------------------------------
// Zero-count augmentation: questions randomly paired with episodes that have
// no repeating action, label 0.
// ---------------------------------------------------------------------------
std::vector<QAItem> make_zero_count_items(const std::vector<std::vector<std::string>>& question_pool,
                                          const std::vector<std::string>& episode_ids,
                                          std::size_t n_items, Rng& rng);

std::string normalize_phrase(const std::string& s);  // lowercase, collapsed spaces

}  // namespace stvqa
