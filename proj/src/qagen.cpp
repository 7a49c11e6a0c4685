#include "stvqa/qagen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stvqa/kernels.hpp"
#include "stvqa/layers.hpp"

namespace stvqa {

// ---------------------------------------------------------------------------
// Embedding providers
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

// unit-normalize; a degenerate vector gets a deterministic one-hot bump
void normalize_or_perturb(std::vector<double>& v, std::uint64_t tag) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq < 1e-24) {
    v[static_cast<std::size_t>(tag % v.size())] = 1.0;
    return;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

}  // namespace

HashedEmbeddingProvider::HashedEmbeddingProvider(int dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim <= 0) throw std::invalid_argument("embedding dim must be positive");
}

std::vector<double> HashedEmbeddingProvider::word_vec(const std::string& word) const {
  Rng rng(splitmix64(seed_ ^ fnv1a64(word)));
  std::vector<double> v(static_cast<std::size_t>(dim_));
  for (auto& x : v) x = rng.normal();
  normalize_or_perturb(v, fnv1a64(word));
  return v;
}

std::vector<double> HashedEmbeddingProvider::phrase_vec(const std::string& phrase) const {
  const auto words = split_words(phrase);
  if (words.empty()) throw std::invalid_argument("phrase_vec: empty phrase");
  std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& w : words) {
    const auto wv = word_vec(w);
    kern::add(v.data(), wv.data(), v.data(), v.size());
  }
  normalize_or_perturb(v, fnv1a64(phrase));
  return v;
}

TextEmbeddingProvider::TextEmbeddingProvider(const std::string& path, std::uint64_t seed)
    : fallback_(1, seed) {
  const LoadedEmbeddings loaded = load_text_embeddings(path);
  if (loaded.dim <= 0) throw std::runtime_error("embedding file has no rows: " + path);
  fallback_ = HashedEmbeddingProvider(loaded.dim, seed);
  rows_ = loaded.rows;
  for (auto& [word, vec] : rows_) normalize_or_perturb(vec, fnv1a64(word));
}

std::vector<double> TextEmbeddingProvider::word_vec(const std::string& word) const {
  auto it = rows_.find(word);
  return it == rows_.end() ? fallback_.word_vec(word) : it->second;
}

std::vector<double> TextEmbeddingProvider::phrase_vec(const std::string& phrase) const {
  const auto words = split_words(phrase);
  if (words.empty()) throw std::invalid_argument("phrase_vec: empty phrase");
  std::vector<double> v(static_cast<std::size_t>(dim()), 0.0);
  for (const auto& w : words) {
    const auto wv = word_vec(w);
    kern::add(v.data(), wv.data(), v.data(), v.size());
  }
  normalize_or_perturb(v, fnv1a64(phrase));
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("cosine: dimension mismatch or empty vectors");
  const double num = kern::dot(a.data(), b.data(), a.size());
  const double na = std::sqrt(kern::dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(kern::dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero vector");
  return num / (na * nb);
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

namespace {

void push_words(std::vector<std::string>& out, const std::string& text) {
  for (auto& w : split_words(text)) out.push_back(std::move(w));
}

[[noreturn]] void missing_slot(const char* tmpl, const char* slot) {
  throw std::invalid_argument(std::string("template '") + tmpl + "' is missing slot '" + slot + "'");
}

}  // namespace

QAText instantiate_template(TemplateKind kind, const TemplateSlots& s) {
  QAText out;
  switch (kind) {
    case TemplateKind::count: {
      if (s.subject.empty()) missing_slot("count", "subject");
      if (s.verb.empty()) missing_slot("count", "verb");
      if (s.repeat < 0) missing_slot("count", "repeat");
      out.question = {"How", "many", "times", "does", "the", s.subject, s.verb};
      push_words(out.question, s.object);
      out.question.push_back("?");
      out.answer = {std::to_string(s.repeat)};
      break;
    }
    case TemplateKind::action: {
      if (s.subject.empty()) missing_slot("action", "subject");
      if (s.repeat < 0) missing_slot("action", "repeat");
      if (s.verb.empty()) missing_slot("action", "verb");
      out.question = {"What", "does", "the", s.subject, "do", std::to_string(s.repeat), "times", "?"};
      out.answer = {s.verb};
      push_words(out.answer, s.object);
      break;
    }
    case TemplateKind::transition_before: {
      if (s.subject.empty()) missing_slot("transition_before", "subject");
      if (s.next_state.empty()) missing_slot("transition_before", "next_state");
      if (s.prev_state.empty()) missing_slot("transition_before", "prev_state");
      out.question = {"What", "does", "the", s.subject, "do", "before"};
      push_words(out.question, s.next_state);
      out.question.push_back("?");
      push_words(out.answer, s.prev_state);
      break;
    }
    case TemplateKind::transition_after: {
      if (s.subject.empty()) missing_slot("transition_after", "subject");
      if (s.prev_state.empty()) missing_slot("transition_after", "prev_state");
      if (s.next_state.empty()) missing_slot("transition_after", "next_state");
      out.question = {"What", "does", "the", s.subject, "do", "after"};
      push_words(out.question, s.prev_state);
      out.question.push_back("?");
      push_words(out.answer, s.next_state);
      break;
    }
    case TemplateKind::frameqa: {
      if (s.subject.empty()) missing_slot("frameqa", "subject");
      if (s.attribute.empty()) missing_slot("frameqa", "attribute");
      out.question = {"What", "does", "the", s.subject, "show", "?"};
      out.answer = {s.attribute};
      break;
    }
  }
  return out;
}

ParsedQuestion parse_question(const std::vector<std::string>& q) {
  auto fail = [&] { return std::invalid_argument("question does not match any template"); };
  auto join = [](auto begin, auto end) {
    std::string out;
    for (auto it = begin; it != end; ++it) {
      if (!out.empty()) out += ' ';
      out += *it;
    }
    return out;
  };
  if (q.size() < 2 || q.back() != "?") throw fail();

  ParsedQuestion p;
  if (q.size() >= 8 && q[0] == "How" && q[1] == "many" && q[2] == "times" && q[3] == "does" &&
      q[4] == "the") {
    p.kind = TemplateKind::count;
    p.slots.subject = q[5];
    p.slots.verb = q[6];
    p.slots.object = join(q.begin() + 7, q.end() - 1);
    return p;
  }
  if (q.size() >= 6 && q[0] == "What" && q[1] == "does" && q[2] == "the") {
    p.slots.subject = q[3];
    if (q[4] == "show") {
      p.kind = TemplateKind::frameqa;
      return p;
    }
    if (q[4] != "do") throw fail();
    if (q.size() >= 8 && q[q.size() - 2] == "times") {
      p.kind = TemplateKind::action;
      p.slots.repeat = std::stoi(q[5]);
      return p;
    }
    if (q[5] == "before") {
      p.kind = TemplateKind::transition_before;
      p.slots.next_state = join(q.begin() + 6, q.end() - 1);
      return p;
    }
    if (q[5] == "after") {
      p.kind = TemplateKind::transition_after;
      p.slots.prev_state = join(q.begin() + 6, q.end() - 1);
      return p;
    }
  }
  throw fail();
}

// ---------------------------------------------------------------------------
// Distractor mining
// ---------------------------------------------------------------------------

std::vector<std::string> select_distractor_verbs(const std::string& answer_verb,
                                                 const std::vector<std::string>& verb_vocab,
                                                 const EmbeddingProvider& emb) {
  if (verb_vocab.empty()) throw std::invalid_argument("select_distractor_verbs: empty vocabulary");
  const auto answer_vec = emb.word_vec(answer_verb);

  // population: similarities of all vocab verbs to the answer verb
  std::vector<double> sims;
  sims.reserve(verb_vocab.size());
  for (const auto& v : verb_vocab) sims.push_back(cosine(answer_vec, emb.word_vec(v)));
  std::vector<double> sorted = sims;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double threshold =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  std::vector<std::string> picked;
  std::vector<std::vector<double>> picked_vecs;
  while (picked.size() < 4) {
    const std::string* best = nullptr;
    double best_score = 0.0;
    for (std::size_t i = 0; i < verb_vocab.size(); ++i) {
      const std::string& v = verb_vocab[i];
      if (v == answer_verb) continue;
      if (std::find(picked.begin(), picked.end(), v) != picked.end()) continue;
      if (!(sims[i] < threshold)) continue;  // strictly below the 50th percentile
      double score;
      if (picked.empty()) {
        score = sims[i];
      } else {
        score = 0.0;
        const auto vv = emb.word_vec(v);
        for (const auto& pv : picked_vecs) score += cosine(vv, pv);
        score /= static_cast<double>(picked_vecs.size());
      }
      if (best == nullptr || score < best_score || (score == best_score && v < *best)) {
        best = &v;
        best_score = score;
      }
    }
    if (best == nullptr)
      throw std::runtime_error("select_distractor_verbs: only " + std::to_string(picked.size()) +
                               " of 4 verbs eligible below the 50th-percentile threshold");
    picked.push_back(*best);
    picked_vecs.push_back(emb.word_vec(*best));
  }
  return picked;
}

std::vector<PhraseRecord> select_candidate_phrases(const std::vector<std::string>& chosen_verbs,
                                                   const std::vector<PhraseRecord>& corpus,
                                                   const EmbeddingProvider& emb,
                                                   const std::string& anchor_phrase) {
  const auto anchor_vec = emb.phrase_vec(anchor_phrase);
  std::vector<PhraseRecord> out;
  out.reserve(chosen_verbs.size());
  for (const auto& verb : chosen_verbs) {
    const PhraseRecord* best = nullptr;
    double best_sim = 0.0;
    for (const auto& rec : corpus) {
      if (rec.verb != verb) continue;
      const double sim = cosine(emb.phrase_vec(rec.phrase), anchor_vec);
      if (best == nullptr || sim > best_sim || (sim == best_sim && rec.phrase < best->phrase)) {
        best = &rec;
        best_sim = sim;
      }
    }
    if (best == nullptr)
      throw std::runtime_error("select_candidate_phrases: no corpus phrase for verb '" + verb + "'");
    out.push_back(*best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Zero-count augmentation
// ---------------------------------------------------------------------------

std::vector<QAItem> make_zero_count_items(const std::vector<std::vector<std::string>>& question_pool,
                                          const std::vector<std::string>& episode_ids,
                                          std::size_t n_items, Rng& rng) {
  if (question_pool.empty() || episode_ids.empty())
    throw std::invalid_argument("make_zero_count_items: empty question pool or episode list");
  std::vector<QAItem> out;
  out.reserve(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    QAItem it;
    it.task = Task::count;
    it.count_label = 0;
    it.question = rng.pick(question_pool);
    it.episode_id = rng.pick(episode_ids);
    it.id = "zc" + std::to_string(i) + "_" + it.episode_id;
    out.push_back(std::move(it));
  }
  return out;
}

std::string normalize_phrase(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace stvqa
