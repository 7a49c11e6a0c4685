#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "stvqa/synthworld.hpp"

using namespace stvqa;

namespace {

EpisodeConfig ecfg(int steps = 16) {
  EpisodeConfig c;
  c.steps = steps;
  return c;
}

RenderSpec rspec(double noise = 0.0) {
  RenderSpec s;
  s.noise = noise;
  s.codebook_seed = 7;
  return s;
}

QaGenHooks hooks_with(const HashedEmbeddingProvider& emb, const std::vector<PhraseRecord>& corpus,
                      const std::vector<std::string>& verbs) {
  QaGenHooks h;
  h.lexicon = &WorldLexicon::standard();
  h.embeddings = &emb;
  h.corpus = &corpus;
  h.verb_vocab = &verbs;
  return h;
}

// independent reader of the latent track: recovers every label directly
struct LatentReader {
  static int count_label(const SyntheticEpisode& ep) {
    int bursts = 0;
    for (const auto& s : ep.segments)
      if (s.action == ep.repeat_action && ep.repeat_action >= 0) bursts += s.repeats;
    return bursts;
  }
  static std::string action_phrase(const SyntheticEpisode& ep) {
    return WorldLexicon::standard().actions[static_cast<std::size_t>(ep.repeat_action)].phrase();
  }
  static std::string before_answer(const SyntheticEpisode& ep) {
    return WorldLexicon::standard().actions[static_cast<std::size_t>(ep.prev_state)].phrase();
  }
  static std::string after_answer(const SyntheticEpisode& ep) {
    return WorldLexicon::standard().actions[static_cast<std::size_t>(ep.next_state)].phrase();
  }
  static std::string frame_answer(const SyntheticEpisode& ep) {
    return WorldLexicon::standard().attributes[static_cast<std::size_t>(ep.gold_attribute)];
  }
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// generate_episode
// ---------------------------------------------------------------------------

TEST_CASE("episodes are deterministic given the seed") {
  for (Task t : kAllTasks) {
    const SyntheticEpisode a = generate_episode(t, ecfg(), rspec(), 42);
    const SyntheticEpisode b = generate_episode(t, ecfg(), rspec(), 42);
    CHECK(a.subject == b.subject);
    CHECK(a.segments.size() == b.segments.size());
    CHECK(a.repeat_count == b.repeat_count);
    CHECK(a.needle_step == b.needle_step);
    const SyntheticEpisode c = generate_episode(t, ecfg(), rspec(), 43);
    CHECK((a.subject != c.subject || a.segments.size() != c.segments.size() ||
           a.repeat_count != c.repeat_count || a.needle_step != c.needle_step ||
           a.repeat_action != c.repeat_action || a.gold_attribute != c.gold_attribute ||
           a.prev_state != c.prev_state));
  }
}

TEST_CASE("a forced count-0 episode has no repeating segment") {
  EpisodeConfig cfg = ecfg();
  std::fill(cfg.count_weights.begin(), cfg.count_weights.end(), 0.0);
  cfg.count_weights[0] = 1.0;
  const SyntheticEpisode ep = generate_episode(Task::count, cfg, rspec(), 5);
  CHECK_FALSE(ep.has_repetition());
  for (const auto& s : ep.segments) {
    CHECK(s.action < 0);
    CHECK(s.repeats == 0);
  }
}

TEST_CASE("count labels follow the configured distribution within 2%") {
  EpisodeConfig cfg = ecfg(16);  // 64 raw frames, enough for 10 bursts
  std::map<int, int> histogram;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const SyntheticEpisode ep =
        generate_episode(Task::count, cfg, rspec(), 1000 + static_cast<std::uint64_t>(i));
    histogram[ep.repeat_count] += 1;
  }
  double wsum = 0.0;
  for (double w : cfg.count_weights) wsum += w;
  for (int label = 0; label <= 10; ++label) {
    const double expected = cfg.count_weights[static_cast<std::size_t>(label)] / wsum;
    const double got = histogram[label] / static_cast<double>(n);
    INFO("label ", label, " expected ", expected, " got ", got);
    CHECK(std::fabs(got - expected) < 0.02);
  }
}

TEST_CASE("infeasible repetition capacity fails loudly") {
  EpisodeConfig cfg = ecfg(2);  // 8 raw frames cannot hold 10 bursts
  std::fill(cfg.count_weights.begin(), cfg.count_weights.end(), 0.0);
  cfg.count_weights[10] = 1.0;
  CHECK_THROWS_AS(generate_episode(Task::count, cfg, rspec(), 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

TEST_CASE("noise-free rendering is a pure function of the latent track") {
  const SyntheticEpisode ep = generate_episode(Task::transition, ecfg(), rspec(), 9);
  const VideoFeatures a = render_features(ep, rspec());
  const VideoFeatures b = render_features(ep, rspec());
  CHECK(a.frame_grid == b.frame_grid);
  CHECK(a.clip_grid == b.clip_grid);
}

TEST_CASE("pooled views equal the spatial mean of the grids exactly") {
  const SyntheticEpisode ep = generate_episode(Task::frameqa, ecfg(), rspec(0.3), 11);
  const RenderSpec spec = rspec(0.3);  // noise applied before pooling
  const VideoFeatures f = render_features(ep, spec);
  const int locs = f.G * f.G;
  for (int t = 0; t < f.T; ++t) {
    for (int c = 0; c < f.Cf; ++c) {
      double s = 0.0;
      for (int l = 0; l < locs; ++l)
        s += f.frame_grid[(static_cast<std::size_t>(t) * locs + l) * f.Cf + c];
      CHECK(f.frame_pooled[static_cast<std::size_t>(t) * f.Cf + c] == s / locs);
    }
    for (int c = 0; c < f.Cs; ++c) {
      double s = 0.0;
      for (int l = 0; l < locs; ++l)
        s += f.clip_grid[(static_cast<std::size_t>(t) * locs + l) * f.Cs + c];
      CHECK(f.clip_pooled[static_cast<std::size_t>(t) * f.Cs + c] == s / locs);
    }
  }
}

TEST_CASE("clip window averaging at the boundary pads with the first/last frame") {
  const RenderSpec spec = rspec();
  const SyntheticEpisode ep = generate_episode(Task::count, ecfg(), spec, 13);
  const RawRender raw = render_raw(ep, spec);
  const VideoFeatures f = render_features(ep, spec);
  const int locs = spec.grid * spec.grid;
  const std::size_t cstep = static_cast<std::size_t>(locs) * spec.clip_channels;

  // brute-force window sum oracle over raw frames, clamped indices
  auto oracle = [&](int t, std::size_t i) {
    double s = 0.0;
    for (int off = -8; off < 8; ++off) {
      const int j = std::clamp(t * spec.stride + off, 0, raw.raw_length - 1);
      s += raw.clip[static_cast<std::size_t>(j) * cstep + i];
    }
    return s / 16.0;
  };
  for (int t : {0, 1, ep.steps - 1}) {
    for (std::size_t i = 0; i < cstep; ++i) {
      CHECK(f.clip_grid[static_cast<std::size_t>(t) * cstep + i] ==
            doctest::Approx(oracle(t, i)).epsilon(1e-12));
    }
  }
  // the first window genuinely clamps: it must equal a sum containing 9
  // copies of raw frame 0 and one each of frames 1..7
  double manual = 0.0;
  for (int j : {0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7})
    manual += raw.clip[static_cast<std::size_t>(j) * cstep];
  CHECK(f.clip_grid[0] == doctest::Approx(manual / 16.0).epsilon(1e-12));
}

TEST_CASE("sigma=0 features are the mean of many sigma>0 renderings") {
  const SyntheticEpisode ep = generate_episode(Task::count, ecfg(8), rspec(), 17);
  const VideoFeatures clean = render_features(ep, rspec(0.0));
  const double sigma = 0.5;
  const int n = 400;
  std::vector<double> mean(clean.frame_grid.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    SyntheticEpisode noisy_ep = ep;
    noisy_ep.seed = splitmix64(ep.seed + static_cast<std::uint64_t>(i) + 1);
    RenderSpec spec = rspec(sigma);
    const VideoFeatures noisy = render_features(noisy_ep, spec);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += noisy.frame_grid[j];
  }
  const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(n));
  for (std::size_t j = 0; j < mean.size(); ++j)
    CHECK(std::fabs(mean[j] / n - clean.frame_grid[j]) < tol * 1.5);
}

TEST_CASE("render rejects a spec whose stride disagrees with the episode") {
  const SyntheticEpisode ep = generate_episode(Task::count, ecfg(), rspec(), 19);
  RenderSpec other = rspec();
  other.stride = 2;
  CHECK_THROWS_AS(render_features(ep, other), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// derive_qa
// ---------------------------------------------------------------------------

TEST_CASE("derived items match a brute-force reading of the latent track") {
  const HashedEmbeddingProvider emb(16, 3);
  const auto corpus = WorldLexicon::standard().corpus();
  const auto verbs = WorldLexicon::standard().verb_vocab();
  const QaGenHooks hooks = hooks_with(emb, corpus, verbs);

  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    for (Task t : kAllTasks) {
      const SyntheticEpisode ep = generate_episode(t, ecfg(), rspec(), seed);
      const auto items = derive_qa(ep, hooks);
      for (const auto& it : items) {
        switch (it.task) {
          case Task::count:
            CHECK(it.count_label == LatentReader::count_label(ep));
            break;
          case Task::action:
            CHECK(join(it.candidates[static_cast<std::size_t>(it.gold_index)]) ==
                  LatentReader::action_phrase(ep));
            break;
          case Task::transition: {
            const std::string gold = join(it.candidates[static_cast<std::size_t>(it.gold_index)]);
            if (it.id.ends_with("_before"))
              CHECK(gold == LatentReader::before_answer(ep));
            else
              CHECK(gold == LatentReader::after_answer(ep));
            break;
          }
          case Task::frameqa:
            CHECK(it.gold_word == LatentReader::frame_answer(ep));
            break;
        }
      }
    }
  }
}

TEST_CASE("count-0 episodes yield a zero-label count item and no action item") {
  const HashedEmbeddingProvider emb(16, 3);
  const auto corpus = WorldLexicon::standard().corpus();
  const auto verbs = WorldLexicon::standard().verb_vocab();
  QaGenHooks hooks = hooks_with(emb, corpus, verbs);
  const std::vector<std::vector<std::string>> pool = {
      {"How", "many", "times", "does", "the", "cat", "jump", "?"}};
  hooks.zero_question_pool = &pool;

  EpisodeConfig cfg = ecfg();
  std::fill(cfg.count_weights.begin(), cfg.count_weights.end(), 0.0);
  cfg.count_weights[0] = 1.0;
  const SyntheticEpisode ep = generate_episode(Task::count, cfg, rspec(), 23);
  const auto items = derive_qa(ep, hooks);
  REQUIRE(items.size() == 1);
  CHECK(items[0].task == Task::count);
  CHECK(items[0].count_label == 0);
  CHECK(items[0].question == pool[0]);
}

TEST_CASE("transition episodes yield exactly the before and after items") {
  const HashedEmbeddingProvider emb(16, 3);
  const auto corpus = WorldLexicon::standard().corpus();
  const auto verbs = WorldLexicon::standard().verb_vocab();
  const QaGenHooks hooks = hooks_with(emb, corpus, verbs);
  const SyntheticEpisode ep = generate_episode(Task::transition, ecfg(), rspec(), 29);
  const auto items = derive_qa(ep, hooks);
  REQUIRE(items.size() == 2);
  CHECK(items[0].task == Task::transition);
  CHECK(items[1].task == Task::transition);
  CHECK(items[0].question[5] == "before");
  CHECK(items[1].question[5] == "after");
  for (const auto& it : items) {
    CHECK(it.candidates.size() == 5);
    CHECK(it.gold_index >= 0);
    CHECK(it.gold_index < 5);
  }
}

TEST_CASE("gold candidates land at uniformly random positions and never leak into distractors") {
  const HashedEmbeddingProvider emb(16, 3);
  const auto corpus = WorldLexicon::standard().corpus();
  const auto verbs = WorldLexicon::standard().verb_vocab();
  const QaGenHooks hooks = hooks_with(emb, corpus, verbs);

  std::map<int, int> positions;
  int total = 0;
  for (std::uint64_t seed = 0; total < 10000; ++seed) {
    const SyntheticEpisode ep = generate_episode(Task::transition, ecfg(8), rspec(), seed);
    for (const auto& it : derive_qa(ep, hooks)) {
      positions[it.gold_index] += 1;
      ++total;
      const std::string gold = normalize_phrase(join(it.candidates[static_cast<std::size_t>(it.gold_index)]));
      for (int c = 0; c < 5; ++c) {
        if (c == it.gold_index) continue;
        CHECK(normalize_phrase(join(it.candidates[static_cast<std::size_t>(c)])) != gold);
      }
      if (total >= 10000) break;
    }
  }
  for (int pos = 0; pos < 5; ++pos) {
    const double frac = positions[pos] / static_cast<double>(total);
    INFO("position ", pos, " fraction ", frac);
    CHECK(std::fabs(frac - 0.2) < 0.02);
  }
}

TEST_CASE("the needle frame alone determines transition and frameqa answers") {
  const HashedEmbeddingProvider emb(16, 3);
  const auto corpus = WorldLexicon::standard().corpus();
  const auto verbs = WorldLexicon::standard().verb_vocab();
  const QaGenHooks hooks = hooks_with(emb, corpus, verbs);

  // transition: reassign every filler segment's action
  {
    const SyntheticEpisode ep = generate_episode(Task::transition, ecfg(), rspec(), 31);
    SyntheticEpisode mutated = ep;
    Rng mrng(999);
    for (auto& s : mutated.segments) {
      if (s.action < 0) continue;
      int next;
      do {
        next = static_cast<int>(mrng.uniform_int(
            0, static_cast<std::int64_t>(WorldLexicon::standard().actions.size()) - 1));
      } while (next == mutated.prev_state || next == mutated.next_state || next == s.action);
      s.action = next;
    }
    const auto a = derive_qa(ep, hooks);
    const auto b = derive_qa(mutated, hooks);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].gold_index == b[i].gold_index);
      CHECK(a[i].candidates == b[i].candidates);
      CHECK(a[i].question == b[i].question);
    }
    CHECK(render_features(ep, rspec()).frame_grid != render_features(mutated, rspec()).frame_grid);
  }

  // frameqa: reassign every filler attribute
  {
    const SyntheticEpisode ep = generate_episode(Task::frameqa, ecfg(), rspec(), 37);
    SyntheticEpisode mutated = ep;
    Rng mrng(1001);
    for (auto& s : mutated.segments)
      for (auto& attr : s.attributes) {
        int next;
        do {
          next = static_cast<int>(mrng.uniform_int(
              0, static_cast<std::int64_t>(WorldLexicon::standard().attributes.size()) - 1));
        } while (next == mutated.gold_attribute || next == attr);
        attr = next;
      }
    const auto a = derive_qa(ep, hooks);
    const auto b = derive_qa(mutated, hooks);
    REQUIRE(a.size() == 1);
    CHECK(a[0].gold_word == b[0].gold_word);
    CHECK(render_features(ep, rspec()).frame_grid != render_features(mutated, rspec()).frame_grid);
  }
}

// ---------------------------------------------------------------------------
// build_dataset
// ---------------------------------------------------------------------------

TEST_CASE("dataset splits are disjoint, deterministic, and quota-exact") {
  DatasetConfig cfg;
  cfg.train_items = {{Task::count, 40}, {Task::action, 10}, {Task::transition, 10}, {Task::frameqa, 10}};
  cfg.test_items = {{Task::count, 10}, {Task::transition, 6}};
  cfg.episode = ecfg(8);  // 32 raw frames hold at most 6 bursts
  cfg.episode.count_weights = {0.1, 0.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0};
  cfg.render = rspec();

  const DatasetBundle a = build_dataset(cfg, 55);
  const DatasetBundle b = build_dataset(cfg, 55);

  // determinism
  REQUIRE(a.train.items.size() == b.train.items.size());
  for (std::size_t i = 0; i < a.train.items.size(); ++i) {
    CHECK(a.train.items[i].id == b.train.items[i].id);
    CHECK(a.train.items[i].question == b.train.items[i].question);
  }
  for (const auto& [id, feats] : a.train.features)
    CHECK(feats.frame_grid == b.train.features.at(id).frame_grid);

  // disjoint episode ids
  for (const auto& [id, _] : a.train.features) CHECK(a.test.features.count(id) == 0);

  // quotas
  std::map<Task, int> train_counts;
  int zero_counts = 0;
  for (const auto& it : a.train.items) {
    train_counts[it.task] += 1;
    if (it.task == Task::count && it.count_label == 0) ++zero_counts;
  }
  CHECK(train_counts[Task::count] == 40);
  CHECK(train_counts[Task::action] == 10);
  CHECK(train_counts[Task::transition] == 10);
  CHECK(train_counts[Task::frameqa] == 10);
  CHECK(zero_counts == 4);  // exactly 10% of 40, not sampled

  // different seed, different data
  const DatasetBundle c = build_dataset(cfg, 56);
  bool some_diff = false;
  for (std::size_t i = 0; i < std::min(a.train.items.size(), c.train.items.size()); ++i)
    some_diff = some_diff || a.train.items[i].question != c.train.items[i].question;
  CHECK(some_diff);
}

TEST_CASE("zero requested items produce an empty but valid dataset") {
  DatasetConfig cfg;
  cfg.episode = ecfg(8);
  cfg.render = rspec();
  const DatasetBundle bundle = build_dataset(cfg, 1);
  CHECK(bundle.train.items.empty());
  CHECK(bundle.test.items.empty());
}
