#include "stvqa/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace stvqa {

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

const WorldLexicon& WorldLexicon::standard() {
  static const WorldLexicon lex = [] {
    WorldLexicon l;
    l.subjects = {"cat", "dog", "man", "woman", "girl", "boy", "bird", "robot", "horse", "chef"};
    l.actions = {
        {"jump", ""},    {"run", ""},     {"turn", ""},    {"shake", "head"}, {"move", "box"},
        {"stand", ""},   {"touch", "nose"}, {"put", "hat"}, {"open", "door"}, {"sit", ""},
        {"look", "left"}, {"stare", ""},  {"hide", ""},    {"watch", ""},     {"smile", ""},
        {"blink", ""},   {"laugh", ""},   {"wink", ""},    {"nod", ""},       {"point", ""},
        {"talk", ""},    {"wave", "hand"}, {"spin", ""},   {"clap", ""},      {"bow", ""},
        {"stretch", ""}};
    l.background_verbs = {"breathe", "sway", "drift", "idle", "linger", "rest", "float", "pause"};
    l.attributes = {"red",  "blue",  "green", "hat",   "ball",  "scarf",
                    "stripe", "glow", "spot",  "badge", "ribbon", "crown"};
    return l;
  }();
  return lex;
}

std::vector<std::string> WorldLexicon::verb_vocab() const {
  std::vector<std::string> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(a.verb);
  return out;
}

std::vector<PhraseRecord> WorldLexicon::corpus() const {
  std::vector<PhraseRecord> out;
  out.reserve(actions.size());
  for (const auto& a : actions) {
    PhraseRecord r;
    r.subject = "";
    r.verb = a.verb;
    r.object = a.object;
    r.phrase = a.phrase();
    r.episode_id = "world";
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

// splits [begin, end) into up to n random non-empty background segments
void fill_background(std::vector<Segment>& segs, int begin, int end, int n, Rng& rng,
                     int n_background) {
  if (begin >= end) return;
  const int span = end - begin;
  const int pieces = std::max(1, std::min(n, span));
  std::vector<int> cuts{begin, end};
  for (int i = 1; i < pieces; ++i)
    cuts.push_back(begin + static_cast<int>(rng.uniform_int(1, span - 1)));
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i] == cuts[i + 1]) continue;
    Segment s;
    s.begin = cuts[i];
    s.end = cuts[i + 1];
    s.background = static_cast<int>(rng.uniform_int(0, n_background - 1));
    segs.push_back(s);
  }
}

int sample_weighted(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("count weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("count weights sum to zero");
  double x = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    x -= weights[i];
    if (x < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace

SyntheticEpisode generate_episode(Task task, const EpisodeConfig& cfg, const RenderSpec& spec,
                                  std::uint64_t seed) {
  if (cfg.steps < 1) throw std::invalid_argument("generate_episode: steps must be >= 1");
  if (spec.stride < 1) throw std::invalid_argument("generate_episode: stride must be >= 1");
  const WorldLexicon& lex = WorldLexicon::standard();
  Rng rng(splitmix64(seed));

  SyntheticEpisode ep;
  ep.task = task;
  ep.steps = cfg.steps;
  ep.stride = spec.stride;
  ep.seed = seed;
  ep.subject = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(lex.subjects.size()) - 1));
  const int L = ep.raw_length();
  const int n_bg = static_cast<int>(lex.background_verbs.size());
  int n_act = static_cast<int>(lex.actions.size());
  if (cfg.action_count > 0) n_act = std::min(n_act, cfg.action_count);

  switch (task) {
    case Task::count:
    case Task::action: {
      const int beat_cap = spec.frames_per_beat + 1;
      const int k_max = (L - 1) / beat_cap;  // span k*(beat+1)+1 must fit in L
      int k;
      if (task == Task::count) {
        if (cfg.count_weights.size() != 11)
          throw std::invalid_argument("count_weights must have 11 entries (labels 0..10)");
        k = sample_weighted(cfg.count_weights, rng);
      } else {
        if (k_max < 2)
          throw std::invalid_argument("episode too short for a repeating action: needs " +
                                      std::to_string(2 * beat_cap + 1) + " raw frames, has " +
                                      std::to_string(L));
        k = static_cast<int>(rng.uniform_int(2, std::min(10, k_max)));
      }
      if (k == 0) {
        fill_background(ep.segments, 0, L, cfg.filler_segments, rng, n_bg);
        break;
      }
      const int beat = spec.frames_per_beat;
      const int span = k * (beat + 1) + 1;
      if (span > L)
        throw std::invalid_argument("episode too short for " + std::to_string(k) +
                                    " repetitions: needs " + std::to_string(span) +
                                    " raw frames, has " + std::to_string(L));
      const int start = static_cast<int>(rng.uniform_int(0, L - span));
      ep.repeat_action = static_cast<int>(rng.uniform_int(0, n_act - 1));
      ep.repeat_count = k;
      fill_background(ep.segments, 0, start, cfg.filler_segments / 2 + 1, rng, n_bg);
      Segment rep;
      rep.begin = start;
      rep.end = start + span;
      rep.action = ep.repeat_action;
      rep.repeats = k;
      ep.segments.push_back(rep);
      fill_background(ep.segments, start + span, L, cfg.filler_segments / 2 + 1, rng, n_bg);
      break;
    }

    case Task::transition: {
      ep.prev_state = static_cast<int>(rng.uniform_int(0, n_act - 1));
      do {
        ep.next_state = static_cast<int>(rng.uniform_int(0, n_act - 1));
      } while (ep.next_state == ep.prev_state);
      const int lo = std::min(cfg.needle_margin, cfg.steps - 1);
      const int hi = std::max(lo, cfg.steps - 1 - cfg.needle_margin);
      ep.needle_step = static_cast<int>(rng.uniform_int(lo, hi));
      // fillers: askable actions other than the transition pair
      const int span = std::max(1, L / std::max(1, cfg.filler_segments));
      for (int begin = 0; begin < L; begin += span) {
        Segment s;
        s.begin = begin;
        s.end = std::min(L, begin + span);
        do {
          s.action = static_cast<int>(rng.uniform_int(0, n_act - 1));
        } while (s.action == ep.prev_state || s.action == ep.next_state);
        ep.segments.push_back(s);
      }
      break;
    }

    case Task::frameqa: {
      const int n_attr = static_cast<int>(lex.attributes.size());
      ep.gold_attribute = static_cast<int>(rng.uniform_int(0, n_attr - 1));
      const int lo = std::min(cfg.needle_margin, cfg.steps - 1);
      const int hi = std::max(lo, cfg.steps - 1 - cfg.needle_margin);
      ep.needle_step = static_cast<int>(rng.uniform_int(lo, hi));
      const int span = std::max(1, L / std::max(1, cfg.filler_segments));
      for (int begin = 0; begin < L; begin += span) {
        Segment s;
        s.begin = begin;
        s.end = std::min(L, begin + span);
        s.background = static_cast<int>(rng.uniform_int(0, n_bg - 1));
        int attr;
        do {
          attr = static_cast<int>(rng.uniform_int(0, n_attr - 1));
        } while (attr == ep.gold_attribute);
        s.attributes.push_back(attr);
        ep.segments.push_back(s);
      }
      break;
    }
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

// role -> grid cell (wrapped into the available cells)
enum Role { kCellSubject = 0, kCellAction = 1, kCellAttribute = 2, kCellPrev = 3, kCellNext = 4, kCellMarker = 5 };

std::vector<double> prototype(const RenderSpec& spec, const char* kind, int index, int channels) {
  Rng rng(splitmix64(spec.codebook_seed ^ fnv1a64(kind) ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(index + 1))));
  std::vector<double> v(static_cast<std::size_t>(channels));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

struct Codebook {
  const RenderSpec& spec;
  std::map<std::pair<std::string, int>, std::vector<double>> frame_cache, clip_cache;
  const std::vector<double>& frame(const std::string& kind, int index) {
    auto key = std::make_pair(kind, index);
    auto it = frame_cache.find(key);
    if (it == frame_cache.end())
      it = frame_cache.emplace(key, prototype(spec, ("frame/" + kind).c_str(), index, spec.frame_channels)).first;
    return it->second;
  }
  const std::vector<double>& clip(const std::string& kind, int index) {
    auto key = std::make_pair(kind, index);
    auto it = clip_cache.find(key);
    if (it == clip_cache.end())
      it = clip_cache.emplace(key, prototype(spec, ("clip/" + kind).c_str(), index, spec.clip_channels)).first;
    return it->second;
  }
};

// whether raw frame r falls inside one of a repeat segment's evenly spaced bursts
bool in_burst(const Segment& s, int r, int beat) {
  if (s.repeats <= 0) return true;  // plain segment: whole span
  const int span = s.end - s.begin;
  for (int j = 0; j < s.repeats; ++j) {
    const int start =
        s.repeats == 1
            ? s.begin
            : s.begin + static_cast<int>(std::llround(static_cast<double>(j) *
                                                      static_cast<double>(span - beat) /
                                                      static_cast<double>(s.repeats - 1)));
    if (r >= start && r < start + beat) return true;
  }
  return false;
}

void add_at_cell(std::vector<double>& grid, int locs, int channels, int cell,
                 const std::vector<double>& proto) {
  const auto base = static_cast<std::size_t>(cell % locs) * channels;
  for (int c = 0; c < channels; ++c) grid[base + static_cast<std::size_t>(c)] += proto[static_cast<std::size_t>(c)];
}

}  // namespace

RawRender render_raw(const SyntheticEpisode& ep, const RenderSpec& spec) {
  if (ep.stride != spec.stride)
    throw std::invalid_argument("render: episode stride " + std::to_string(ep.stride) +
                                " does not match spec stride " + std::to_string(spec.stride));
  const int L = ep.raw_length();
  const int locs = spec.grid * spec.grid;
  Codebook cb{spec, {}, {}};

  RawRender out;
  out.raw_length = L;
  out.frame.assign(static_cast<std::size_t>(L) * locs * spec.frame_channels, 0.0);
  out.clip.assign(static_cast<std::size_t>(L) * locs * spec.clip_channels, 0.0);

  const int needle_raw = ep.needle_step >= 0 ? ep.needle_step * ep.stride : -1;

  for (int r = 0; r < L; ++r) {
    const auto fbase = static_cast<std::size_t>(r) * locs * spec.frame_channels;
    const auto cbase = static_cast<std::size_t>(r) * locs * spec.clip_channels;
    std::vector<double> fgrid(static_cast<std::size_t>(locs) * spec.frame_channels, 0.0);
    std::vector<double> cgrid(static_cast<std::size_t>(locs) * spec.clip_channels, 0.0);

    add_at_cell(fgrid, locs, spec.frame_channels, kCellSubject, cb.frame("subject", ep.subject));

    for (const Segment& s : ep.segments) {
      if (r < s.begin || r >= s.end) continue;
      if (s.action >= 0 && in_burst(s, r, spec.frames_per_beat)) {
        add_at_cell(fgrid, locs, spec.frame_channels, kCellAction, cb.frame("action", s.action));
        add_at_cell(cgrid, locs, spec.clip_channels, kCellAction, cb.clip("action", s.action));
      }
      if (s.background >= 0) {
        add_at_cell(fgrid, locs, spec.frame_channels, kCellAction, cb.frame("background", s.background));
        add_at_cell(cgrid, locs, spec.clip_channels, kCellAction, cb.clip("background", s.background));
      }
      for (int attr : s.attributes)
        add_at_cell(fgrid, locs, spec.frame_channels, kCellAttribute, cb.frame("attribute", attr));
    }

    if (r == needle_raw) {
      auto add_scaled = [&](std::vector<double>& grid, int channels, int cell,
                            const std::vector<double>& proto) {
        const auto base = static_cast<std::size_t>(cell % locs) * channels;
        for (int c = 0; c < channels; ++c)
          grid[base + static_cast<std::size_t>(c)] += spec.needle_gain * proto[static_cast<std::size_t>(c)];
      };
      add_scaled(fgrid, spec.frame_channels, kCellMarker, cb.frame("marker", 0));
      add_scaled(cgrid, spec.clip_channels, kCellMarker, cb.clip("marker", 0));
      if (ep.prev_state >= 0) {
        add_scaled(fgrid, spec.frame_channels, kCellPrev, cb.frame("action", ep.prev_state));
        add_scaled(cgrid, spec.clip_channels, kCellPrev, cb.clip("action", ep.prev_state));
      }
      if (ep.next_state >= 0) {
        add_scaled(fgrid, spec.frame_channels, kCellNext, cb.frame("action", ep.next_state));
        add_scaled(cgrid, spec.clip_channels, kCellNext, cb.clip("action", ep.next_state));
      }
      if (ep.gold_attribute >= 0)
        add_scaled(fgrid, spec.frame_channels, kCellAttribute,
                   cb.frame("attribute", ep.gold_attribute));
    }

    std::copy(fgrid.begin(), fgrid.end(), out.frame.begin() + static_cast<std::ptrdiff_t>(fbase));
    std::copy(cgrid.begin(), cgrid.end(), out.clip.begin() + static_cast<std::ptrdiff_t>(cbase));
  }
  return out;
}

VideoFeatures render_features(const SyntheticEpisode& ep, const RenderSpec& spec) {
  const RawRender raw = render_raw(ep, spec);
  const int L = raw.raw_length;
  const int locs = spec.grid * spec.grid;
  const int T = ep.steps;
  const std::size_t fstep = static_cast<std::size_t>(locs) * spec.frame_channels;
  const std::size_t cstep = static_cast<std::size_t>(locs) * spec.clip_channels;

  std::vector<double> frame_grid(static_cast<std::size_t>(T) * fstep);
  std::vector<double> clip_grid(static_cast<std::size_t>(T) * cstep, 0.0);

  const int half = spec.window / 2;
  for (int t = 0; t < T; ++t) {
    const int r = t * spec.stride;
    std::copy(raw.frame.begin() + static_cast<std::ptrdiff_t>(r * fstep),
              raw.frame.begin() + static_cast<std::ptrdiff_t>((r + 1) * fstep),
              frame_grid.begin() + static_cast<std::ptrdiff_t>(t * fstep));
    // 16 subsequent raw frames centered on r, clamped at the boundaries
    for (int off = -half; off < spec.window - half; ++off) {
      const int j = std::clamp(r + off, 0, L - 1);
      const double* src = raw.clip.data() + static_cast<std::size_t>(j) * cstep;
      double* dst = clip_grid.data() + static_cast<std::size_t>(t) * cstep;
      for (std::size_t i = 0; i < cstep; ++i) dst[i] += src[i];
    }
  }
  const double inv_w = 1.0 / static_cast<double>(spec.window);
  for (auto& v : clip_grid) v *= inv_w;

  if (spec.noise > 0.0) {
    Rng noise = named_stream(ep.seed, "render/noise");
    for (auto& v : frame_grid) v += noise.normal(0.0, spec.noise);
    for (auto& v : clip_grid) v += noise.normal(0.0, spec.noise);
  }

  return VideoFeatures::from_grids(T, spec.grid, spec.frame_channels, spec.clip_channels,
                                   std::move(frame_grid), std::move(clip_grid));
}

// ---------------------------------------------------------------------------
// QA derivation
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_phrase(const std::string& s) {
  std::vector<std::string> out;
  std::string w;
  for (char c : s) {
    if (c == ' ') {
      if (!w.empty()) out.push_back(std::move(w));
      w.clear();
    } else {
      w += c;
    }
  }
  if (!w.empty()) out.push_back(std::move(w));
  return out;
}

QAItem make_multichoice(const SyntheticEpisode& ep, const QaGenHooks& hooks, Task task,
                        const std::string& suffix, const std::vector<std::string>& question,
                        const WorldAction& gold, Rng& rng) {
  std::vector<PhraseRecord> phrases;
  if (hooks.uniform_distractors) {
    const std::string gold_norm = normalize_phrase(gold.phrase());
    std::vector<const PhraseRecord*> pool;
    for (const auto& r : *hooks.corpus)
      if (r.verb != gold.verb && normalize_phrase(r.phrase) != gold_norm) pool.push_back(&r);
    if (pool.size() < 4)
      throw std::runtime_error("uniform distractors need at least 4 other corpus phrases");
    for (int i = 0; i < 4; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
      phrases.push_back(*pool[j]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    }
  } else {
    const auto distractor_verbs =
        select_distractor_verbs(gold.verb, *hooks.verb_vocab, *hooks.embeddings);
    phrases =
        select_candidate_phrases(distractor_verbs, *hooks.corpus, *hooks.embeddings, gold.phrase());
  }

  QAItem it;
  it.id = ep.id + suffix;
  it.episode_id = ep.id;
  it.task = task;
  it.question = question;
  it.gold_index = static_cast<int>(rng.uniform_int(0, 4));
  const std::string gold_norm = normalize_phrase(gold.phrase());
  std::size_t d = 0;
  for (int pos = 0; pos < 5; ++pos) {
    if (pos == it.gold_index) {
      it.candidates.push_back(split_phrase(gold.phrase()));
    } else {
      if (normalize_phrase(phrases[d].phrase) == gold_norm)
        throw std::logic_error("distractor equals the gold answer: " + phrases[d].phrase);
      it.candidates.push_back(split_phrase(phrases[d].phrase));
      ++d;
    }
  }
  return it;
}

}  // namespace

std::vector<QAItem> derive_qa(const SyntheticEpisode& ep, const QaGenHooks& hooks) {
  if (!hooks.lexicon || !hooks.embeddings || !hooks.corpus || !hooks.verb_vocab)
    throw std::invalid_argument("derive_qa: incomplete hooks");
  const WorldLexicon& lex = *hooks.lexicon;
  Rng rng = named_stream(ep.seed, "qa/derive");
  std::vector<QAItem> out;
  const std::string& subject = lex.subjects[static_cast<std::size_t>(ep.subject)];

  if (ep.has_repetition()) {
    const WorldAction& act = lex.actions[static_cast<std::size_t>(ep.repeat_action)];
    TemplateSlots s;
    s.subject = subject;
    s.verb = act.verb;
    s.object = act.object;
    s.repeat = ep.repeat_count;
    const QAText qa = instantiate_template(TemplateKind::count, s);
    QAItem it;
    it.id = ep.id + "_count";
    it.episode_id = ep.id;
    it.task = Task::count;
    it.question = qa.question;
    it.count_label = ep.repeat_count;
    out.push_back(std::move(it));

    if (ep.repeat_count >= 2) {
      const QAText aq = instantiate_template(TemplateKind::action, s);
      out.push_back(make_multichoice(ep, hooks, Task::action, "_action", aq.question, act, rng));
    }
  } else if (ep.task == Task::count && hooks.zero_question_pool &&
             !hooks.zero_question_pool->empty()) {
    Rng zrng = named_stream(ep.seed, "qa/zero");
    auto items = make_zero_count_items(*hooks.zero_question_pool, {ep.id}, 1, zrng);
    items[0].id = ep.id + "_count0";
    out.push_back(std::move(items[0]));
  }

  if (ep.prev_state >= 0 && ep.next_state >= 0) {
    const WorldAction& prev = lex.actions[static_cast<std::size_t>(ep.prev_state)];
    const WorldAction& next = lex.actions[static_cast<std::size_t>(ep.next_state)];
    TemplateSlots s;
    s.subject = subject;
    s.prev_state = prev.phrase();
    s.next_state = next.phrase();
    const QAText before = instantiate_template(TemplateKind::transition_before, s);
    out.push_back(
        make_multichoice(ep, hooks, Task::transition, "_before", before.question, prev, rng));
    const QAText after = instantiate_template(TemplateKind::transition_after, s);
    out.push_back(
        make_multichoice(ep, hooks, Task::transition, "_after", after.question, next, rng));
  }

  if (ep.gold_attribute >= 0) {
    TemplateSlots s;
    s.subject = subject;
    s.attribute = lex.attributes[static_cast<std::size_t>(ep.gold_attribute)];
    const QAText qa = instantiate_template(TemplateKind::frameqa, s);
    QAItem it;
    it.id = ep.id + "_frameqa";
    it.episode_id = ep.id;
    it.task = Task::frameqa;
    it.question = qa.question;
    it.gold_word = qa.answer[0];
    out.push_back(std::move(it));
  }

  return out;
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

namespace {

struct SplitBuilder {
  const DatasetConfig& cfg;
  const QaGenHooks& hooks;
  std::uint64_t root_seed;
  int episode_counter = 0;

  SyntheticEpisode gen(Task task, const EpisodeConfig& ecfg, const char* split) {
    const std::uint64_t seed =
        splitmix64(root_seed ^ fnv1a64(split) ^ static_cast<std::uint64_t>(episode_counter));
    SyntheticEpisode ep = generate_episode(task, ecfg, cfg.render, seed);
    char buf[16];
    std::snprintf(buf, sizeof buf, "ep%06d", episode_counter);
    ep.id = buf;
    ++episode_counter;
    return ep;
  }
};

}  // namespace

DatasetBundle build_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  const WorldLexicon& lex = WorldLexicon::standard();
  const HashedEmbeddingProvider emb(16, splitmix64(seed ^ fnv1a64("embeddings")));
  auto corpus = lex.corpus();
  auto verbs = lex.verb_vocab();
  if (cfg.episode.action_count > 0) {
    corpus.resize(std::min<std::size_t>(corpus.size(), static_cast<std::size_t>(cfg.episode.action_count)));
    verbs.resize(std::min<std::size_t>(verbs.size(), static_cast<std::size_t>(cfg.episode.action_count)));
  }

  QaGenHooks hooks;
  hooks.lexicon = &lex;
  hooks.embeddings = &emb;
  hooks.corpus = &corpus;
  hooks.verb_vocab = &verbs;
  hooks.uniform_distractors = cfg.uniform_distractors;

  DatasetBundle bundle;
  bundle.corpus = corpus;
  SplitBuilder builder{cfg, hooks, seed, 0};

  auto build_split = [&](const std::map<Task, int>& quotas, Dataset& out, const char* split) {
    for (const auto& [task, want] : quotas) {
      if (want <= 0) continue;
      int have = 0;

      if (task == Task::count) {
        const int zero_quota = static_cast<int>(std::lround(want * cfg.zero_count_fraction));
        const int nonzero_quota = want - zero_quota;
        // non-zero episodes first; their questions form the zero-count pool
        EpisodeConfig nz = cfg.episode;
        nz.count_weights[0] = 0.0;
        std::vector<std::vector<std::string>> pool;
        while (have < nonzero_quota) {
          SyntheticEpisode ep = builder.gen(Task::count, nz, split);
          auto items = derive_qa(ep, hooks);
          for (auto& it : items) {
            if (it.task != Task::count || have >= nonzero_quota) continue;
            pool.push_back(it.question);
            out.items.push_back(std::move(it));
            ++have;
          }
          out.features.emplace(ep.id, render_features(ep, cfg.render));
          bundle.episodes.push_back(std::move(ep));
        }
        if (zero_quota > 0 && pool.empty())
          throw std::invalid_argument(
              "zero-count items need at least one non-zero count question to pair with");
        QaGenHooks zhooks = hooks;
        zhooks.zero_question_pool = &pool;
        EpisodeConfig zcfg = cfg.episode;
        std::fill(zcfg.count_weights.begin(), zcfg.count_weights.end(), 0.0);
        zcfg.count_weights[0] = 1.0;
        for (int z = 0; z < zero_quota; ++z) {
          SyntheticEpisode ep = builder.gen(Task::count, zcfg, split);
          auto items = derive_qa(ep, zhooks);
          for (auto& it : items)
            if (it.task == Task::count) out.items.push_back(std::move(it));
          out.features.emplace(ep.id, render_features(ep, cfg.render));
          bundle.episodes.push_back(std::move(ep));
        }
        continue;
      }

      while (have < want) {
        SyntheticEpisode ep = builder.gen(task, cfg.episode, split);
        auto items = derive_qa(ep, hooks);
        bool used = false;
        for (auto& it : items) {
          if (it.task != task || have >= want) continue;
          out.items.push_back(std::move(it));
          ++have;
          used = true;
        }
        if (used) {
          out.features.emplace(ep.id, render_features(ep, cfg.render));
          bundle.episodes.push_back(std::move(ep));
        }
      }
    }
  };

  build_split(cfg.train_items, bundle.train, "train");
  build_split(cfg.test_items, bundle.test, "test");

  for (const auto& [id, _] : bundle.train.features)
    if (bundle.test.features.count(id))
      throw std::logic_error("train/test episode id overlap: " + id);

  return bundle;
}

}  // namespace stvqa
