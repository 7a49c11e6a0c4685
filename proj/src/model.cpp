#include "stvqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "stvqa/losses.hpp"

namespace stvqa {

// ---------------------------------------------------------------------------
// Enums
// ---------------------------------------------------------------------------

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::text: return "text";
    case Variant::resnet: return "resnet";
    case Variant::c3d: return "c3d";
    case Variant::concat: return "concat";
    case Variant::spatial: return "spatial";
    case Variant::temporal: return "temporal";
    case Variant::spatial_temporal: return "spatial_temporal";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == s) return v;
  std::string valid;
  for (Variant v : kAllVariants) valid += (valid.empty() ? "" : ", ") + variant_name(v);
  throw std::invalid_argument("unknown variant '" + s + "' (valid: " + valid + ")");
}

bool variant_uses_spatial(Variant v) {
  return v == Variant::spatial || v == Variant::spatial_temporal;
}

bool variant_uses_temporal(Variant v) {
  return v == Variant::temporal || v == Variant::spatial_temporal;
}

std::string task_name(Task t) {
  switch (t) {
    case Task::count: return "count";
    case Task::action: return "action";
    case Task::transition: return "transition";
    case Task::frameqa: return "frameqa";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  for (Task t : kAllTasks)
    if (task_name(t) == s) return t;
  throw std::invalid_argument("unknown task '" + s + "' (valid: count, action, transition, frameqa)");
}

bool task_is_multichoice(Task t) { return t == Task::action || t == Task::transition; }

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

Vocab Vocab::build(const std::vector<std::string>& tokens) {
  std::set<std::string> uniq(tokens.begin(), tokens.end());
  uniq.erase("<unk>");
  uniq.erase("<boa>");
  Vocab v;
  v.words.reserve(uniq.size() + 2);
  v.words.push_back("<unk>");
  v.words.push_back("<boa>");
  v.words.insert(v.words.end(), uniq.begin(), uniq.end());
  return v;
}

int Vocab::id(const std::string& w) const {
  // linear scan is fine at desk-scale vocabularies; keeps the type trivially
  // copyable for configs and checkpoints
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i] == w) return static_cast<int>(i);
  return kUnk;
}

// ---------------------------------------------------------------------------
// Config / features
// ---------------------------------------------------------------------------

int ModelConfig::video_input_dim() const {
  switch (variant) {
    case Variant::resnet: return frame_channels;
    case Variant::c3d: return clip_channels;
    default: return concat_channels();
  }
}

VideoFeatures VideoFeatures::from_grids(int T, int G, int Cf, int Cs,
                                        std::vector<double> frame_grid,
                                        std::vector<double> clip_grid) {
  const auto locs = static_cast<std::size_t>(G) * G;
  if (frame_grid.size() != static_cast<std::size_t>(T) * locs * Cf ||
      clip_grid.size() != static_cast<std::size_t>(T) * locs * Cs)
    throw std::invalid_argument("VideoFeatures::from_grids: grid sizes do not match dims");
  VideoFeatures f;
  f.T = T;
  f.G = G;
  f.Cf = Cf;
  f.Cs = Cs;
  f.frame_grid = std::move(frame_grid);
  f.clip_grid = std::move(clip_grid);
  f.frame_pooled.assign(static_cast<std::size_t>(T) * Cf, 0.0);
  f.clip_pooled.assign(static_cast<std::size_t>(T) * Cs, 0.0);
  for (int t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < locs; ++l) {
      for (int c = 0; c < Cf; ++c)
        f.frame_pooled[static_cast<std::size_t>(t) * Cf + c] +=
            f.frame_grid[(static_cast<std::size_t>(t) * locs + l) * Cf + c];
      for (int c = 0; c < Cs; ++c)
        f.clip_pooled[static_cast<std::size_t>(t) * Cs + c] +=
            f.clip_grid[(static_cast<std::size_t>(t) * locs + l) * Cs + c];
    }
  }
  // exact division keeps pooled == mean(grid) bitwise
  for (auto& v : f.frame_pooled) v /= static_cast<double>(locs);
  for (auto& v : f.clip_pooled) v /= static_cast<double>(locs);
  return f;
}

Tensor VideoFeatures::frame_pooled_vec(int t) const {
  return Tensor({Cf}, {frame_pooled.begin() + static_cast<std::ptrdiff_t>(t) * Cf,
                       frame_pooled.begin() + static_cast<std::ptrdiff_t>(t + 1) * Cf});
}

Tensor VideoFeatures::clip_pooled_vec(int t) const {
  return Tensor({Cs}, {clip_pooled.begin() + static_cast<std::ptrdiff_t>(t) * Cs,
                       clip_pooled.begin() + static_cast<std::ptrdiff_t>(t + 1) * Cs});
}

Tensor VideoFeatures::concat_pooled_vec(int t) const {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(Cs + Cf));
  d.insert(d.end(), clip_pooled.begin() + static_cast<std::ptrdiff_t>(t) * Cs,
           clip_pooled.begin() + static_cast<std::ptrdiff_t>(t + 1) * Cs);
  d.insert(d.end(), frame_pooled.begin() + static_cast<std::ptrdiff_t>(t) * Cf,
           frame_pooled.begin() + static_cast<std::ptrdiff_t>(t + 1) * Cf);
  return Tensor({Cs + Cf}, std::move(d));
}

Tensor VideoFeatures::concat_grid_matrix(int t) const {
  const auto locs = static_cast<std::size_t>(G) * G;
  std::vector<double> d;
  d.reserve(locs * static_cast<std::size_t>(Cs + Cf));
  for (std::size_t l = 0; l < locs; ++l) {
    const auto cb = (static_cast<std::size_t>(t) * locs + l) * Cs;
    const auto fb = (static_cast<std::size_t>(t) * locs + l) * Cf;
    d.insert(d.end(), clip_grid.begin() + static_cast<std::ptrdiff_t>(cb),
             clip_grid.begin() + static_cast<std::ptrdiff_t>(cb + Cs));
    d.insert(d.end(), frame_grid.begin() + static_cast<std::ptrdiff_t>(fb),
             frame_grid.begin() + static_cast<std::ptrdiff_t>(fb + Cf));
  }
  return Tensor({G * G, Cs + Cf}, std::move(d));
}

VideoFeatures VideoFeatures::aggregate_time() const {
  const auto locs = static_cast<std::size_t>(G) * G;
  std::vector<double> fg(locs * Cf, 0.0), cg(locs * Cs, 0.0);
  for (int t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < locs * static_cast<std::size_t>(Cf); ++i)
      fg[i] += frame_grid[static_cast<std::size_t>(t) * locs * Cf + i];
    for (std::size_t i = 0; i < locs * static_cast<std::size_t>(Cs); ++i)
      cg[i] += clip_grid[static_cast<std::size_t>(t) * locs * Cs + i];
  }
  const double inv = 1.0 / static_cast<double>(T);
  for (auto& v : fg) v *= inv;
  for (auto& v : cg) v *= inv;
  return from_grids(1, G, Cf, Cs, std::move(fg), std::move(cg));
}

VideoFeatures VideoFeatures::single_frame(int t) const {
  const auto locs = static_cast<std::size_t>(G) * G;
  std::vector<double> fg(frame_grid.begin() + static_cast<std::ptrdiff_t>(t * locs * Cf),
                         frame_grid.begin() + static_cast<std::ptrdiff_t>((t + 1) * locs * Cf));
  std::vector<double> cg(clip_grid.begin() + static_cast<std::ptrdiff_t>(t * locs * Cs),
                         clip_grid.begin() + static_cast<std::ptrdiff_t>((t + 1) * locs * Cs));
  return from_grids(1, G, Cf, Cs, std::move(fg), std::move(cg));
}

// ---------------------------------------------------------------------------
// Parameter initialization
// ---------------------------------------------------------------------------

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed,
                              const InitHyper& hyper) {
  if (cfg.vocab.empty()) throw std::invalid_argument("ModelParams::init: empty vocabulary");
  ModelParams mp;
  mp.config = cfg;
  Rng rng = named_stream(seed, "model/init");

  mp.set.add("embedding", Tensor::normal({cfg.vocab.size(), cfg.embedding_dim}, 0.0,
                                         hyper.normal_stddev, rng));

  add_lstm_params(mp.set, "video.l1", cfg.video_input_dim(), cfg.hidden_dim, rng, hyper);
  add_lstm_params(mp.set, "video.l2", cfg.hidden_dim, cfg.hidden_dim, rng, hyper);
  add_lstm_params(mp.set, "text.l1", cfg.embedding_dim, cfg.hidden_dim, rng, hyper);
  add_lstm_params(mp.set, "text.l2", cfg.hidden_dim, cfg.hidden_dim, rng, hyper);

  if (variant_uses_spatial(cfg.variant))
    add_attn_mlp_params(mp.set, "spatial_attn", cfg.combined_dim() + cfg.concat_channels(),
                        cfg.attention_hidden, rng, hyper);
  if (variant_uses_temporal(cfg.variant)) {
    add_attn_mlp_params(mp.set, "temporal_attn", 2 * cfg.combined_dim(), cfg.attention_hidden,
                        rng, hyper);
    mp.set.add("temporal_attn.w_alpha",
               Tensor::normal({cfg.combined_dim(), cfg.combined_dim()}, 0.0, hyper.normal_stddev,
                              rng));
  }

  mp.set.add("dec.w_s", Tensor::normal({1, cfg.combined_dim()}, 0.0, hyper.normal_stddev, rng));
  mp.set.add("dec.b_s", Tensor({1}));
  mp.set.add("dec.w_o",
             Tensor::normal({cfg.vocab.size(), cfg.combined_dim()}, 0.0, hyper.normal_stddev, rng));
  mp.set.add("dec.b_o", Tensor({cfg.vocab.size()}));
  return mp;
}

// ---------------------------------------------------------------------------
// Sub-operations
// ---------------------------------------------------------------------------

namespace {

DualLstmIds bind_encoder(const BoundParams& bp, const std::string& name, int hidden) {
  return DualLstmIds{bind_lstm_cell(bp, name + ".l1", hidden),
                     bind_lstm_cell(bp, name + ".l2", hidden)};
}

std::vector<NodeId> embed_tokens(Graph& g, const BoundParams& bp, const Vocab& vocab,
                                 const std::vector<std::string>& tokens, bool prepend_boa) {
  const NodeId table = bp.id("embedding");
  std::vector<NodeId> out;
  out.reserve(tokens.size() + (prepend_boa ? 1 : 0));
  if (prepend_boa) out.push_back(g.take_row(table, Vocab::kBoa));
  for (const auto& tok : tokens) out.push_back(g.take_row(table, vocab.id(tok)));
  return out;
}

std::vector<double> mask_values(const Graph& g, NodeId mask) { return g.value(mask).data; }

}  // namespace

SpatialAttendResult spatial_attend(Graph& g, const AttnMlpIds& mlp, NodeId text_state,
                                   const Tensor& grid_matrix) {
  const int locs = grid_matrix.dim(0);
  const NodeId grid = g.constant(grid_matrix);
  std::vector<NodeId> keys;
  keys.reserve(static_cast<std::size_t>(locs));
  for (int l = 0; l < locs; ++l) keys.push_back(g.take_row(grid, l));
  SpatialAttendResult r;
  r.mask = mlp_attention_scores(g, text_state, keys, mlp);
  r.attended = g.matmul(r.mask, grid);
  return r;
}

VideoEncodeResult encode_video(Graph& g, const BoundParams& bp, const ModelConfig& cfg,
                               const VideoFeatures& feats, NodeId question_prepass,
                               const DropoutCtx& drop) {
  if (feats.T <= 0) throw std::invalid_argument("encode_video: empty feature sequence");
  const bool spatial = variant_uses_spatial(cfg.variant);
  if (spatial && question_prepass < 0)
    throw std::invalid_argument("encode_video: spatial variant needs the question pre-pass state");
  if (spatial && (feats.G != cfg.grid || feats.Cf != cfg.frame_channels || feats.Cs != cfg.clip_channels))
    throw std::invalid_argument("encode_video: grid features do not match the model config");

  VideoEncodeResult out;
  AttnMlpIds sp_mlp{};
  if (spatial) sp_mlp = bind_attn_mlp(bp, "spatial_attn");

  std::vector<NodeId> inputs;
  inputs.reserve(static_cast<std::size_t>(feats.T));
  for (int t = 0; t < feats.T; ++t) {
    switch (cfg.variant) {
      case Variant::text:
        inputs.push_back(g.constant(Tensor({cfg.concat_channels()})));
        break;
      case Variant::resnet:
        inputs.push_back(g.constant(feats.frame_pooled_vec(t)));
        break;
      case Variant::c3d:
        inputs.push_back(g.constant(feats.clip_pooled_vec(t)));
        break;
      case Variant::concat:
      case Variant::temporal:
        inputs.push_back(g.constant(feats.concat_pooled_vec(t)));
        break;
      case Variant::spatial:
      case Variant::spatial_temporal: {
        const auto att = spatial_attend(g, sp_mlp, question_prepass, feats.concat_grid_matrix(t));
        out.spatial_masks.push_back(mask_values(g, att.mask));
        inputs.push_back(att.attended);
        break;
      }
    }
  }

  const auto enc = dual_lstm_encode(g, inputs, zero_dual_state(g, cfg.hidden_dim),
                                    bind_encoder(bp, "video", cfg.hidden_dim), cfg.ln_eps, drop);
  out.states = enc.combined;
  out.final_state = enc.final_state;
  out.final_combined = enc.final_combined;
  return out;
}

TextEncodeResult encode_text(Graph& g, const BoundParams& bp, const ModelConfig& cfg,
                             const std::vector<std::string>& question,
                             const std::vector<std::string>* answer, DualState init,
                             const DropoutCtx& drop) {
  if (question.empty()) throw std::invalid_argument("encode_text: empty question");
  const auto cells = bind_encoder(bp, "text", cfg.hidden_dim);

  TextEncodeResult out;
  const auto q_in = embed_tokens(g, bp, cfg.vocab, question, false);
  const auto q_enc = dual_lstm_encode(g, q_in, init, cells, cfg.ln_eps, drop);
  out.question_state = q_enc.final_combined;
  out.question_final = q_enc.final_state;

  if (answer != nullptr) {
    const auto a_in = embed_tokens(g, bp, cfg.vocab, *answer, true);  // <boa> first
    const auto a_enc = dual_lstm_encode(g, a_in, q_enc.final_state, cells, cfg.ln_eps, drop);
    out.answer_state = a_enc.final_combined;
  }
  return out;
}

TemporalAttendResult temporal_attend(Graph& g, const BoundParams& bp, NodeId query,
                                     const std::vector<NodeId>& video_states) {
  if (video_states.empty()) throw std::invalid_argument("temporal_attend: empty state sequence");
  const auto mlp = bind_attn_mlp(bp, "temporal_attn");
  TemporalAttendResult r;
  r.mask = mlp_attention_scores(g, query, video_states, mlp);
  const NodeId hmat = g.stack(video_states);               // (T, 2D)
  const NodeId ctx = g.matmul(r.mask, hmat);               // (2D)
  const NodeId proj = g.tanh(g.matmul(ctx, bp.id("temporal_attn.w_alpha")));
  r.fused = g.add(proj, query);
  return r;
}

NodeId decode_multichoice(Graph& g, const BoundParams& bp, NodeId answer_state) {
  return g.matmul(bp.id("dec.w_s"), answer_state);
}

NodeId decode_count(Graph& g, const BoundParams& bp, NodeId answer_state) {
  return g.add(g.matmul(bp.id("dec.w_s"), answer_state), bp.id("dec.b_s"));
}

NodeId decode_word(Graph& g, const BoundParams& bp, NodeId question_state) {
  return g.softmax(g.add(g.matmul(bp.id("dec.w_o"), question_state), bp.id("dec.b_o")));
}

int clamp_count(double raw) {
  const int r = static_cast<int>(std::lround(raw));
  return std::clamp(r, 0, 10);
}

int argmax_lowest(const std::vector<double>& xs) {
  int best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// ---------------------------------------------------------------------------
// Full forward
// ---------------------------------------------------------------------------

ForwardResult forward(Graph& g, const BoundParams& bp, const ModelConfig& cfg,
                      const QAItem& item, const VideoFeatures& feats,
                      const ForwardOptions& opt) {
  DropoutCtx drop{cfg.dropout_rate, opt.training, opt.dropout_rng};
  ForwardResult out;
  out.pred.task = item.task;

  // spatial question pre-pass shares the text-encoder parameters, zero init
  NodeId prepass = -1;
  if (variant_uses_spatial(cfg.variant)) {
    const auto pre = encode_text(g, bp, cfg, item.question, nullptr,
                                 zero_dual_state(g, cfg.hidden_dim), drop);
    prepass = pre.question_state;
  }

  const auto video = encode_video(g, bp, cfg, feats, prepass, drop);
  if (opt.want_masks) out.spatial_masks = video.spatial_masks;

  const auto text = encode_text(g, bp, cfg, item.question, nullptr, video.final_state, drop);
  const bool temporal = variant_uses_temporal(cfg.variant);

  switch (item.task) {
    case Task::frameqa: {
      NodeId qstate = text.question_state;
      if (temporal) {
        const auto att = temporal_attend(g, bp, qstate, video.states);
        if (opt.want_masks) out.temporal_masks.push_back(g.value(att.mask).data);
        qstate = att.fused;
      }
      const NodeId dist = decode_word(g, bp, qstate);
      out.pred.distribution = g.value(dist).data;
      out.pred.pred_word = argmax_lowest(out.pred.distribution);
      if (opt.build_loss) {
        const int gold = cfg.vocab.id(item.gold_word);
        out.loss = softmax_xent_loss(g, dist, gold);
      }
      break;
    }

    case Task::count: {
      // answer encoder runs on <boa> alone; its state is the decoder input
      const std::vector<std::string> empty_answer;
      const auto enc = encode_text(g, bp, cfg, item.question, &empty_answer, video.final_state, drop);
      NodeId astate = *enc.answer_state;
      if (temporal) {
        const auto att = temporal_attend(g, bp, astate, video.states);
        if (opt.want_masks) out.temporal_masks.push_back(g.value(att.mask).data);
        astate = att.fused;
      }
      const NodeId pred = decode_count(g, bp, astate);
      out.pred.count_raw = g.value(pred).scalar_value();
      out.pred.count_readable = clamp_count(out.pred.count_raw);
      if (opt.build_loss) out.loss = l2_count_loss(g, pred, item.count_label);
      break;
    }

    case Task::action:
    case Task::transition: {
      if (item.candidates.size() != 5)
        throw std::invalid_argument("multiple-choice item needs exactly 5 candidates, got " +
                                    std::to_string(item.candidates.size()));
      std::vector<NodeId> score_nodes;
      score_nodes.reserve(5);
      for (const auto& cand : item.candidates) {
        const auto enc = encode_text(g, bp, cfg, item.question, &cand, video.final_state, drop);
        NodeId astate = *enc.answer_state;
        if (temporal) {
          const auto att = temporal_attend(g, bp, astate, video.states);
          if (opt.want_masks) out.temporal_masks.push_back(g.value(att.mask).data);
          astate = att.fused;
        }
        score_nodes.push_back(decode_multichoice(g, bp, astate));
      }
      out.pred.scores.reserve(5);
      for (NodeId s : score_nodes) out.pred.scores.push_back(g.value(s).scalar_value());
      out.pred.pred_index = argmax_lowest(out.pred.scores);
      if (opt.build_loss) {
        if (item.gold_index < 0 || item.gold_index >= 5)
          throw std::invalid_argument("multiple-choice item needs a gold index in [0,5)");
        std::vector<NodeId> negs;
        for (int i = 0; i < 5; ++i)
          if (i != item.gold_index) negs.push_back(score_nodes[static_cast<std::size_t>(i)]);
        out.loss = hinge_pairwise_loss(g, score_nodes[static_cast<std::size_t>(item.gold_index)], negs);
      }
      break;
    }
  }

  return out;
}

Prediction predict(const ModelParams& params, const QAItem& item, const VideoFeatures& feats) {
  Graph g;
  const BoundParams bp = bind_params(g, params.set);
  return forward(g, bp, params.config, item, feats).pred;
}

}  // namespace stvqa
