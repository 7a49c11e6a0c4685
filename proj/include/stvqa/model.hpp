#pragma once
// The seven model variants: dual-LSTM video and text encoders with state
// hand-off, optional spatial attention over grid features (question pre-pass
// shares the text-encoder parameters) and optional temporal attention over
// the video state sequence, plus the three answer decoders.

#include <optional>
#include <string>
#include <vector>

#include "stvqa/layers.hpp"

namespace stvqa {

// ---------------------------------------------------------------------------
// Enums
// ---------------------------------------------------------------------------

enum class Variant { text, resnet, c3d, concat, spatial, temporal, spatial_temporal };

// ablation-table row order
inline constexpr Variant kAllVariants[] = {
    Variant::text,   Variant::resnet,   Variant::c3d,      Variant::concat,
    Variant::spatial, Variant::temporal, Variant::spatial_temporal};

std::string variant_name(Variant v);
Variant variant_from_string(const std::string& s);  // throws listing valid names
bool variant_uses_spatial(Variant v);
bool variant_uses_temporal(Variant v);

enum class Task { count, action, transition, frameqa };
inline constexpr Task kAllTasks[] = {Task::count, Task::action, Task::transition, Task::frameqa};
std::string task_name(Task t);
Task task_from_string(const std::string& s);
bool task_is_multichoice(Task t);

// ---------------------------------------------------------------------------
// Vocabulary. Index 0 is <unk>, index 1 is <boa>.
// ---------------------------------------------------------------------------
struct Vocab {
  static constexpr int kUnk = 0;
  static constexpr int kBoa = 1;

  std::vector<std::string> words;

  static Vocab build(const std::vector<std::string>& tokens);  // sorted unique + specials
  int id(const std::string& w) const;
  int size() const { return static_cast<int>(words.size()); }
  bool empty() const { return words.empty(); }
};

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------
struct ModelConfig {
  Variant variant = Variant::concat;
  int hidden_dim = 32;      // D per LSTM layer
  int embedding_dim = 16;
  int attention_hidden = 32;
  int grid = 3;             // G
  int frame_channels = 16;  // C_f
  int clip_channels = 8;    // C_s
  double dropout_rate = 0.2;
  double ln_eps = 1e-5;
  Vocab vocab;

  int combined_dim() const { return 2 * hidden_dim; }
  int concat_channels() const { return clip_channels + frame_channels; }
  int video_input_dim() const;
};

// ---------------------------------------------------------------------------
// Per-episode features. The two grid views are authoritative; pooled views
// are their exact spatial means (set on construction).
// Layout: grid[t][loc][c] row-major with loc = gy*G + gx; the per-location
// channel order everywhere is [clip ; frame].
// ---------------------------------------------------------------------------
struct VideoFeatures {
  int T = 0, G = 0, Cf = 0, Cs = 0;
  std::vector<double> frame_grid;   // T*G*G*Cf
  std::vector<double> clip_grid;    // T*G*G*Cs
  std::vector<double> frame_pooled; // T*Cf
  std::vector<double> clip_pooled;  // T*Cs

  static VideoFeatures from_grids(int T, int G, int Cf, int Cs, std::vector<double> frame_grid,
                                  std::vector<double> clip_grid);

  Tensor frame_pooled_vec(int t) const;
  Tensor clip_pooled_vec(int t) const;
  Tensor concat_pooled_vec(int t) const;   // (Cs+Cf)
  Tensor concat_grid_matrix(int t) const;  // (G*G, Cs+Cf)

  VideoFeatures aggregate_time() const;        // "aggr": average features over T
  VideoFeatures single_frame(int t) const;     // "avg": one-step slice
};

// ---------------------------------------------------------------------------
// One question instance
// ---------------------------------------------------------------------------
struct QAItem {
  std::string id;
  std::string episode_id;
  Task task = Task::count;
  std::vector<std::string> question;
  std::vector<std::vector<std::string>> candidates;  // 5 for multiple choice
  int gold_index = -1;                               // multiple choice
  int count_label = -1;                              // 0..10
  std::string gold_word;                             // frameqa
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------
struct ModelParams {
  ModelConfig config;
  ParamSet set;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed,
                          const InitHyper& hyper = {});
};

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------
struct ForwardOptions {
  bool training = false;          // enables dropout
  Rng* dropout_rng = nullptr;
  bool build_loss = false;        // requires gold fields on the item
  bool want_masks = false;
};

struct Prediction {
  Task task = Task::count;
  double count_raw = 0.0;
  int count_readable = 0;              // clamped nearest integer in [0,10]
  std::vector<double> scores;          // 5 candidate scores
  int pred_index = -1;                 // argmax, ties to lowest index
  std::vector<double> distribution;    // |V|
  int pred_word = -1;                  // argmax, ties to lowest index
};

struct ForwardResult {
  Prediction pred;
  NodeId loss = -1;
  std::vector<std::vector<double>> spatial_masks;   // T masks of G*G entries
  std::vector<std::vector<double>> temporal_masks;  // one per decode path
};

ForwardResult forward(Graph& g, const BoundParams& bp, const ModelConfig& cfg,
                      const QAItem& item, const VideoFeatures& feats,
                      const ForwardOptions& opt = {});

// convenience: fresh graph, bound params, inference
Prediction predict(const ModelParams& params, const QAItem& item, const VideoFeatures& feats);

// ---------------------------------------------------------------------------
// Sub-operations (exposed for tests and diagnostics)
// ---------------------------------------------------------------------------
struct VideoEncodeResult {
  std::vector<NodeId> states;  // H_v, combined per step
  DualState final_state;
  NodeId final_combined = -1;
  std::vector<std::vector<double>> spatial_masks;
};

// question_prepass: final combined state of the parameter-shared question
// pre-pass; required iff the variant uses spatial attention.
VideoEncodeResult encode_video(Graph& g, const BoundParams& bp, const ModelConfig& cfg,
                               const VideoFeatures& feats, NodeId question_prepass,
                               const DropoutCtx& drop);

struct SpatialAttendResult {
  NodeId attended = -1;  // (C)
  NodeId mask = -1;      // (G*G)
};
SpatialAttendResult spatial_attend(Graph& g, const AttnMlpIds& mlp, NodeId text_state,
                                   const Tensor& grid_matrix);

struct TextEncodeResult {
  NodeId question_state = -1;              // h_N^q combined
  DualState question_final;
  std::optional<NodeId> answer_state;      // h_M^a combined, when answer given
};
// Prepends <boa> to the answer; the answer encoder starts from the question
// encoder's final state.
TextEncodeResult encode_text(Graph& g, const BoundParams& bp, const ModelConfig& cfg,
                             const std::vector<std::string>& question,
                             const std::vector<std::string>* answer, DualState init,
                             const DropoutCtx& drop);

struct TemporalAttendResult {
  NodeId fused = -1;  // tanh(alpha Hv W_alpha) + query
  NodeId mask = -1;   // (T)
};
TemporalAttendResult temporal_attend(Graph& g, const BoundParams& bp, NodeId query,
                                     const std::vector<NodeId>& video_states);

NodeId decode_multichoice(Graph& g, const BoundParams& bp, NodeId answer_state);  // scalar score
NodeId decode_count(Graph& g, const BoundParams& bp, NodeId answer_state);        // scalar
NodeId decode_word(Graph& g, const BoundParams& bp, NodeId question_state);       // (|V|) distribution

int clamp_count(double raw);  // nearest integer clamped to [0,10]
int argmax_lowest(const std::vector<double>& xs);

}  // namespace stvqa
