#pragma once
// Neural layers assembled from graph primitives: layer-normalized LSTM cells,
// dual-layer encoders with state hand-off, the attention-scoring MLP,
// embeddings and inverted dropout. Parameters live in a ParamSet (declaration
// order defines checkpoint order) and are bound into each fresh graph.

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stvqa/graph.hpp"
#include "stvqa/rng.hpp"

namespace stvqa {

struct Param {
  std::string name;
  Tensor value;
};

class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t pos(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::size_t total_scalars() const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One graph's view of a ParamSet: parameter index -> leaf node.
struct BoundParams {
  const ParamSet* set = nullptr;
  std::vector<NodeId> ids;
  NodeId id(const std::string& name) const;
};

BoundParams bind_params(Graph& g, const ParamSet& ps);

// ---------------------------------------------------------------------------
// Initialization (LSTM weights uniform, forget-gate bias constant, everything
// else normal; ranges fixed here since the reference ranges are unspecified).
// ---------------------------------------------------------------------------
struct InitHyper {
  double lstm_uniform_range = 0.08;
  double forget_gate_bias = 1.0;
  double normal_stddev = 0.01;
};

// ---------------------------------------------------------------------------
// Layer-normalized LSTM cell
// ---------------------------------------------------------------------------
struct LstmState {
  NodeId h = -1;
  NodeId c = -1;
};

struct LstmCellIds {
  NodeId w_x, w_h, b;          // (4H,in) (4H,H) (4H); gate order i,f,g,o
  NodeId ln_gain[4], ln_bias[4];
  NodeId ln_c_gain, ln_c_bias;
  int hidden = 0;
};

// Registers w_x/w_h/b plus layer-norm gains/biases under `prefix.`.
void add_lstm_params(ParamSet& ps, const std::string& prefix, int input_dim, int hidden,
                     Rng& rng, const InitHyper& hyper = {});
LstmCellIds bind_lstm_cell(const BoundParams& bp, const std::string& prefix, int hidden);

// Gate pre-activations are layer-normalized per block; the cell state is
// normalized before the output tanh.
LstmState lstm_step(Graph& g, NodeId x, LstmState prev, const LstmCellIds& cell, double ln_eps);

LstmState zero_lstm_state(Graph& g, int hidden);

// ---------------------------------------------------------------------------
// Dual-layer encoder
// ---------------------------------------------------------------------------
struct DualLstmIds {
  LstmCellIds l1, l2;
};
struct DualState {
  LstmState s1, s2;
};

DualState zero_dual_state(Graph& g, int hidden);

struct DropoutCtx {
  double rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;
};

struct EncodeResult {
  std::vector<NodeId> combined;  // per-step [h1;h2], each 2H
  NodeId final_combined = -1;    // == combined.back()
  DualState final_state;         // raw recurrent state for hand-off
};

// Dropout is applied to each layer's output h where it feeds the next layer
// and the combined state, never on the recurrent path.
EncodeResult dual_lstm_encode(Graph& g, std::span<const NodeId> xs, DualState init,
                              const DualLstmIds& cells, double ln_eps,
                              const DropoutCtx& drop = {});

// ---------------------------------------------------------------------------
// Attention-scoring MLP: softmax_k( w2 . tanh(W1 [query;key_k] + b1) )
// ---------------------------------------------------------------------------
struct AttnMlpIds {
  NodeId w1, b1, w2;  // (A, qdim+kdim) (A) (1, A)
};

void add_attn_mlp_params(ParamSet& ps, const std::string& prefix, int in_dim, int hidden,
                         Rng& rng, const InitHyper& hyper = {});
AttnMlpIds bind_attn_mlp(const BoundParams& bp, const std::string& prefix);

NodeId mlp_attention_scores(Graph& g, NodeId query, std::span<const NodeId> keys,
                            const AttnMlpIds& mlp);  // -> (K) weights

// ---------------------------------------------------------------------------
// Inverted dropout: identity at inference and at rate 0.
// ---------------------------------------------------------------------------
NodeId dropout(Graph& g, NodeId x, double rate, bool training, Rng& rng);
NodeId dropout(Graph& g, NodeId x, const DropoutCtx& ctx);

// ---------------------------------------------------------------------------
// Embedding import (one token per line: "token v1 ... vE").
// ---------------------------------------------------------------------------
struct LoadedEmbeddings {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> rows;
};
LoadedEmbeddings load_text_embeddings(const std::string& path);

}  // namespace stvqa
