#include "stvqa/layers.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stvqa {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter '" + name + "'");
  t.requires_grad = true;
  index_[name] = params_.size();
  params_.push_back(Param{name, std::move(t)});
  return params_.back().value;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return params_[it->second].value;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return params_[it->second].value;
}

std::size_t ParamSet::pos(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::total_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

NodeId BoundParams::id(const std::string& name) const {
  return ids[set->pos(name)];
}

BoundParams bind_params(Graph& g, const ParamSet& ps) {
  BoundParams bp;
  bp.set = &ps;
  bp.ids.reserve(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) bp.ids.push_back(g.leaf(ps[i].value));
  return bp;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

void add_lstm_params(ParamSet& ps, const std::string& prefix, int input_dim, int hidden,
                     Rng& rng, const InitHyper& hyper) {
  const double r = hyper.lstm_uniform_range;
  ps.add(prefix + ".w_x", Tensor::uniform({4 * hidden, input_dim}, -r, r, rng));
  ps.add(prefix + ".w_h", Tensor::uniform({4 * hidden, hidden}, -r, r, rng));
  ps.add(prefix + ".b", Tensor({4 * hidden}));
  static const char* kGate[4] = {"i", "f", "g", "o"};
  for (int k = 0; k < 4; ++k) {
    ps.add(prefix + ".ln_" + kGate[k] + "_gain", Tensor::filled({hidden}, 1.0));
    // block layer norm absorbs constant shifts of the pre-activation, so the
    // forget-gate bias has to live on the normalization bias to take effect
    ps.add(prefix + ".ln_" + kGate[k] + "_bias",
           Tensor::filled({hidden}, k == 1 ? hyper.forget_gate_bias : 0.0));
  }
  ps.add(prefix + ".ln_c_gain", Tensor::filled({hidden}, 1.0));
  ps.add(prefix + ".ln_c_bias", Tensor({hidden}));
}

LstmCellIds bind_lstm_cell(const BoundParams& bp, const std::string& prefix, int hidden) {
  LstmCellIds c;
  c.hidden = hidden;
  c.w_x = bp.id(prefix + ".w_x");
  c.w_h = bp.id(prefix + ".w_h");
  c.b = bp.id(prefix + ".b");
  static const char* kGate[4] = {"i", "f", "g", "o"};
  for (int k = 0; k < 4; ++k) {
    c.ln_gain[k] = bp.id(prefix + ".ln_" + kGate[k] + "_gain");
    c.ln_bias[k] = bp.id(prefix + ".ln_" + kGate[k] + "_bias");
  }
  c.ln_c_gain = bp.id(prefix + ".ln_c_gain");
  c.ln_c_bias = bp.id(prefix + ".ln_c_bias");
  return c;
}

LstmState zero_lstm_state(Graph& g, int hidden) {
  return LstmState{g.constant(Tensor({hidden})), g.constant(Tensor({hidden}))};
}

LstmState lstm_step(Graph& g, NodeId x, LstmState prev, const LstmCellIds& cell, double ln_eps) {
  const int H = cell.hidden;
  const NodeId z =
      g.add(g.add(g.matmul(cell.w_x, x), g.matmul(cell.w_h, prev.h)), cell.b);
  auto gate_block = [&](int k) {
    return g.layer_norm(g.slice(z, k * H, (k + 1) * H), cell.ln_gain[k], cell.ln_bias[k], ln_eps);
  };
  const NodeId gi = g.sigmoid(gate_block(0));
  const NodeId gf = g.sigmoid(gate_block(1));
  const NodeId gg = g.tanh(gate_block(2));
  const NodeId go = g.sigmoid(gate_block(3));
  const NodeId c_new = g.add(g.mul(gf, prev.c), g.mul(gi, gg));
  const NodeId h_new =
      g.mul(go, g.tanh(g.layer_norm(c_new, cell.ln_c_gain, cell.ln_c_bias, ln_eps)));
  return LstmState{h_new, c_new};
}

// ---------------------------------------------------------------------------
// Dual-layer encoder
// ---------------------------------------------------------------------------

DualState zero_dual_state(Graph& g, int hidden) {
  return DualState{zero_lstm_state(g, hidden), zero_lstm_state(g, hidden)};
}

EncodeResult dual_lstm_encode(Graph& g, std::span<const NodeId> xs, DualState init,
                              const DualLstmIds& cells, double ln_eps, const DropoutCtx& drop) {
  if (xs.empty()) throw std::invalid_argument("dual_lstm_encode: empty input sequence");
  EncodeResult out;
  out.combined.reserve(xs.size());
  DualState s = init;
  for (NodeId x : xs) {
    s.s1 = lstm_step(g, x, s.s1, cells.l1, ln_eps);
    const NodeId h1 = dropout(g, s.s1.h, drop);
    s.s2 = lstm_step(g, h1, s.s2, cells.l2, ln_eps);
    const NodeId h2 = dropout(g, s.s2.h, drop);
    const NodeId both[]{h1, h2};
    out.combined.push_back(g.concat(both, 0));
  }
  out.final_combined = out.combined.back();
  out.final_state = s;
  return out;
}

// ---------------------------------------------------------------------------
// Attention MLP
// ---------------------------------------------------------------------------

void add_attn_mlp_params(ParamSet& ps, const std::string& prefix, int in_dim, int hidden,
                         Rng& rng, const InitHyper& hyper) {
  ps.add(prefix + ".w1", Tensor::normal({hidden, in_dim}, 0.0, hyper.normal_stddev, rng));
  ps.add(prefix + ".b1", Tensor({hidden}));
  ps.add(prefix + ".w2", Tensor::normal({1, hidden}, 0.0, hyper.normal_stddev, rng));
}

AttnMlpIds bind_attn_mlp(const BoundParams& bp, const std::string& prefix) {
  return AttnMlpIds{bp.id(prefix + ".w1"), bp.id(prefix + ".b1"), bp.id(prefix + ".w2")};
}

NodeId mlp_attention_scores(Graph& g, NodeId query, std::span<const NodeId> keys,
                            const AttnMlpIds& mlp) {
  if (keys.empty()) throw std::invalid_argument("mlp_attention_scores: no keys");
  // W1 [q;k] = W1q q + W1k k, evaluated in matrix form over all keys at once
  const int qd = static_cast<int>(g.value(query).numel());
  const int in_dim = g.value(mlp.w1).dim(1);
  const NodeId hq = g.add(g.matmul(g.slice_cols(mlp.w1, 0, qd), query), mlp.b1);      // (A)
  const NodeId kmat = g.stack(keys);                                                  // (K, kd)
  const NodeId kh = g.matmul(kmat, g.transpose(g.slice_cols(mlp.w1, qd, in_dim)));    // (K, A)
  const NodeId hidden = g.tanh(g.add_row_broadcast(kh, hq));
  const NodeId scores = g.matmul(hidden, g.take_row(mlp.w2, 0));                      // (K)
  return g.softmax(scores);
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

NodeId dropout(Graph& g, NodeId x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(g.value(x).shape);
  for (auto& v : mask.data) v = rng.uniform() < rate ? 0.0 : scale;
  return g.mul(x, g.constant(std::move(mask)));
}

NodeId dropout(Graph& g, NodeId x, const DropoutCtx& ctx) {
  if (!ctx.training || ctx.rate == 0.0) {
    if (ctx.rate < 0.0 || ctx.rate >= 1.0)
      throw std::invalid_argument("dropout rate must be in [0,1), got " + std::to_string(ctx.rate));
    return x;
  }
  if (ctx.rng == nullptr) throw std::logic_error("training dropout needs an rng");
  return dropout(g, x, ctx.rate, true, *ctx.rng);
}

// ---------------------------------------------------------------------------
// Embedding import
// ---------------------------------------------------------------------------

LoadedEmbeddings load_text_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  LoadedEmbeddings out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> vec;
    double v;
    while (ss >> v) vec.push_back(v);
    if (vec.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": no vector values");
    if (out.dim == 0) out.dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != out.dim)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": dimension mismatch");
    out.rows[token] = std::move(vec);
  }
  return out;
}

}  // namespace stvqa
