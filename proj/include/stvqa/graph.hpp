#pragma once
// Define-by-run reverse-mode autodiff tape. A Graph is rebuilt per forward
// pass (sequence lengths vary per item); nodes are appended in execution
// order, which is already a topological order, and backward() walks the tape
// once in reverse. A Graph and its tensors are confined to one thread;
// distinct graphs may run in parallel with no shared mutable state.

#include <cstdint>
#include <span>
#include <vector>

#include "stvqa/tensor.hpp"

namespace stvqa {

enum class Prim : std::uint8_t {
  leaf,
  add,        // elementwise, same shape
  sub,        // elementwise, same shape
  mul,        // elementwise, same shape
  affine,     // alpha*x + beta
  matmul,     // (m,n)x(n,k)->(m,k), (m,n)x(n)->(m), (m)x(m,n)->(n)
  transpose,  // 2-d
  concat,     // along axis 0 or 1, rank <= 2
  stack,      // K vectors (n) -> (K,n)
  slice,      // 1-d [begin,end)
  slice_cols, // (m,n), columns [begin,end)
  take_row,   // (m,n), row r -> (n)
  add_row_bc, // (m,n) + broadcast row vector (n)
  tanh_fn,
  sigmoid_fn,
  relu_fn,
  log_fn,
  softmax_fn,  // last axis, max-subtracted
  sum_all,     // -> (1)
  mean_all,    // -> (1)
  layer_norm,  // (x, gain, bias), last axis, population variance
};

const char* prim_name(Prim p);

struct PrimAttrs {
  int axis = 0;
  int begin = 0;
  int end = 0;
  int row = 0;
  double alpha = 1.0;
  double beta = 0.0;
  double eps = 0.0;
};

using NodeId = std::int32_t;

struct Node {
  Prim prim = Prim::leaf;
  std::vector<NodeId> inputs;
  PrimAttrs attrs;
  Tensor out;
  bool needs_grad = false;
};

// Gradient table produced by Graph::backward, keyed by node id. Leaves with
// requires_grad that are unreachable from the root hold zeros.
class Gradients {
 public:
  explicit Gradients(std::size_t n) : grads_(n) {}
  const Tensor& at(NodeId id) const;
  bool has(NodeId id) const {
    const auto& g = grads_[static_cast<std::size_t>(id)];
    return !g.data.empty();
  }
  Tensor& slot(NodeId id) { return grads_[static_cast<std::size_t>(id)]; }

 private:
  std::vector<Tensor> grads_;
};

class Graph {
 public:
  // When set, every primitive output is checked for NaN/Inf and a
  // std::runtime_error naming the primitive is thrown on violation.
  bool check_finite = true;

  NodeId leaf(Tensor t);
  NodeId constant(Tensor t);  // leaf with requires_grad forced off

  NodeId apply(Prim op, std::span<const NodeId> inputs, const PrimAttrs& attrs = {});

  // named builders
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId affine(NodeId x, double alpha, double beta);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId x);
  NodeId concat(std::span<const NodeId> xs, int axis = 0);
  NodeId stack(std::span<const NodeId> xs);
  NodeId slice(NodeId x, int begin, int end);
  NodeId slice_cols(NodeId x, int begin, int end);
  NodeId take_row(NodeId m, int row);
  NodeId add_row_broadcast(NodeId m, NodeId v);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId relu(NodeId x);
  NodeId log(NodeId x);
  NodeId softmax(NodeId x);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].out; }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar root. Pure: may be called repeatedly on
  // the same graph. Every node is visited exactly once, in reverse tape order.
  Gradients backward(NodeId root) const;

 private:
  NodeId push(Node n);
  std::vector<Node> nodes_;
};

}  // namespace stvqa
