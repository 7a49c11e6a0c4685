#include "stvqa/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "stvqa/kernels.hpp"

namespace stvqa {

const char* prim_name(Prim p) {
  switch (p) {
    case Prim::leaf: return "leaf";
    case Prim::add: return "add";
    case Prim::sub: return "sub";
    case Prim::mul: return "mul";
    case Prim::affine: return "affine";
    case Prim::matmul: return "matmul";
    case Prim::transpose: return "transpose";
    case Prim::concat: return "concat";
    case Prim::stack: return "stack";
    case Prim::slice: return "slice";
    case Prim::slice_cols: return "slice_cols";
    case Prim::take_row: return "take_row";
    case Prim::add_row_bc: return "add_row_broadcast";
    case Prim::tanh_fn: return "tanh";
    case Prim::sigmoid_fn: return "sigmoid";
    case Prim::relu_fn: return "relu";
    case Prim::log_fn: return "log";
    case Prim::softmax_fn: return "softmax";
    case Prim::sum_all: return "sum";
    case Prim::mean_all: return "mean";
    case Prim::layer_norm: return "layer_norm";
  }
  return "?";
}

namespace {

[[noreturn]] void fail_shapes(Prim p, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string("shape mismatch in '") + prim_name(p) + "': " +
                              shape_str(a.shape) + " vs " + shape_str(b.shape));
}

[[noreturn]] void fail(Prim p, const std::string& msg) {
  throw std::invalid_argument(std::string("invalid '") + prim_name(p) + "': " + msg);
}

// rows/cols view: rank-1 tensors are one row
std::size_t rows_of(const Tensor& t) { return t.rank() == 2 ? static_cast<std::size_t>(t.dim(0)) : 1; }
std::size_t cols_of(const Tensor& t) {
  return static_cast<std::size_t>(t.rank() == 2 ? t.dim(1) : t.dim(0));
}

}  // namespace

const Tensor& Gradients::at(NodeId id) const {
  const auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.data.empty())
    throw std::logic_error("no gradient recorded for node " + std::to_string(id));
  return g;
}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor t) {
  Node n;
  n.prim = Prim::leaf;
  n.needs_grad = t.requires_grad;
  n.out = std::move(t);
  return push(std::move(n));
}

NodeId Graph::constant(Tensor t) {
  t.requires_grad = false;
  return leaf(std::move(t));
}

NodeId Graph::apply(Prim op, std::span<const NodeId> inputs, const PrimAttrs& attrs) {
  Node n;
  n.prim = op;
  n.attrs = attrs;
  n.inputs.assign(inputs.begin(), inputs.end());
  for (NodeId id : n.inputs) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      fail(op, "input node id out of range");
    n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(id)].needs_grad;
  }

  auto in = [&](std::size_t i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.inputs[i])].out;
  };
  auto want_inputs = [&](std::size_t k) {
    if (n.inputs.size() != k)
      fail(op, "expected " + std::to_string(k) + " inputs, got " + std::to_string(n.inputs.size()));
  };

  switch (op) {
    case Prim::leaf:
      fail(op, "leaf cannot be applied");

    case Prim::add:
    case Prim::sub:
    case Prim::mul: {
      want_inputs(2);
      const Tensor &a = in(0), &b = in(1);
      if (!a.same_shape(b)) fail_shapes(op, a, b);
      n.out = Tensor(a.shape);
      if (op == Prim::add) kern::add(a.data.data(), b.data.data(), n.out.data.data(), a.numel());
      else if (op == Prim::sub) kern::sub(a.data.data(), b.data.data(), n.out.data.data(), a.numel());
      else kern::mul(a.data.data(), b.data.data(), n.out.data.data(), a.numel());
      break;
    }

    case Prim::affine: {
      want_inputs(1);
      const Tensor& x = in(0);
      n.out = Tensor(x.shape);
      kern::affine(x.data.data(), attrs.alpha, attrs.beta, n.out.data.data(), x.numel());
      break;
    }

    case Prim::matmul: {
      want_inputs(2);
      const Tensor &a = in(0), &b = in(1);
      if (a.rank() == 2 && b.rank() == 2) {
        if (a.dim(1) != b.dim(0)) fail_shapes(op, a, b);
        n.out = Tensor({a.dim(0), b.dim(1)});
        kern::matmul(a.data.data(), b.data.data(), n.out.data.data(),
                     static_cast<std::size_t>(a.dim(0)), static_cast<std::size_t>(a.dim(1)),
                     static_cast<std::size_t>(b.dim(1)));
      } else if (a.rank() == 2 && b.rank() == 1) {
        if (a.dim(1) != b.dim(0)) fail_shapes(op, a, b);
        n.out = Tensor({a.dim(0)});
        kern::matvec(a.data.data(), b.data.data(), n.out.data.data(),
                     static_cast<std::size_t>(a.dim(0)), static_cast<std::size_t>(a.dim(1)));
      } else if (a.rank() == 1 && b.rank() == 2) {
        if (a.dim(0) != b.dim(0)) fail_shapes(op, a, b);
        n.out = Tensor({b.dim(1)});
        kern::vecmat(a.data.data(), b.data.data(), n.out.data.data(),
                     static_cast<std::size_t>(b.dim(0)), static_cast<std::size_t>(b.dim(1)));
      } else {
        fail_shapes(op, a, b);
      }
      break;
    }

    case Prim::transpose: {
      want_inputs(1);
      const Tensor& x = in(0);
      if (x.rank() != 2) fail(op, "needs a rank-2 input, got " + shape_str(x.shape));
      const int m = x.dim(0), k = x.dim(1);
      n.out = Tensor({k, m});
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
          n.out.data[static_cast<std::size_t>(j) * m + i] = x.data[static_cast<std::size_t>(i) * k + j];
      break;
    }

    case Prim::concat: {
      if (n.inputs.empty()) fail(op, "needs at least one input");
      const int rank = in(0).rank();
      if (attrs.axis < 0 || attrs.axis >= rank) fail(op, "axis out of range");
      for (std::size_t i = 1; i < n.inputs.size(); ++i)
        if (in(i).rank() != rank) fail_shapes(op, in(0), in(i));
      if (rank == 1) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) total += in(i).numel();
        n.out = Tensor({static_cast<int>(total)});
        std::size_t off = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const Tensor& t = in(i);
          std::copy(t.data.begin(), t.data.end(), n.out.data.begin() + static_cast<std::ptrdiff_t>(off));
          off += t.numel();
        }
      } else if (attrs.axis == 0) {
        const int cols = in(0).dim(1);
        int rows = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          if (in(i).dim(1) != cols) fail_shapes(op, in(0), in(i));
          rows += in(i).dim(0);
        }
        n.out = Tensor({rows, cols});
        std::size_t off = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const Tensor& t = in(i);
          std::copy(t.data.begin(), t.data.end(), n.out.data.begin() + static_cast<std::ptrdiff_t>(off));
          off += t.numel();
        }
      } else {
        const int rows = in(0).dim(0);
        int cols = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          if (in(i).dim(0) != rows) fail_shapes(op, in(0), in(i));
          cols += in(i).dim(1);
        }
        n.out = Tensor({rows, cols});
        for (int r = 0; r < rows; ++r) {
          std::size_t off = 0;
          for (std::size_t i = 0; i < n.inputs.size(); ++i) {
            const Tensor& t = in(i);
            const auto w = static_cast<std::size_t>(t.dim(1));
            std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(r * w),
                      t.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * w),
                      n.out.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * cols + off));
            off += w;
          }
        }
      }
      break;
    }

    case Prim::stack: {
      if (n.inputs.empty()) fail(op, "needs at least one input");
      const Tensor& first = in(0);
      if (first.rank() != 1) fail(op, "stacks rank-1 inputs, got " + shape_str(first.shape));
      const int cols = first.dim(0);
      for (std::size_t i = 1; i < n.inputs.size(); ++i)
        if (in(i).rank() != 1 || in(i).dim(0) != cols) fail_shapes(op, first, in(i));
      n.out = Tensor({static_cast<int>(n.inputs.size()), cols});
      for (std::size_t i = 0; i < n.inputs.size(); ++i)
        std::copy(in(i).data.begin(), in(i).data.end(),
                  n.out.data.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(cols)));
      break;
    }

    case Prim::slice: {
      want_inputs(1);
      const Tensor& x = in(0);
      if (x.rank() != 1) fail(op, "slices rank-1 tensors, got " + shape_str(x.shape));
      if (attrs.begin < 0 || attrs.end > x.dim(0) || attrs.begin >= attrs.end)
        fail(op, "range [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                     ") invalid for " + shape_str(x.shape));
      n.out = Tensor({attrs.end - attrs.begin});
      std::copy(x.data.begin() + attrs.begin, x.data.begin() + attrs.end, n.out.data.begin());
      break;
    }

    case Prim::slice_cols: {
      want_inputs(1);
      const Tensor& x = in(0);
      if (x.rank() != 2) fail(op, "needs a rank-2 input, got " + shape_str(x.shape));
      if (attrs.begin < 0 || attrs.end > x.dim(1) || attrs.begin >= attrs.end)
        fail(op, "column range [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                     ") invalid for " + shape_str(x.shape));
      const int rows = x.dim(0), cols = x.dim(1), w = attrs.end - attrs.begin;
      n.out = Tensor({rows, w});
      for (int r = 0; r < rows; ++r)
        std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(r) * cols + attrs.begin,
                  x.data.begin() + static_cast<std::ptrdiff_t>(r) * cols + attrs.end,
                  n.out.data.begin() + static_cast<std::ptrdiff_t>(r) * w);
      break;
    }

    case Prim::add_row_bc: {
      want_inputs(2);
      const Tensor &m = in(0), &v = in(1);
      if (m.rank() != 2 || v.rank() != 1 || v.dim(0) != m.dim(1)) fail_shapes(op, m, v);
      n.out = Tensor(m.shape);
      const auto cols = static_cast<std::size_t>(m.dim(1));
      for (int r = 0; r < m.dim(0); ++r)
        kern::add(m.data.data() + static_cast<std::size_t>(r) * cols, v.data.data(),
                  n.out.data.data() + static_cast<std::size_t>(r) * cols, cols);
      break;
    }

    case Prim::take_row: {
      want_inputs(1);
      const Tensor& x = in(0);
      if (x.rank() != 2) fail(op, "needs a rank-2 input, got " + shape_str(x.shape));
      if (attrs.row < 0 || attrs.row >= x.dim(0))
        fail(op, "row " + std::to_string(attrs.row) + " out of range for " + shape_str(x.shape));
      const auto w = static_cast<std::size_t>(x.dim(1));
      n.out = Tensor({x.dim(1)});
      std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(attrs.row) * w),
                x.data.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(attrs.row) + 1) * w),
                n.out.data.begin());
      break;
    }

    case Prim::tanh_fn:
    case Prim::sigmoid_fn: {
      want_inputs(1);
      const Tensor& x = in(0);
      n.out = Tensor(x.shape);
      if (op == Prim::tanh_fn) kern::vtanh(x.data.data(), n.out.data.data(), x.numel());
      else kern::vsigmoid(x.data.data(), n.out.data.data(), x.numel());
      break;
    }

    case Prim::relu_fn: {
      want_inputs(1);
      const Tensor& x = in(0);
      n.out = Tensor(x.shape);
      for (std::size_t i = 0; i < x.numel(); ++i) n.out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
      break;
    }

    case Prim::log_fn: {
      want_inputs(1);
      const Tensor& x = in(0);
      n.out = Tensor(x.shape);
      kern::vlog(x.data.data(), n.out.data.data(), x.numel());
      break;
    }

    case Prim::softmax_fn: {
      want_inputs(1);
      const Tensor& x = in(0);
      if (x.rank() < 1 || x.rank() > 2) fail(op, "needs rank 1 or 2, got " + shape_str(x.shape));
      n.out = Tensor(x.shape);
      const std::size_t rows = rows_of(x), cols = cols_of(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * cols;
        double* yr = n.out.data.data() + r * cols;
        const double m = kern::vmax(xr, cols);
        kern::affine(xr, 1.0, -m, yr, cols);
        kern::vexp(yr, yr, cols);
        const double z = kern::sum(yr, cols);
        kern::affine(yr, 1.0 / z, 0.0, yr, cols);
      }
      break;
    }

    case Prim::sum_all:
    case Prim::mean_all: {
      want_inputs(1);
      const Tensor& x = in(0);
      double s = kern::sum(x.data.data(), x.numel());
      if (op == Prim::mean_all) s /= static_cast<double>(x.numel());
      n.out = Tensor::scalar(s);
      break;
    }

    case Prim::layer_norm: {
      want_inputs(3);
      const Tensor &x = in(0), &gain = in(1), &bias = in(2);
      const std::size_t rows = rows_of(x), cols = cols_of(x);
      if (cols == 0) fail(op, "zero-length normalization axis");
      if (gain.rank() != 1 || cols_of(gain) != cols) fail_shapes(op, x, gain);
      if (bias.rank() != 1 || cols_of(bias) != cols) fail_shapes(op, x, bias);
      n.out = Tensor(x.shape);
      const double inv_n = 1.0 / static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * cols;
        double* yr = n.out.data.data() + r * cols;
        const double mu = kern::sum(xr, cols) * inv_n;
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          const double d = xr[j] - mu;
          var += d * d;
        }
        var *= inv_n;
        const double inv_s = 1.0 / std::sqrt(var + attrs.eps);
        for (std::size_t j = 0; j < cols; ++j)
          yr[j] = gain.data[j] * ((xr[j] - mu) * inv_s) + bias.data[j];
      }
      break;
    }
  }

  if (check_finite && !kern::all_finite(n.out.data.data(), n.out.numel()))
    throw std::runtime_error(std::string("non-finite value produced by '") + prim_name(op) + "'");

  return push(std::move(n));
}

// --- named builders ---------------------------------------------------------

NodeId Graph::add(NodeId a, NodeId b) { const NodeId in[]{a, b}; return apply(Prim::add, in); }
NodeId Graph::sub(NodeId a, NodeId b) { const NodeId in[]{a, b}; return apply(Prim::sub, in); }
NodeId Graph::mul(NodeId a, NodeId b) { const NodeId in[]{a, b}; return apply(Prim::mul, in); }
NodeId Graph::affine(NodeId x, double alpha, double beta) {
  PrimAttrs at; at.alpha = alpha; at.beta = beta;
  const NodeId in[]{x};
  return apply(Prim::affine, in, at);
}
NodeId Graph::matmul(NodeId a, NodeId b) { const NodeId in[]{a, b}; return apply(Prim::matmul, in); }
NodeId Graph::transpose(NodeId x) { const NodeId in[]{x}; return apply(Prim::transpose, in); }
NodeId Graph::concat(std::span<const NodeId> xs, int axis) {
  PrimAttrs at; at.axis = axis;
  return apply(Prim::concat, xs, at);
}
NodeId Graph::stack(std::span<const NodeId> xs) { return apply(Prim::stack, xs); }
NodeId Graph::slice(NodeId x, int begin, int end) {
  PrimAttrs at; at.begin = begin; at.end = end;
  const NodeId in[]{x};
  return apply(Prim::slice, in, at);
}
NodeId Graph::slice_cols(NodeId x, int begin, int end) {
  PrimAttrs at; at.begin = begin; at.end = end;
  const NodeId in[]{x};
  return apply(Prim::slice_cols, in, at);
}
NodeId Graph::add_row_broadcast(NodeId m, NodeId v) {
  const NodeId in[]{m, v};
  return apply(Prim::add_row_bc, in);
}
NodeId Graph::take_row(NodeId m, int row) {
  PrimAttrs at; at.row = row;
  const NodeId in[]{m};
  return apply(Prim::take_row, in, at);
}
NodeId Graph::tanh(NodeId x) { const NodeId in[]{x}; return apply(Prim::tanh_fn, in); }
NodeId Graph::sigmoid(NodeId x) { const NodeId in[]{x}; return apply(Prim::sigmoid_fn, in); }
NodeId Graph::relu(NodeId x) { const NodeId in[]{x}; return apply(Prim::relu_fn, in); }
NodeId Graph::log(NodeId x) { const NodeId in[]{x}; return apply(Prim::log_fn, in); }
NodeId Graph::softmax(NodeId x) { const NodeId in[]{x}; return apply(Prim::softmax_fn, in); }
NodeId Graph::sum(NodeId x) { const NodeId in[]{x}; return apply(Prim::sum_all, in); }
NodeId Graph::mean(NodeId x) { const NodeId in[]{x}; return apply(Prim::mean_all, in); }
NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  PrimAttrs at; at.eps = eps;
  const NodeId in[]{x, gain, bias};
  return apply(Prim::layer_norm, in, at);
}

// --- backward ----------------------------------------------------------------

Gradients Graph::backward(NodeId root) const {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size())
    throw std::invalid_argument("backward: root node id out of range");
  const Node& rn = nodes_[static_cast<std::size_t>(root)];
  if (!rn.out.is_scalar())
    throw std::invalid_argument("backward: root must be a scalar, got shape " + shape_str(rn.out.shape));

  Gradients table(nodes_.size());

  auto acc = [&](NodeId id, const Tensor& shape_like) -> Tensor& {
    Tensor& slot = table.slot(id);
    if (slot.data.empty()) slot = Tensor(shape_like.shape);
    return slot;
  };

  if (rn.needs_grad) acc(root, rn.out).data[0] = 1.0;

  for (NodeId id = root; id >= 0; --id) {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (nd.prim == Prim::leaf || !nd.needs_grad || !table.has(id)) continue;
    const Tensor& g = table.at(id);
    const Tensor& y = nd.out;

    auto input = [&](std::size_t i) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(nd.inputs[i])].out;
    };
    auto wants = [&](std::size_t i) {
      return nodes_[static_cast<std::size_t>(nd.inputs[i])].needs_grad;
    };

    switch (nd.prim) {
      case Prim::leaf:
        break;

      case Prim::add: {
        if (wants(0)) kern::axpy(1.0, g.data.data(), acc(nd.inputs[0], input(0)).data.data(), g.numel());
        if (wants(1)) kern::axpy(1.0, g.data.data(), acc(nd.inputs[1], input(1)).data.data(), g.numel());
        break;
      }
      case Prim::sub: {
        if (wants(0)) kern::axpy(1.0, g.data.data(), acc(nd.inputs[0], input(0)).data.data(), g.numel());
        if (wants(1)) kern::axpy(-1.0, g.data.data(), acc(nd.inputs[1], input(1)).data.data(), g.numel());
        break;
      }
      case Prim::mul: {
        const Tensor &a = input(0), &b = input(1);
        if (wants(0)) {
          Tensor& ga = acc(nd.inputs[0], a);
          for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * b.data[i];
        }
        if (wants(1)) {
          Tensor& gb = acc(nd.inputs[1], b);
          for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Prim::affine: {
        if (wants(0)) kern::axpy(nd.attrs.alpha, g.data.data(), acc(nd.inputs[0], input(0)).data.data(), g.numel());
        break;
      }
      case Prim::matmul: {
        const Tensor &a = input(0), &b = input(1);
        if (a.rank() == 2 && b.rank() == 2) {
          const auto m = static_cast<std::size_t>(a.dim(0));
          const auto nmid = static_cast<std::size_t>(a.dim(1));
          const auto k = static_cast<std::size_t>(b.dim(1));
          if (wants(0)) {  // gA += G B^T
            Tensor& ga = acc(nd.inputs[0], a);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t p = 0; p < nmid; ++p)
                ga.data[i * nmid + p] += kern::dot(g.data.data() + i * k, b.data.data() + p * k, k);
          }
          if (wants(1)) {  // gB += A^T G
            Tensor& gb = acc(nd.inputs[1], b);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t p = 0; p < nmid; ++p)
                kern::axpy(a.data[i * nmid + p], g.data.data() + i * k, gb.data.data() + p * k, k);
          }
        } else if (a.rank() == 2 && b.rank() == 1) {
          const auto m = static_cast<std::size_t>(a.dim(0));
          const auto nn = static_cast<std::size_t>(a.dim(1));
          if (wants(0)) kern::outer_acc(g.data.data(), b.data.data(), acc(nd.inputs[0], a).data.data(), m, nn);
          if (wants(1)) {  // gx += A^T g
            Tensor& gb = acc(nd.inputs[1], b);
            for (std::size_t i = 0; i < m; ++i)
              kern::axpy(g.data[i], a.data.data() + i * nn, gb.data.data(), nn);
          }
        } else {  // vec x mat
          const auto m = static_cast<std::size_t>(b.dim(0));
          const auto nn = static_cast<std::size_t>(b.dim(1));
          if (wants(0)) {  // gx += B g
            Tensor& ga = acc(nd.inputs[0], a);
            for (std::size_t i = 0; i < m; ++i)
              ga.data[i] += kern::dot(b.data.data() + i * nn, g.data.data(), nn);
          }
          if (wants(1)) kern::outer_acc(a.data.data(), g.data.data(), acc(nd.inputs[1], b).data.data(), m, nn);
        }
        break;
      }
      case Prim::transpose: {
        if (wants(0)) {
          const Tensor& x = input(0);
          Tensor& gx = acc(nd.inputs[0], x);
          const int m = x.dim(0), k = x.dim(1);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < k; ++j)
              gx.data[static_cast<std::size_t>(i) * k + j] += g.data[static_cast<std::size_t>(j) * m + i];
        }
        break;
      }
      case Prim::concat: {
        const int rank = input(0).rank();
        if (rank == 1 || nd.attrs.axis == 0) {
          std::size_t off = 0;
          for (std::size_t i = 0; i < nd.inputs.size(); ++i) {
            const Tensor& t = input(i);
            if (wants(i))
              kern::axpy(1.0, g.data.data() + off, acc(nd.inputs[i], t).data.data(), t.numel());
            off += t.numel();
          }
        } else {
          const auto rows = static_cast<std::size_t>(y.dim(0));
          const auto ycols = static_cast<std::size_t>(y.dim(1));
          std::size_t off = 0;
          for (std::size_t i = 0; i < nd.inputs.size(); ++i) {
            const Tensor& t = input(i);
            const auto w = static_cast<std::size_t>(t.dim(1));
            if (wants(i)) {
              Tensor& gt = acc(nd.inputs[i], t);
              for (std::size_t r = 0; r < rows; ++r)
                kern::axpy(1.0, g.data.data() + r * ycols + off, gt.data.data() + r * w, w);
            }
            off += w;
          }
        }
        break;
      }
      case Prim::stack: {
        const auto cols = static_cast<std::size_t>(y.dim(1));
        for (std::size_t i = 0; i < nd.inputs.size(); ++i)
          if (wants(i))
            kern::axpy(1.0, g.data.data() + i * cols, acc(nd.inputs[i], input(i)).data.data(), cols);
        break;
      }
      case Prim::slice: {
        if (wants(0)) {
          Tensor& gx = acc(nd.inputs[0], input(0));
          kern::axpy(1.0, g.data.data(), gx.data.data() + nd.attrs.begin, g.numel());
        }
        break;
      }
      case Prim::take_row: {
        if (wants(0)) {
          const Tensor& x = input(0);
          Tensor& gx = acc(nd.inputs[0], x);
          const auto w = static_cast<std::size_t>(x.dim(1));
          kern::axpy(1.0, g.data.data(), gx.data.data() + static_cast<std::size_t>(nd.attrs.row) * w, w);
        }
        break;
      }
      case Prim::slice_cols: {
        if (wants(0)) {
          const Tensor& x = input(0);
          Tensor& gx = acc(nd.inputs[0], x);
          const int cols = x.dim(1), w = nd.attrs.end - nd.attrs.begin;
          for (int r = 0; r < x.dim(0); ++r)
            kern::axpy(1.0, g.data.data() + static_cast<std::ptrdiff_t>(r) * w,
                       gx.data.data() + static_cast<std::ptrdiff_t>(r) * cols + nd.attrs.begin,
                       static_cast<std::size_t>(w));
        }
        break;
      }
      case Prim::add_row_bc: {
        const Tensor& m = input(0);
        const auto cols = static_cast<std::size_t>(m.dim(1));
        if (wants(0)) kern::axpy(1.0, g.data.data(), acc(nd.inputs[0], m).data.data(), g.numel());
        if (wants(1)) {
          Tensor& gv = acc(nd.inputs[1], input(1));
          for (int r = 0; r < m.dim(0); ++r)
            kern::axpy(1.0, g.data.data() + static_cast<std::size_t>(r) * cols, gv.data.data(), cols);
        }
        break;
      }
      case Prim::tanh_fn: {
        if (wants(0)) {
          Tensor& gx = acc(nd.inputs[0], input(0));
          for (std::size_t i = 0; i < g.numel(); ++i)
            gx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
        }
        break;
      }
      case Prim::sigmoid_fn: {
        if (wants(0)) {
          Tensor& gx = acc(nd.inputs[0], input(0));
          for (std::size_t i = 0; i < g.numel(); ++i)
            gx.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
        break;
      }
      case Prim::relu_fn: {
        if (wants(0)) {
          const Tensor& x = input(0);
          Tensor& gx = acc(nd.inputs[0], x);
          for (std::size_t i = 0; i < g.numel(); ++i)
            if (x.data[i] > 0.0) gx.data[i] += g.data[i];
        }
        break;
      }
      case Prim::log_fn: {
        if (wants(0)) {
          const Tensor& x = input(0);
          Tensor& gx = acc(nd.inputs[0], x);
          for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i] / x.data[i];
        }
        break;
      }
      case Prim::softmax_fn: {
        if (wants(0)) {
          Tensor& gx = acc(nd.inputs[0], input(0));
          const std::size_t rows = rows_of(y), cols = cols_of(y);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = y.data.data() + r * cols;
            const double* gr = g.data.data() + r * cols;
            const double gy = kern::dot(gr, yr, cols);
            for (std::size_t j = 0; j < cols; ++j)
              gx.data[r * cols + j] += yr[j] * (gr[j] - gy);
          }
        }
        break;
      }
      case Prim::sum_all: {
        if (wants(0)) {
          Tensor& gx = acc(nd.inputs[0], input(0));
          const double gv = g.data[0];
          for (auto& v : gx.data) v += gv;
        }
        break;
      }
      case Prim::mean_all: {
        if (wants(0)) {
          Tensor& gx = acc(nd.inputs[0], input(0));
          const double gv = g.data[0] / static_cast<double>(gx.numel());
          for (auto& v : gx.data) v += gv;
        }
        break;
      }
      case Prim::layer_norm: {
        const Tensor &x = input(0), &gain = input(1);
        const std::size_t rows = rows_of(x), cols = cols_of(x);
        const double inv_n = 1.0 / static_cast<double>(cols);
        std::vector<double> xhat(cols), h(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xr = x.data.data() + r * cols;
          const double* gr = g.data.data() + r * cols;
          const double mu = kern::sum(xr, cols) * inv_n;
          double var = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
          }
          var *= inv_n;
          const double inv_s = 1.0 / std::sqrt(var + nd.attrs.eps);
          for (std::size_t j = 0; j < cols; ++j) xhat[j] = (xr[j] - mu) * inv_s;

          if (wants(1)) {
            Tensor& gg = acc(nd.inputs[1], gain);
            for (std::size_t j = 0; j < cols; ++j) gg.data[j] += gr[j] * xhat[j];
          }
          if (wants(2)) {
            Tensor& gb = acc(nd.inputs[2], input(2));
            kern::axpy(1.0, gr, gb.data.data(), cols);
          }
          if (wants(0)) {
            Tensor& gx = acc(nd.inputs[0], x);
            for (std::size_t j = 0; j < cols; ++j) h[j] = gr[j] * gain.data[j];
            const double mean_h = kern::sum(h.data(), cols) * inv_n;
            const double mean_hx = kern::dot(h.data(), xhat.data(), cols) * inv_n;
            for (std::size_t j = 0; j < cols; ++j)
              gx.data[r * cols + j] += inv_s * (h[j] - mean_h - xhat[j] * mean_hx);
          }
        }
        break;
      }
    }
  }

  // requires_grad leaves unreachable from the root report zero gradients
  for (NodeId id = 0; static_cast<std::size_t>(id) < nodes_.size(); ++id) {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (nd.prim == Prim::leaf && nd.needs_grad && !table.has(id))
      table.slot(id) = Tensor(nd.out.shape);
  }

  return table;
}

}  // namespace stvqa
