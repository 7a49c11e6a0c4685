#include "stvqa/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace stvqa {

NodeId hinge_pairwise_loss(Graph& g, NodeId s_pos, std::span<const NodeId> s_negs) {
  if (s_negs.empty()) throw std::invalid_argument("hinge_pairwise_loss: no negative scores");
  NodeId total = -1;
  for (NodeId s_neg : s_negs) {
    const NodeId term = g.relu(g.affine(g.sub(s_neg, s_pos), 1.0, 1.0));
    total = total < 0 ? term : g.add(total, term);
  }
  return total;
}

double hinge_pairwise_loss(double s_pos, const std::vector<double>& s_negs) {
  if (s_negs.empty()) throw std::invalid_argument("hinge_pairwise_loss: no negative scores");
  double total = 0.0;
  for (double s_neg : s_negs) total += std::max(0.0, 1.0 + s_neg - s_pos);
  return total;
}

NodeId l2_count_loss(Graph& g, NodeId pred, int gold) {
  const NodeId diff = g.affine(pred, 1.0, -static_cast<double>(gold));
  return g.mul(diff, diff);
}

double l2_count_loss(double pred, int gold) {
  const double d = pred - static_cast<double>(gold);
  return d * d;
}

NodeId softmax_xent_loss(Graph& g, NodeId distribution, int gold_index) {
  return g.affine(g.log(g.slice(distribution, gold_index, gold_index + 1)), -1.0, 0.0);
}

double softmax_xent_loss(const std::vector<double>& distribution, int gold_index) {
  if (gold_index < 0 || static_cast<std::size_t>(gold_index) >= distribution.size())
    throw std::invalid_argument("softmax_xent_loss: gold index out of range");
  return -std::log(distribution[static_cast<std::size_t>(gold_index)]);
}

}  // namespace stvqa
