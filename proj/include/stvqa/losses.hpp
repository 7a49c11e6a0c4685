#pragma once
// Task losses, both as graph builders (training) and as plain closed forms
// (metrics and oracle tests).

#include <span>
#include <vector>

#include "stvqa/graph.hpp"

namespace stvqa {

// sum over negatives of max(0, 1 + s_neg - s_pos)
NodeId hinge_pairwise_loss(Graph& g, NodeId s_pos, std::span<const NodeId> s_negs);
double hinge_pairwise_loss(double s_pos, const std::vector<double>& s_negs);

// (pred - gold)^2
NodeId l2_count_loss(Graph& g, NodeId pred, int gold);
double l2_count_loss(double pred, int gold);

// -log(distribution[gold]); `distribution` already sums to one
NodeId softmax_xent_loss(Graph& g, NodeId distribution, int gold_index);
double softmax_xent_loss(const std::vector<double>& distribution, int gold_index);

}  // namespace stvqa
