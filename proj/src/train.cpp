#include "stvqa/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace stvqa {

TrainResult train(ModelParams& params, AdamState& opt, const Dataset& data,
                  const TrainHyper& hyper, std::uint64_t seed, const Dataset* validation) {
  if (data.items.empty()) throw std::invalid_argument("train: empty dataset");
  if (hyper.batch_size <= 0) throw std::invalid_argument("train: batch size must be positive");

  Rng shuffle_rng = named_stream(seed, "train/shuffle");
  Rng dropout_rng = named_stream(seed, "train/dropout");

  std::vector<std::size_t> order(data.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(std::max(hyper.steps, 0)));

  for (int step = 0; step < hyper.steps; ++step) {
    const int global_step = static_cast<int>(opt.step_count()) + 1;

    std::vector<const QAItem*> batch;
    batch.reserve(static_cast<std::size_t>(hyper.batch_size));
    for (int b = 0; b < hyper.batch_size; ++b) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&data.items[order[cursor++]]);
    }

    double loss_value = 0.0;
    std::vector<Tensor> grads;
    try {
      Graph g;
      const BoundParams bp = bind_params(g, params.set);
      ForwardOptions fopt;
      fopt.training = true;
      fopt.dropout_rng = &dropout_rng;
      fopt.build_loss = true;
      std::vector<NodeId> losses;
      losses.reserve(batch.size());
      for (const QAItem* item : batch)
        losses.push_back(forward(g, bp, params.config, *item, data.features_for(*item), fopt).loss);
      const NodeId batch_loss = g.mean(g.concat(losses, 0));
      loss_value = g.value(batch_loss).scalar_value();
      if (!std::isfinite(loss_value)) throw std::runtime_error("batch loss is non-finite");
      const Gradients gr = g.backward(batch_loss);
      grads.reserve(params.set.size());
      for (std::size_t i = 0; i < params.set.size(); ++i) grads.push_back(gr.at(bp.ids[i]));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training diverged at step " + std::to_string(global_step) + ": " +
                               e.what());
    }

    if (hyper.clip_norm > 0.0) clip_global_norm(grads, hyper.clip_norm);
    opt.step(params.set, grads);
    result.loss_curve.emplace_back(global_step, loss_value);

    if (validation && hyper.val_every > 0 && global_step % hyper.val_every == 0)
      result.validation.push_back(ValPoint{global_step, evaluate(params, *validation)});
  }
  return result;
}

void write_loss_curve(const std::string& path, const std::vector<std::pair<int, double>>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss curve: " + path);
  out.precision(17);
  for (const auto& [step, loss] : curve) out << step << ' ' << loss << '\n';
}

}  // namespace stvqa
