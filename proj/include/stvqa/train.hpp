#pragma once
// Mini-batch training loop: seeded shuffling, mean batch loss over mixed
// tasks, global-norm gradient clipping, ADAM updates. Deterministic given
// (params, data, hyper, seed).

#include <string>
#include <vector>

#include "stvqa/adam.hpp"
#include "stvqa/dataset.hpp"
#include "stvqa/eval.hpp"

namespace stvqa {

struct TrainHyper {
  int steps = 500;
  int batch_size = 16;
  AdamHyper adam;
  double clip_norm = 10.0;  // <= 0 disables clipping
  int val_every = 0;        // 0 disables periodic validation
};

struct ValPoint {
  int step = 0;
  TaskMetrics metrics;
};

struct TrainResult {
  std::vector<std::pair<int, double>> loss_curve;  // (step, batch loss)
  std::vector<ValPoint> validation;
};

// Runs `hyper.steps` additional steps on top of opt.step_count(). Aborts with
// a diagnostic naming the step if the loss goes non-finite.
TrainResult train(ModelParams& params, AdamState& opt, const Dataset& data,
                  const TrainHyper& hyper, std::uint64_t seed,
                  const Dataset* validation = nullptr);

void write_loss_curve(const std::string& path, const std::vector<std::pair<int, double>>& curve);

}  // namespace stvqa
