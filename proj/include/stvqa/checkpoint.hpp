#pragma once
// Versioned binary checkpoints: magic, format version, config as key=value
// text, then parameter tensors in declaration order as little-endian float32
// with shape headers, then optimizer moments in the same layout.
//
// Saving commits the live model to storage precision: parameters and moments
// are rounded to float32 in memory as they are written, so a saved model and
// its reloaded copy produce bit-identical predictions, and a run resumed from
// a checkpoint matches one that never stopped but saved at the same step.

#include <cstdint>
#include <string>

#include "stvqa/adam.hpp"
#include "stvqa/model.hpp"

namespace stvqa {

struct Checkpoint {
  ModelParams params;
  AdamState opt;
  bool has_optimizer = false;
  std::int64_t global_step = 0;
  std::uint64_t seed = 0;
};

void save_checkpoint(Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stvqa
