#pragma once
// Bias-corrected ADAM over a ParamSet, moments mirrored per parameter block.

#include <vector>

#include "stvqa/layers.hpp"

namespace stvqa {

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const ParamSet& params, AdamHyper hyper = {});

  // grads aligned with the ParamSet declaration order
  void step(ParamSet& params, const std::vector<Tensor>& grads);

  std::int64_t step_count() const { return step_count_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_step_count(std::int64_t s) { step_count_ = s; }

 private:
  AdamHyper hyper_;
  std::vector<Tensor> m_, v_;
  std::int64_t step_count_ = 0;
};

// L2 norm over all gradient blocks; scales in place when the norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace stvqa
