#include "stvqa/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "stvqa/kernels.hpp"

namespace stvqa {

AdamState::AdamState(const ParamSet& params, AdamHyper hyper) : hyper_(hyper) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value.shape);
    v_.emplace_back(params[i].value.shape);
  }
}

void AdamState::step(ParamSet& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size())
    throw std::invalid_argument("adam_step: gradient/parameter block count mismatch");
  ++step_count_;
  const double b1t = std::pow(hyper_.beta1, static_cast<double>(step_count_));
  const double b2t = std::pow(hyper_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].value;
    const Tensor& gr = grads[i];
    if (!p.same_shape(gr))
      throw std::invalid_argument("adam_step: shape mismatch for '" + params[i].name + "': " +
                                  shape_str(p.shape) + " vs " + shape_str(gr.shape));
    kern::adam_update(p.data.data(), m_[i].data.data(), v_[i].data.data(), gr.data.data(),
                      p.numel(), hyper_.lr, hyper_.beta1, hyper_.beta2, hyper_.eps, b1t, b2t);
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += kern::dot(g.data.data(), g.data.data(), g.numel());
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& g : grads) kern::affine(g.data.data(), scale, 0.0, g.data.data(), g.numel());
  }
  return norm;
}

}  // namespace stvqa
