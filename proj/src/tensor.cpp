#include "stvqa/tensor.hpp"

#include <stdexcept>

namespace stvqa {

std::size_t Tensor::checked_numel(const std::vector<int>& s) {
  std::size_t n = 1;
  for (int e : s) {
    if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got shape " + shape_str(s));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

void Tensor::throw_shape_mismatch() {
  throw std::invalid_argument("tensor data length does not match product of shape extents");
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

}  // namespace stvqa
