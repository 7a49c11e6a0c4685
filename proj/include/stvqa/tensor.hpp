#pragma once
// Dense row-major tensor of doubles, rank 0..2 in practice (scalars are any
// tensor with one element). Double precision throughout: the gradient-check
// tolerance of 1e-4 is unreachable in single precision.

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "stvqa/rng.hpp"

namespace stvqa {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_numel(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (checked_numel(shape) != data.size())
      throw_shape_mismatch();
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor filled(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor uniform(std::vector<int> s, double lo, double hi, Rng& rng) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = rng.uniform(lo, hi);
    return t;
  }
  static Tensor normal(std::vector<int> s, double mean, double stddev, Rng& rng) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = rng.normal(mean, stddev);
    return t;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool is_scalar() const { return numel() == 1; }
  double scalar_value() const { return data[0]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  static std::size_t checked_numel(const std::vector<int>& s);
  [[noreturn]] static void throw_shape_mismatch();
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace stvqa
