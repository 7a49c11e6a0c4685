#pragma once
// Central finite differences: the independent gradient oracle. It evaluates
// the function under test as a black box and never touches the reverse-mode
// path it is used to check.

#include <functional>
#include <string>
#include <vector>

#include "stvqa/graph.hpp"
#include "stvqa/tensor.hpp"

namespace stvqa {

// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps), per coordinate.
// f must be deterministic (dropout off or fixed masks).
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

// Relative error with a floor: |a-n| / max(|a|, |n|, floor). True relative
// error for gradients of magnitude >= floor; below that it degrades to an
// absolute tolerance of tol*floor, above central-difference noise
// (~1e-9 at eps=1e-5 in double).
double grad_rel_err(double analytic, double numeric, double floor = 1e-3);

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass(double tol = 1e-4) const { return max_rel_err < tol; }
};

GradCheckResult compare_grads(const Tensor& analytic, const Tensor& numeric, double floor = 1e-3);

// ---------------------------------------------------------------------------
// Whole-ParamSet check: analytic gradients of a scalar loss vs central finite
// differences, one report entry per parameter block in declaration order.
// build_loss must be deterministic and must not capture the graph between
// calls. corrupt_param names a block whose analytic gradient is perturbed
// before comparison (negative-control hook for the gradcheck report).
// ---------------------------------------------------------------------------
class ParamSet;
struct BoundParams;

struct ParamGradReport {
  std::string name;
  GradCheckResult result;
};

std::vector<ParamGradReport> gradcheck_params(
    const ParamSet& params,
    const std::function<NodeId(Graph&, const BoundParams&)>& build_loss, double eps = 1e-5,
    double floor = 1e-3, const std::string& corrupt_param = {});

}  // namespace stvqa
