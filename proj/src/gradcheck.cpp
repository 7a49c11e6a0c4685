#include "stvqa/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "stvqa/layers.hpp"

namespace stvqa {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  Tensor grad(x.shape);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.data[i];
    probe.data[i] = orig + eps;
    const double fp = f(probe);
    probe.data[i] = orig - eps;
    const double fm = f(probe);
    probe.data[i] = orig;
    grad.data[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double grad_rel_err(double analytic, double numeric, double floor) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / denom;
}

std::vector<ParamGradReport> gradcheck_params(
    const ParamSet& params,
    const std::function<NodeId(Graph&, const BoundParams&)>& build_loss, double eps,
    double floor, const std::string& corrupt_param) {
  // analytic pass
  std::vector<Tensor> analytic(params.size());
  {
    Graph g;
    const BoundParams bp = bind_params(g, params);
    const NodeId root = build_loss(g, bp);
    const Gradients grads = g.backward(root);
    for (std::size_t i = 0; i < params.size(); ++i) analytic[i] = grads.at(bp.ids[i]);
  }

  ParamSet probe_set = params;
  std::vector<ParamGradReport> report;
  report.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor original = probe_set[i].value;
    const Tensor numeric = finite_diff_grad(
        [&](const Tensor& probe) {
          probe_set[i].value = probe;
          probe_set[i].value.requires_grad = true;
          Graph g;
          const BoundParams bp = bind_params(g, probe_set);
          return g.value(build_loss(g, bp)).scalar_value();
        },
        original, eps);
    probe_set[i].value = original;

    if (!corrupt_param.empty() && params[i].name == corrupt_param)
      for (auto& v : analytic[i].data) v += 1e-2;

    report.push_back(ParamGradReport{params[i].name, compare_grads(analytic[i], numeric, floor)});
  }
  return report;
}

GradCheckResult compare_grads(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (!analytic.same_shape(numeric))
    throw std::invalid_argument("compare_grads: shape mismatch " + shape_str(analytic.shape) +
                                " vs " + shape_str(numeric.shape));
  GradCheckResult r;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    const double e = grad_rel_err(analytic.data[i], numeric.data[i], floor);
    if (e > r.max_rel_err) {
      r.max_rel_err = e;
      r.worst_index = i;
      r.worst_analytic = analytic.data[i];
      r.worst_numeric = numeric.data[i];
    }
  }
  return r;
}

}  // namespace stvqa
