#pragma once
// Whole-model gradient verification at fixed tiny dimensions (D=8, T=4, G=2,
// |V|=11): the combined count+action+transition+frameqa loss is checked
// against central finite differences for every parameter block of a variant.

#include <string>
#include <vector>

#include "stvqa/gradcheck.hpp"
#include "stvqa/model.hpp"

namespace stvqa {

struct ModelGradCheck {
  Variant variant;
  std::vector<ParamGradReport> blocks;  // declaration order, one per field
  double max_rel_err = 0.0;
  bool pass(double tol = 1e-4) const { return max_rel_err < tol; }
};

// corrupt_param perturbs that block's analytic gradient (negative control).
ModelGradCheck gradcheck_variant(Variant v, std::uint64_t seed,
                                 const std::string& corrupt_param = {});

}  // namespace stvqa
