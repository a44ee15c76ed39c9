#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace glint {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  int instances = 100;
  bool float_networks = false;  // run the network checks in single precision
  std::string only;             // run one operation by name
  std::string inject_fault;     // perturb this operation's analytic gradient
};

struct GradcheckResult {
  std::string name;
  double tolerance = 0;
  int instances = 0;
  double max_error = 0;
  double seconds = 0;
  bool passed = false;
};

/// Names of the checked operations, in run order.
std::vector<std::string> gradcheck_operations();

/// Central differences against every analytic adjoint. Instances whose
/// discrete choices (activation pattern, texel, sort order, orientation)
/// change inside the stencil are redrawn. UsageError for an unknown name.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opt);

}  // namespace glint
