#pragma once

#include <string>
#include <vector>

namespace qst::verify {

struct Check {
  std::string name;
  double computed = 0.0;
  double reference = 0.0;
  double rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// Built-in numerical cross-checks:
//   gaussian    - isotropic alpha = 1 closed forms across all estimators
//   oracle      - seeded random anisotropic fields vs the 3-D quadrature
//   consistency - surface-reduced integral vs the 3-D quadrature
//   all         - everything above
std::vector<Check> run_suite(const std::string& suite, int n_fields = 20);

std::string format_table(const std::vector<Check>& checks);

}  // namespace qst::verify
