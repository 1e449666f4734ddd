#pragma once

#include <string>
#include <vector>

namespace actrans::gradcheck {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central finite differences (64-bit, step 1e-5) against the analytic
// gradients of the three regressor losses (w.r.t. scores) and of the
// anatomical constraint loss w.r.t. generated pixels through a tiny scorer.
// Ten seeded random inputs per check.
std::vector<CheckResult> run_all(double tolerance = 1e-4);

}  // namespace actrans::gradcheck
