#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbfrl/filter.hpp"

namespace cbfrl {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const CheckResult& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Closed-form filter vs the KKT oracle on randomized instances, plus
// idempotence, projection minimality and constraint scale invariance.
// `inject_sign_flip` flips the projection correction (fault-injection
// fixture; the sweep must then fail).
SuiteResult run_filter_suite(std::size_t instances = 100000, bool inject_sign_flip = false,
                             std::uint64_t seed = 1);

// Analytic gradients vs central differences at smooth points, the
// 1-Lipschitz property of the composite barrier, the identically-zero
// halfspace Taylor remainder, and the mu(dt)/dt -> 0 scaling.
SuiteResult run_barrier_suite(std::size_t fd_points = 10000, std::uint64_t seed = 1);

// DTCBF bound certification: exact halfspace case, a filtered
// circular-obstacle rollout against the estimated remainder bound, and
// rejection of a fabricated violating trace. When out_dir is nonempty the
// rollout certificate and its world are written there.
SuiteResult run_bound_suite(const std::string& out_dir = "", std::uint64_t seed = 1);

}  // namespace cbfrl
