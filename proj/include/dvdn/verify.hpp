#pragma once

// Property suites behind the `verify` command: consensus-weight laws,
// gradient checks against finite differences, the joint-TD factorization
// identity, gradient-tracking invariants, parameter-sharing emulation and
// the calibration of the bootstrap statistics.

#include <string>
#include <vector>

namespace dvdn {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

SuiteResult verify_consensus_suite();
SuiteResult verify_gradient_suite();
SuiteResult verify_fact1_suite();
SuiteResult verify_complete_graph_equivalence();
SuiteResult verify_gradient_tracking_suite();
SuiteResult verify_parameter_sharing_emulation();
SuiteResult verify_stats_calibration();

std::vector<SuiteResult> run_verification_suites();

}  // namespace dvdn
