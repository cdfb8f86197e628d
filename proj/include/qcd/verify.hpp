#pragma once

#include <string>
#include <vector>

#include "qcd/config.hpp"

namespace qcd {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Fast exact checks on the scenario of `rc`: queue recursion, idle iff empty,
// FCFS delivery order, generalized/recursive agreement on FCFS, queue paths
// shared across disciplines, occupancy and replay determinism.
std::vector<CheckResult> verify_invariants(const RunConfig& rc, unsigned parallelism = 1);

}  // namespace qcd
