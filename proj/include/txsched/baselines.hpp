#pragma once

#include "txsched/merged.hpp"
#include "txsched/types.hpp"

#include <string>

namespace txsched {

/// Comparison schemes: equal data split with optimized rates (EDP), optimized
/// split at one constant rate (ERC), and both restrictions at once (EDPRC).
enum class BaselineKind { EDP, ERC, EDPRC };

const char* to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

/// Solves the scenario under the chosen restriction. The constant-rate
/// schemes transmit at the smallest feasible constant rate until the whole
/// split is delivered, then go silent. An equal split that breaks a cap or
/// arrival bound is reported as InfeasibleError, not silently adjusted.
MergedSolution baseline_solve(const Scenario& scenario, BaselineKind kind);

}  // namespace txsched
