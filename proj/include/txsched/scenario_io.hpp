#pragma once

#include "txsched/types.hpp"

#include <string>

namespace txsched {

/// Strict JSON scenario loader: unknown fields are rejected, every invariant
/// violation is listed in one error, weights are normalized so
/// energy_weight + sum(error_weight) == 1, and an arrival curve is densified
/// with the deadline instants (carry-forward) so every deadline is an event.
/// Throws std::runtime_error with file/field diagnostics on parse failures
/// and std::invalid_argument on invariant violations.
Scenario load_scenario(const std::string& path);

Scenario parse_scenario_json(const std::string& text, const std::string& origin);

/// Serializer matching load_scenario; numeric fields round-trip bit exactly.
std::string scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::string& path);

}  // namespace txsched
