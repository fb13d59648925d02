#pragma once

#include "txsched/types.hpp"

#include <random>

namespace txsched {

/// Random rate-control instance: a requirement staircase plus a buffer cap
/// that admits it and an arrival curve that dominates it, so all three
/// schedule variants are solvable on the same instance.
struct RateInstance {
    StaircaseCurve requirements;
    double buffer_cap_bits = 0.0;
    ArrivalCurve arrival;
};

RateInstance random_rate_instance(std::mt19937_64& rng, int max_corners = 6);

/// Random small scenario with normalized weights and unit-scale channel.
/// Optional buffer cap / arrival curve are generated so a strictly interior
/// schedule exists.
Scenario random_scenario(std::mt19937_64& rng, int max_tasks, bool with_cap, bool with_arrival);

}  // namespace txsched
