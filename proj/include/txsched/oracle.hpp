#pragma once

#include "txsched/types.hpp"

#include <cstdint>

namespace txsched {

struct OracleConfig {
    int grid_points_per_axis = 20;  // >= 10
    int descent_iterations = 300;
    std::uint64_t seed = 0;
};

/// Brute-force rate verifier: projected-gradient descent on per-epoch rates
/// over the feasible polytope, multi-started from the tunnel-corner grid plus
/// 16 seeded random points, finished with exact coordinate sweeps. Knows
/// nothing of the string-pulling construction. Requirements limited to 8
/// corners (combinatorial start budget).
RatePlan oracle_rate_control(const StaircaseCurve& requirements, const OracleConfig& config);
RatePlan oracle_rate_control(const StaircaseCurve& requirements, double buffer_cap_bits,
                             const OracleConfig& config);
RatePlan oracle_rate_control(const StaircaseCurve& requirements, const ArrivalCurve& arrival,
                             const OracleConfig& config);

struct JointOracleResult {
    Partition partition;
    RatePlan plan;
    double objective = 0.0;
};

/// Brute-force joint verifier: exhaustive sweep of the split over an
/// axis-aligned grid on the feasible simplex, each grid point finished by
/// oracle_rate_control; returns the best pair found. Limited to 4 tasks.
JointOracleResult oracle_joint(const Scenario& scenario, const OracleConfig& config);

}  // namespace txsched
