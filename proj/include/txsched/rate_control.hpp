#pragma once

#include "txsched/types.hpp"

namespace txsched {

/// Range of constant rates feasible up to one instant; low > high encodes an
/// empty range (no constant rate reaches that instant).
struct RateInterval {
    double low = 0.0;
    double high = 0.0;
};

/// Energy-optimal schedule with an unbounded server buffer: the tightest
/// piecewise-linear cumulative curve on or above the requirement staircase.
/// Greedy steepest-first construction; ties between collinear corners resolve
/// to the latest corner so segments come out maximal and rates strictly
/// decrease.
RatePlan sp_unlimited(const StaircaseCurve& requirements);

/// Energy-optimal schedule when the server buffer holds at most `cap` bits.
/// The cumulative curve is pulled through the tunnel between the requirement
/// staircase and the staircase shifted up by the cap; rate drops happen on an
/// empty buffer, rises on a full one. Requires every per-deadline increment
/// to fit in the buffer, otherwise throws InfeasibleError.
RatePlan sp_limited(const StaircaseCurve& requirements, double buffer_cap_bits);

/// Energy-optimal schedule when data trickles into the sensor following
/// `arrival`. The tunnel's upper wall is the arrival staircase, densified so
/// every deadline is an event instant. Throws InfeasibleError when some
/// requirement exceeds the bits available by its deadline.
RatePlan sp_bursty(const StaircaseCurve& requirements, const ArrivalCurve& arrival);

/// Per-instant feasible constant-rate ranges from t = 0, buffer-cap variant:
/// low_j = C_j / t_j, high_j = (C_{j-1} + cap) / t_j.
std::vector<RateInterval> feasible_rate_intervals(const StaircaseCurve& requirements,
                                                  double buffer_cap_bits);

/// Per-instant feasible constant-rate ranges from t = 0, arrival variant, on
/// the densified instant grid: low_m = required(t_m) / t_m,
/// high_m = arrived(t_m) / t_m.
std::vector<RateInterval> feasible_rate_intervals(const StaircaseCurve& requirements,
                                                  const ArrivalCurve& arrival);

/// Sorted union of deadline and arrival instants in (0, final deadline],
/// the epoch grid of the bursty case.
std::vector<double> merged_instants(const StaircaseCurve& requirements,
                                    const ArrivalCurve& arrival);

}  // namespace txsched
