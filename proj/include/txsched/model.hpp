#pragma once

#include "txsched/types.hpp"

namespace txsched {

/// Real-valued sample count reachable with `data_bits` fresh bits:
/// data_bits / bits_per_sample + prior_samples.
double sample_count(double data_bits, const LearningTaskSpec& task);

/// Inverse-power-law test error amplitude * samples^(-decay).
/// Throws std::domain_error for samples == 0 (model undefined there).
double learning_error(double samples, const LearningTaskSpec& task);

/// Transmission energy of a schedule: sum over segments of
/// (e^{rate/bandwidth} - 1) * noise/gain * duration, in joules.
double plan_energy(const RatePlan& plan, const ChannelModel& channel);

/// Transmit power at a given rate, (e^{rate/bandwidth} - 1) * noise/gain.
double rate_power_w(double rate_bps, const ChannelModel& channel);

/// Scalarized objective: energy_weight * plan_energy + sum of
/// error_weight_n * learning_error(sample_count(bits_n)). Tasks with zero
/// error weight contribute nothing and are not evaluated.
double weighted_objective(const Partition& partition, const RatePlan& plan,
                          const Scenario& scenario);

/// The per-deadline cumulative requirement induced by a partition
/// (corners at every task deadline, including zero-increment ones).
StaircaseCurve requirement_curve(const Partition& partition,
                                 const std::vector<LearningTaskSpec>& tasks);

/// Right-continuous staircase evaluation. Throws std::out_of_range outside
/// [0, final corner time].
double curve_eval(const StaircaseCurve& curve, double t_s);

/// Right-continuous arrival evaluation; 0 before the first event. Throws
/// std::out_of_range outside [0, final event time].
double curve_eval(const ArrivalCurve& curve, double t_s);

/// Piecewise-linear cumulative bits transmitted by time t. Throws
/// std::out_of_range outside [0, total duration].
double curve_eval(const RatePlan& plan, double t_s);

/// Verifies a schedule against the requirement staircase, an optional buffer
/// cap and an optional arrival staircase. Transmission and buffer constraints
/// are checked at every requirement corner (sufficient for piecewise-constant
/// rates); arrival constraints are checked at every arrival event and every
/// deadline. Comparisons carry the global relative bit slack.
FeasibilityReport check_feasible(const RatePlan& plan, const StaircaseCurve& requirements,
                                 std::optional<double> buffer_cap_bits = std::nullopt,
                                 const std::optional<ArrivalCurve>& arrival = std::nullopt);

}  // namespace txsched
