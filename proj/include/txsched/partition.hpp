#pragma once

#include "txsched/types.hpp"

namespace txsched {

/// Result of an error-minimizing data split. `multiplier` is the budget
/// water level (0 when the budget is left slack), `budget_residual` is
/// budget - sum(bits).
struct PartitionSolution {
    Partition partition;
    double multiplier = 0.0;
    double budget_residual = 0.0;
    std::vector<int> active_at_zero;
    std::vector<int> active_at_cap;
};

/// Budget-only split: bits_n = d_n * (w_n a_n b_n / (lambda d_n))^{1/(b_n+1)} - c_n d_n,
/// clipped at zero, with lambda found by bisection so the clipped sum meets
/// the budget (residual <= 1e-9 * budget). Throws std::invalid_argument when
/// every error weight is zero (the objective is then independent of the split).
PartitionSolution partition_unconstrained(const std::vector<LearningTaskSpec>& tasks,
                                          double budget_bits);

/// As above with the additional per-task bound bits_n <= cap. Budget may be
/// left unspent when every task saturates its cap.
PartitionSolution partition_capped(const std::vector<LearningTaskSpec>& tasks,
                                   double budget_bits, double cap_bits);

/// As above with nested prefix bounds sum_{n<=j} bits_n <= arrival(t_j).
/// Active prefixes split the tasks into blocks, each solved on its own
/// sub-budget; block water levels end up non-increasing.
PartitionSolution partition_arrival_constrained(const std::vector<LearningTaskSpec>& tasks,
                                                double budget_bits, const ArrivalCurve& arrival);

/// Marginal error reduction per fresh bit at allocation `bits`:
/// w a b / d * (bits/d + c)^{-b-1}. The water-filling level of an interior task.
double marginal_error_reduction(double bits, const LearningTaskSpec& task);

}  // namespace txsched
