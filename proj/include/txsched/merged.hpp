#pragma once

#include "txsched/types.hpp"

#include <utility>

namespace txsched {

/// Lagrange multipliers of the scalarized program, in per-bit units.
/// Vectors may be empty when the corresponding constraint family is absent.
struct KktMultipliers {
    double budget = 0.0;                // data-budget constraint
    Eigen::VectorXd transmission;       // one per deadline (delivery-by-deadline)
    Eigen::VectorXd buffer;             // buffer-cap wall, one per deadline
    Eigen::VectorXd task_cap;           // per-task cap, one per task
    Eigen::VectorXd arrival;            // arrival wall, one per epoch instant
    Eigen::VectorXd partition_floor;    // bits_n >= 0
    Eigen::VectorXd rate_floor;         // rate_k >= 0
};

struct SolveReport {
    double objective = 0.0;
    double energy_j = 0.0;
    Eigen::VectorXd per_task_error;
    double multiplier_budget = 0.0;
    Eigen::VectorXd multipliers_transmission;
    double kkt_stationarity_residual = 0.0;
    double kkt_complementarity_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct MergedOptions {
    double kkt_tol = 1e-6;    // certification threshold on both residuals
    double gap_rel = 1e-8;    // barrier duality-gap target, relative to objective
    int max_outer = 40;
    int max_newton = 80;
};

struct MergedSolution {
    Partition partition;
    RatePlan plan;
    SolveReport report;
    KktMultipliers multipliers;
};

/// Jointly optimizes the data split and the rate schedule for the weighted
/// error + energy objective, honoring the scenario's buffer cap or arrival
/// curve when present. Log-barrier interior method with damped Newton steps
/// from a strictly feasible start; rates are finished with the exact
/// string-pulling schedule of the final split. Weights must be normalized
/// (energy_weight + sum of error weights == 1) and energy_weight > 0.
/// Throws InfeasibleError for instances without a strict interior and
/// ConvergenceError when the iteration budget runs out uncertified.
MergedSolution solve_merged(const Scenario& scenario, const MergedOptions& options = {});

/// Error-first pipeline: the matching partition solver, then the matching
/// string-pulling rate schedule for that split.
MergedSolution solve_stratified(const Scenario& scenario);

/// Stationarity / complementary-slackness residuals of a candidate primal
/// pair with the given multipliers, both scaled by the objective magnitude.
/// Components at an active lower bound contribute only a negative-gradient
/// excess when no floor multiplier is supplied.
std::pair<double, double> kkt_residuals(const Partition& partition, const RatePlan& plan,
                                        const KktMultipliers& multipliers,
                                        const Scenario& scenario);

}  // namespace txsched
