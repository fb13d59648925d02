#include "txsched/baselines.hpp"

#include "txsched/model.hpp"
#include "txsched/partition.hpp"
#include "txsched/rate_control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace txsched {

namespace {

Partition equal_partition(const Scenario& scenario) {
    const int n = scenario.task_count();
    Partition part;
    part.bits = Eigen::VectorXd::Constant(n, scenario.budget_bits / n);
    const double share = scenario.budget_bits / n;
    if (scenario.buffer_cap_bits && share > *scenario.buffer_cap_bits * (1.0 + tol::bits_rel)) {
        std::ostringstream msg;
        msg << "equal split " << share << " bits per task exceeds the buffer capacity "
            << *scenario.buffer_cap_bits;
        throw InfeasibleError(msg.str());
    }
    if (scenario.arrival) {
        for (int j = 0; j < n; ++j) {
            const double bound = curve_eval(*scenario.arrival, scenario.tasks[j].deadline_s);
            if (!tol::leq(share * (j + 1), bound)) {
                std::ostringstream msg;
                msg << "equal split needs " << share * (j + 1) << " bits by t="
                    << scenario.tasks[j].deadline_s << " but only " << bound << " have arrived";
                throw InfeasibleError(msg.str());
            }
        }
    }
    return part;
}

Partition optimized_partition(const Scenario& scenario) {
    if (scenario.buffer_cap_bits)
        return partition_capped(scenario.tasks, scenario.budget_bits, *scenario.buffer_cap_bits)
            .partition;
    if (scenario.arrival)
        return partition_arrival_constrained(scenario.tasks, scenario.budget_bits, *scenario.arrival)
            .partition;
    return partition_unconstrained(scenario.tasks, scenario.budget_bits).partition;
}

RatePlan optimized_rates(const Scenario& scenario, const StaircaseCurve& req) {
    if (scenario.buffer_cap_bits) return sp_limited(req, *scenario.buffer_cap_bits);
    if (scenario.arrival) return sp_bursty(req, *scenario.arrival);
    return sp_unlimited(req);
}

// Smallest constant rate meeting every deadline, held until the split is
// delivered, then zero for the rest of the horizon.
RatePlan constant_rate_plan(const StaircaseCurve& req) {
    double rate = 0.0;
    for (const auto& c : req.corners) rate = std::max(rate, c.cumulative_bits / c.time_s);
    const double horizon = req.final_time_s();
    RatePlan plan;
    if (rate <= 0.0) {
        plan.segments = {{0.0, horizon}};
        return plan;
    }
    const double active = req.total_bits() / rate;
    plan.segments.push_back({rate, active});
    if (active < horizon * (1.0 - 1e-15)) plan.segments.push_back({0.0, horizon - active});
    return plan;
}

}  // namespace

const char* to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::EDP: return "EDP";
        case BaselineKind::ERC: return "ERC";
        case BaselineKind::EDPRC: return "EDPRC";
    }
    return "?";
}

BaselineKind baseline_kind_from_string(const std::string& name) {
    if (name == "EDP") return BaselineKind::EDP;
    if (name == "ERC") return BaselineKind::ERC;
    if (name == "EDPRC") return BaselineKind::EDPRC;
    throw std::invalid_argument("unknown baseline kind: " + name);
}

MergedSolution baseline_solve(const Scenario& scenario, BaselineKind kind) {
    validate_or_throw(scenario, "baseline_solve: invalid scenario");
    if (scenario.buffer_cap_bits && scenario.arrival)
        throw std::invalid_argument("baseline_solve: buffer cap and bursty arrival together are unsupported");

    MergedSolution sol;
    sol.partition = (kind == BaselineKind::ERC) ? optimized_partition(scenario)
                                                : equal_partition(scenario);
    const StaircaseCurve req = requirement_curve(sol.partition, scenario.tasks);
    sol.plan = (kind == BaselineKind::EDP) ? optimized_rates(scenario, req)
                                           : constant_rate_plan(req);

    const auto report = check_feasible(sol.plan, req, scenario.buffer_cap_bits, scenario.arrival);
    if (!report.feasible) {
        std::ostringstream msg;
        msg << to_string(kind) << " baseline is infeasible here: "
            << to_string(report.first_violation->kind) << " constraint at t="
            << report.first_violation->time_s;
        throw InfeasibleError(msg.str());
    }

    sol.report.objective = weighted_objective(sol.partition, sol.plan, scenario);
    sol.report.energy_j = plan_energy(sol.plan, scenario.channel);
    sol.report.per_task_error.resize(scenario.task_count());
    for (int n = 0; n < scenario.task_count(); ++n) {
        const double x = sample_count(sol.partition.bits[n], scenario.tasks[n]);
        sol.report.per_task_error[n] = x > 0.0
                                           ? learning_error(x, scenario.tasks[n])
                                           : std::numeric_limits<double>::infinity();
    }
    sol.report.multipliers_transmission = Eigen::VectorXd::Zero(scenario.task_count());
    sol.report.converged = true;
    return sol;
}

}  // namespace txsched
