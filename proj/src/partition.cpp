#include "txsched/partition.hpp"

#include "txsched/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace txsched {

namespace {

constexpr double kResidualRel = 1e-9;

// Closed-form allocation at water level lambda, clamped to [0, cap].
double allocation_at_level(double lambda, const LearningTaskSpec& t, double cap) {
    const double strength = t.error_weight * t.amplitude * t.decay;
    if (strength <= 0.0) return 0.0;
    const double raw =
        t.bits_per_sample * std::pow(strength / (lambda * t.bits_per_sample), 1.0 / (t.decay + 1.0)) -
        t.prior_samples * t.bits_per_sample;
    return std::clamp(raw, 0.0, cap);
}

double clipped_sum(double lambda, const std::vector<LearningTaskSpec>& tasks, double cap) {
    double sum = 0.0;
    for (const auto& t : tasks) sum += allocation_at_level(lambda, t, cap);
    return sum;
}

// Bisection on the water level so the clipped allocations sum to `budget`.
// The sum is continuous and non-increasing in lambda, vanishing as
// lambda -> inf and reaching sum(cap) as lambda -> 0, so either the caps
// saturate below the budget or a bracket exists.
PartitionSolution water_fill(const std::vector<LearningTaskSpec>& tasks, double budget,
                             double cap) {
    int weighted = 0;
    for (const auto& t : tasks) weighted += t.error_weight * t.amplitude * t.decay > 0.0 ? 1 : 0;
    if (weighted == 0)
        throw std::invalid_argument("partition: all error weights are zero, split is undetermined");

    const double tol_bits = kResidualRel * budget;
    double lambda = 0.0;
    const bool saturated = std::isfinite(cap) && weighted * cap <= budget + tol_bits;
    if (saturated) {
        lambda = 1e-300;  // deep water: every weighted task sits at its cap
    } else {
        double lo = 1e-5, hi = 1e5;
        while (clipped_sum(lo, tasks, cap) < budget && lo > 1e-280) lo /= 16.0;
        while (clipped_sum(hi, tasks, cap) > budget && hi < 1e280) hi *= 16.0;
        for (int iter = 0; iter < 500; ++iter) {
            lambda = 0.5 * (lo + hi);
            const double sum = clipped_sum(lambda, tasks, cap);
            if (std::abs(sum - budget) <= tol_bits) break;
            (sum > budget ? lo : hi) = lambda;
            if (hi - lo <= 1e-16 * lo) break;
        }
    }

    PartitionSolution sol;
    sol.partition.bits = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tasks.size()));
    double total = 0.0;
    for (std::size_t n = 0; n < tasks.size(); ++n) {
        const double bits = allocation_at_level(lambda, tasks[n], cap);
        sol.partition.bits[static_cast<Eigen::Index>(n)] = bits;
        total += bits;
        if (bits == 0.0) sol.active_at_zero.push_back(static_cast<int>(n));
        if (std::isfinite(cap) && bits >= cap) sol.active_at_cap.push_back(static_cast<int>(n));
    }
    sol.budget_residual = budget - total;
    // Complementarity: report a zero multiplier whenever budget is left over.
    sol.multiplier = sol.budget_residual > tol_bits ? 0.0 : lambda;
    return sol;
}

}  // namespace

double marginal_error_reduction(double bits, const LearningTaskSpec& task) {
    const double samples = bits / task.bits_per_sample + task.prior_samples;
    return task.error_weight * task.amplitude * task.decay / task.bits_per_sample *
           std::pow(samples, -task.decay - 1.0);
}

PartitionSolution partition_unconstrained(const std::vector<LearningTaskSpec>& tasks,
                                          double budget_bits) {
    if (!(budget_bits > 0.0)) throw std::invalid_argument("partition: budget must be > 0");
    return water_fill(tasks, budget_bits, std::numeric_limits<double>::infinity());
}

PartitionSolution partition_capped(const std::vector<LearningTaskSpec>& tasks, double budget_bits,
                                   double cap_bits) {
    if (!(budget_bits > 0.0)) throw std::invalid_argument("partition: budget must be > 0");
    if (!(cap_bits > 0.0)) throw std::invalid_argument("partition: cap must be > 0");
    return water_fill(tasks, budget_bits, cap_bits);
}

namespace {

struct Block {
    int first = 0;  // task index range [first, last]
    int last = 0;
    PartitionSolution sol;
    double level = 0.0;  // water level; +inf when the block budget is zero
};

Block solve_block(const std::vector<LearningTaskSpec>& tasks, int first, int last, double budget,
                  double tol_bits) {
    Block b;
    b.first = first;
    b.last = last;
    const int count = last - first + 1;
    if (budget <= tol_bits) {
        b.sol.partition.bits = Eigen::VectorXd::Zero(count);
        b.sol.budget_residual = budget;
        b.level = std::numeric_limits<double>::infinity();
        for (int n = 0; n < count; ++n) b.sol.active_at_zero.push_back(n);
        return b;
    }
    std::vector<LearningTaskSpec> slice(tasks.begin() + first, tasks.begin() + last + 1);
    b.sol = water_fill(slice, budget, std::numeric_limits<double>::infinity());
    b.level = b.sol.multiplier > 0.0 ? b.sol.multiplier : std::numeric_limits<double>::infinity();
    return b;
}

}  // namespace

PartitionSolution partition_arrival_constrained(const std::vector<LearningTaskSpec>& tasks,
                                                double budget_bits, const ArrivalCurve& arrival) {
    if (!(budget_bits > 0.0)) throw std::invalid_argument("partition: budget must be > 0");
    const int n_tasks = static_cast<int>(tasks.size());
    const double arrival_end = arrival.events.empty() ? 0.0 : arrival.events.back().time_s;

    // Prefix bound at each deadline; the final one also absorbs the budget.
    std::vector<double> bound(n_tasks);
    for (int n = 0; n < n_tasks; ++n) {
        const double t = tasks[n].deadline_s;
        if (t > arrival_end)
            throw std::invalid_argument("partition: arrival curve ends before the last deadline");
        bound[n] = curve_eval(arrival, t);
    }
    bound[n_tasks - 1] = std::min(bound[n_tasks - 1], budget_bits);
    for (int n = n_tasks - 2; n >= 0; --n) bound[n] = std::min(bound[n], bound[n + 1]);

    // Active-set loop over the prefix constraints. Blocks between active
    // prefixes are independent budget-only solves; a violated prefix joins
    // the set, a prefix whose block levels come out increasing leaves it.
    std::vector<int> active;  // sorted prefix indices in [0, n_tasks-2]
    const double tol_bits = kResidualRel * std::max(budget_bits, 1.0);
    std::vector<Block> blocks;

    for (int round = 0; round < 4 * n_tasks + 8; ++round) {
        blocks.clear();
        int first = 0;
        double spent_bound = 0.0;
        for (int prefix : active) {
            blocks.push_back(solve_block(tasks, first, prefix, bound[prefix] - spent_bound, tol_bits));
            spent_bound = bound[prefix];
            first = prefix + 1;
        }
        blocks.push_back(
            solve_block(tasks, first, n_tasks - 1, bound[n_tasks - 1] - spent_bound, tol_bits));

        // Dual feasibility: levels must be non-increasing across blocks.
        int drop = -1;
        double worst_gap = 0.0;
        for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
            // Zero-budget blocks have a free (upward) level and never violate.
            if (!std::isfinite(blocks[b].level) || !std::isfinite(blocks[b + 1].level)) continue;
            const double gap = blocks[b + 1].level - blocks[b].level;
            if (gap > blocks[b].level * 1e-12 && gap > worst_gap) {
                worst_gap = gap;
                drop = static_cast<int>(b);
            }
        }
        if (drop >= 0) {
            active.erase(active.begin() + drop);
            continue;
        }

        Eigen::VectorXd bits(n_tasks);
        for (const auto& b : blocks) bits.segment(b.first, b.last - b.first + 1) = b.sol.partition.bits;

        // Primal feasibility: prefixes interior to a block must be slack.
        double prefix_sum = 0.0;
        int add = -1;
        double worst_violation = tol_bits;
        for (int n = 0; n + 1 < n_tasks; ++n) {
            prefix_sum += bits[n];
            const double violation = prefix_sum - bound[n];
            if (violation > worst_violation) {
                worst_violation = violation;
                add = n;
            }
        }
        if (add >= 0) {
            active.insert(std::upper_bound(active.begin(), active.end(), add), add);
            continue;
        }

        PartitionSolution sol;
        sol.partition.bits = bits;
        sol.budget_residual = budget_bits - bits.sum();
        const Block& tail = blocks.back();
        sol.multiplier =
            sol.budget_residual > tol_bits || !std::isfinite(tail.level) ? 0.0 : tail.level;
        for (int n = 0; n < n_tasks; ++n)
            if (bits[n] == 0.0) sol.active_at_zero.push_back(n);
        for (int prefix : active) sol.active_at_cap.push_back(prefix);
        return sol;
    }
    throw std::runtime_error("partition: prefix active-set iteration failed to settle");
}

}  // namespace txsched
