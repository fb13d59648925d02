#include "txsched/oracle.hpp"

#include "txsched/model.hpp"
#include "txsched/rate_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace txsched {

namespace {

double eval_carry_forward(const ArrivalCurve& arrival, double t_s) {
    double value = 0.0;
    for (const auto& e : arrival.events) {
        if (e.time_s > t_s) break;
        value = e.cumulative_bits;
    }
    return value;
}

// Rate search space in cumulative coordinates: x[k] = bits transmitted by
// instant t[k], boxed between the requirement wall and the binding ceiling,
// monotone, with the final coordinate pinned at the total requirement.
struct CumulativeBox {
    std::vector<double> t;
    std::vector<double> dur;
    std::vector<double> low;
    std::vector<double> high;
};

CumulativeBox make_box(const StaircaseCurve& requirements, std::optional<double> cap,
                       const ArrivalCurve* arrival) {
    CumulativeBox box;
    if (arrival) {
        box.t = merged_instants(requirements, *arrival);
    } else {
        for (const auto& c : requirements.corners) box.t.push_back(c.time_s);
    }
    const double total = requirements.total_bits();
    double prev_t = 0.0;
    double prev_req = 0.0;
    for (double t : box.t) {
        box.dur.push_back(t - prev_t);
        const double req = curve_eval(requirements, t);
        double ceil = total;  // transmitting beyond the final need only wastes energy
        if (cap) ceil = std::min(ceil, prev_req + *cap);
        if (arrival) ceil = std::min(ceil, eval_carry_forward(*arrival, t));
        if (!tol::leq(req, ceil)) throw InfeasibleError("oracle: empty rate polytope");
        box.low.push_back(req);
        box.high.push_back(ceil);
        prev_t = t;
        prev_req = req;
    }
    return box;
}

// Monotone forward repair into the box; exact when the walls are themselves
// monotone, which they are here.
void repair(const CumulativeBox& box, std::vector<double>& x) {
    double prev = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = std::clamp(x[k], std::max(box.low[k], prev), box.high[k]);
        prev = x[k];
    }
    x.back() = box.low.back();  // pinned: deliver exactly the total
}

// The argmin over cumulative curves is the taut string for every convex
// per-epoch cost, so the channel constants drop out; the descent runs on a
// normalized bandwidth chosen to keep the exponentials well conditioned.
double energy_of(const CumulativeBox& box, const std::vector<double>& x,
                 const ChannelModel& ch) {
    double prev = 0.0, energy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double rate = (x[k] - prev) / box.dur[k];
        energy += std::expm1(rate / ch.bandwidth_hz) * ch.noise_power_w / ch.gain * box.dur[k];
        prev = x[k];
    }
    return energy;
}

void descend(const CumulativeBox& box, const ChannelModel& ch, int iterations,
             std::vector<double>& x) {
    const std::size_t count = x.size();
    if (count <= 1) return;
    const double scale = std::max(box.high.back(), 1.0);
    double step = 0.25 * scale;
    double current = energy_of(box, x, ch);
    std::vector<double> trial(count);
    for (int it = 0; it < iterations && step > 1e-14 * scale; ++it) {
        // Gradient in cumulative coordinates.
        trial = x;
        for (std::size_t k = 0; k + 1 < count; ++k) {
            const double r_here = (x[k] - (k ? x[k - 1] : 0.0)) / box.dur[k];
            const double r_next = (x[k + 1] - x[k]) / box.dur[k + 1];
            const double g = (std::exp(r_here / ch.bandwidth_hz) - std::exp(r_next / ch.bandwidth_hz)) *
                             ch.noise_power_w / (ch.gain * ch.bandwidth_hz);
            trial[k] = x[k] - step * g * scale;
        }
        repair(box, trial);
        const double e = energy_of(box, trial, ch);
        if (e < current) {
            x.swap(trial);
            current = e;
            step *= 1.25;
        } else {
            step *= 0.5;
        }
    }
    // Exact cyclic coordinate sweeps: the interior optimum of one coordinate
    // equalizes the two adjacent rates.
    for (int sweep = 0; sweep < 400; ++sweep) {
        double moved = 0.0;
        for (std::size_t k = 0; k + 1 < count; ++k) {
            const double left = k ? x[k - 1] : 0.0;
            const double lo = std::max(box.low[k], left);
            const double hi = std::min(box.high[k], x[k + 1]);
            const double ideal =
                (left * box.dur[k + 1] + x[k + 1] * box.dur[k]) / (box.dur[k] + box.dur[k + 1]);
            const double next = std::clamp(ideal, lo, hi);
            moved = std::max(moved, std::abs(next - x[k]));
            x[k] = next;
        }
        if (moved <= 1e-13 * scale) break;
    }
}

RatePlan best_plan(const CumulativeBox& box, const OracleConfig& cfg) {
    ChannelModel ch;
    ch.bandwidth_hz = std::max(box.low.back() / box.t.back(), 1e-9);
    const std::size_t count = box.t.size();
    std::vector<std::vector<double>> starts;

    // Corner grid of the box, repaired to feasibility.
    const std::size_t corner_axes = std::min<std::size_t>(count, 8);
    for (std::size_t mask = 0; mask < (1u << corner_axes); ++mask) {
        std::vector<double> x(count);
        for (std::size_t k = 0; k < count; ++k)
            x[k] = (k < corner_axes && (mask >> k & 1u)) ? box.high[k] : box.low[k];
        repair(box, x);
        starts.push_back(std::move(x));
    }
    // Midline plus 16 seeded random points.
    {
        std::vector<double> x(count);
        for (std::size_t k = 0; k < count; ++k) x[k] = 0.5 * (box.low[k] + box.high[k]);
        repair(box, x);
        starts.push_back(std::move(x));
    }
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < 16; ++s) {
        std::vector<double> x(count);
        for (std::size_t k = 0; k < count; ++k)
            x[k] = box.low[k] + unit(rng) * (box.high[k] - box.low[k]);
        repair(box, x);
        starts.push_back(std::move(x));
    }

    // Dedupe starts that repaired onto the same point.
    std::set<std::vector<long long>> seen;
    std::vector<double> best;
    double best_energy = std::numeric_limits<double>::infinity();
    for (auto& x : starts) {
        std::vector<long long> key(count);
        const double quantum = std::max(box.high.back(), 1.0) * 1e-12;
        for (std::size_t k = 0; k < count; ++k) key[k] = llround(x[k] / quantum);
        if (!seen.insert(std::move(key)).second) continue;
        descend(box, ch, cfg.descent_iterations, x);
        const double e = energy_of(box, x, ch);
        if (e < best_energy) {
            best_energy = e;
            best = x;
        }
    }

    RatePlan plan;
    double prev = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        plan.segments.push_back({std::max(0.0, (best[k] - prev) / box.dur[k]), box.dur[k]});
        prev = best[k];
    }
    return plan;
}

void check_size(const StaircaseCurve& requirements) {
    if (requirements.corners.empty())
        throw std::invalid_argument("oracle_rate_control: empty requirement curve");
    if (requirements.corners.size() > 8)
        throw std::invalid_argument("oracle_rate_control: more than 8 corners");
}

}  // namespace

RatePlan oracle_rate_control(const StaircaseCurve& requirements, const OracleConfig& config) {
    check_size(requirements);
    return best_plan(make_box(requirements, std::nullopt, nullptr), config);
}

RatePlan oracle_rate_control(const StaircaseCurve& requirements, double buffer_cap_bits,
                             const OracleConfig& config) {
    check_size(requirements);
    return best_plan(make_box(requirements, buffer_cap_bits, nullptr), config);
}

RatePlan oracle_rate_control(const StaircaseCurve& requirements, const ArrivalCurve& arrival,
                             const OracleConfig& config) {
    check_size(requirements);
    return best_plan(make_box(requirements, std::nullopt, &arrival), config);
}

JointOracleResult oracle_joint(const Scenario& scenario, const OracleConfig& config) {
    validate_or_throw(scenario, "oracle_joint: invalid scenario");
    const int n_tasks = scenario.task_count();
    if (n_tasks > 4) throw std::invalid_argument("oracle_joint: more than 4 tasks");
    if (config.grid_points_per_axis < 10)
        throw std::invalid_argument("oracle_joint: grid_points_per_axis must be >= 10");

    const int grid = config.grid_points_per_axis;
    const double budget = scenario.budget_bits;

    std::vector<double> axis_cap(n_tasks, budget);
    for (int n = 0; n < n_tasks; ++n) {
        if (scenario.buffer_cap_bits) axis_cap[n] = std::min(axis_cap[n], *scenario.buffer_cap_bits);
        if (scenario.arrival)
            axis_cap[n] = std::min(
                axis_cap[n], eval_carry_forward(*scenario.arrival, scenario.tasks[n].deadline_s));
    }

    JointOracleResult best;
    best.objective = std::numeric_limits<double>::infinity();

    std::vector<int> idx(n_tasks, 0);
    Partition candidate;
    candidate.bits = Eigen::VectorXd::Zero(n_tasks);
    while (true) {
        double total = 0.0, prefix = 0.0;
        bool ok = true;
        for (int n = 0; n < n_tasks && ok; ++n) {
            candidate.bits[n] = axis_cap[n] * idx[n] / (grid - 1);
            total += candidate.bits[n];
            prefix += candidate.bits[n];
            if (scenario.arrival &&
                !tol::leq(prefix, eval_carry_forward(*scenario.arrival, scenario.tasks[n].deadline_s)))
                ok = false;
        }
        if (ok && tol::leq(total, budget)) {
            const StaircaseCurve req = requirement_curve(candidate, scenario.tasks);
            RatePlan plan;
            if (scenario.buffer_cap_bits)
                plan = oracle_rate_control(req, *scenario.buffer_cap_bits, config);
            else if (scenario.arrival)
                plan = oracle_rate_control(req, *scenario.arrival, config);
            else
                plan = oracle_rate_control(req, config);
            double objective = scenario.energy_weight * plan_energy(plan, scenario.channel);
            for (int n = 0; n < n_tasks && std::isfinite(objective); ++n) {
                const auto& task = scenario.tasks[n];
                if (task.error_weight == 0.0) continue;
                const double x = sample_count(candidate.bits[n], task);
                objective = x > 0.0 ? objective + task.error_weight * learning_error(x, task)
                                    : std::numeric_limits<double>::infinity();
            }
            if (objective < best.objective) {
                best.objective = objective;
                best.partition = candidate;
                best.plan = plan;
            }
        }
        int axis = 0;
        while (axis < n_tasks && ++idx[axis] == grid) idx[axis++] = 0;
        if (axis == n_tasks) break;
    }
    if (!std::isfinite(best.objective)) throw InfeasibleError("oracle_joint: no feasible grid point");
    return best;
}

}  // namespace txsched
