#include "txsched/merged.hpp"

#include "txsched/model.hpp"
#include "txsched/partition.hpp"
#include "txsched/rate_control.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace txsched {

namespace {

constexpr double kSampleFloor = 1e-12;  // keeps the error term smooth at zero bits
constexpr double kClipBits = 1e-9;      // final snap-to-zero threshold

double eval_carry_forward(const ArrivalCurve& arrival, double t_s) {
    double value = 0.0;
    for (const auto& e : arrival.events) {
        if (e.time_s > t_s) break;
        value = e.cumulative_bits;
    }
    return value;
}

// The scalarized program in scaled variables z = [split_bits/sB ; rates/sR],
// every constraint row a.z <= b expressed in budget units so rows, slacks and
// multipliers all live near O(1).
struct Program {
    const Scenario* scenario = nullptr;
    std::vector<int> free_tasks;     // tasks with a live error term
    std::vector<double> instants;    // epoch ends, seconds
    std::vector<double> durations;   // epoch lengths, seconds
    double bits_scale = 1.0;         // sB
    double rate_scale = 1.0;         // sR = sB / final deadline

    Eigen::MatrixXd rows;
    Eigen::VectorXd rhs;
    int row_budget = -1;
    std::vector<int> rows_transmission;  // per deadline
    std::vector<int> rows_buffer;        // per deadline (limited case)
    std::vector<int> rows_task_cap;      // per free task (limited case)
    std::vector<int> rows_arrival;       // per instant (bursty case)
    std::vector<int> rows_d_floor;       // per free task
    std::vector<int> rows_r_floor;       // per epoch

    int n_free() const { return static_cast<int>(free_tasks.size()); }
    int n_epochs() const { return static_cast<int>(instants.size()); }
    int n_vars() const { return n_free() + n_epochs(); }

    double objective(const Eigen::VectorXd& z) const {
        const auto& sc = *scenario;
        double value = 0.0;
        for (int i = 0; i < n_free(); ++i) {
            const auto& task = sc.tasks[free_tasks[i]];
            const double x = z[i] * bits_scale / task.bits_per_sample + task.prior_samples + kSampleFloor;
            value += task.error_weight * task.amplitude * std::pow(x, -task.decay);
        }
        const double w = sc.channel.noise_power_w / sc.channel.gain;
        for (int k = 0; k < n_epochs(); ++k) {
            const double rate = z[n_free() + k] * rate_scale;
            value += sc.energy_weight * std::expm1(rate / sc.channel.bandwidth_hz) * w * durations[k];
        }
        return value;
    }

    void derivatives(const Eigen::VectorXd& z, Eigen::VectorXd& grad, Eigen::VectorXd& hess) const {
        const auto& sc = *scenario;
        grad.setZero(n_vars());
        hess.setZero(n_vars());
        for (int i = 0; i < n_free(); ++i) {
            const auto& task = sc.tasks[free_tasks[i]];
            const double du = bits_scale / task.bits_per_sample;  // dx/dz
            const double x = z[i] * du + task.prior_samples + kSampleFloor;
            const double base = task.error_weight * task.amplitude;
            grad[i] = -base * task.decay * std::pow(x, -task.decay - 1.0) * du;
            hess[i] = base * task.decay * (task.decay + 1.0) * std::pow(x, -task.decay - 2.0) * du * du;
        }
        const double w = sc.channel.noise_power_w / sc.channel.gain;
        for (int k = 0; k < n_epochs(); ++k) {
            const int v = n_free() + k;
            const double rate = z[v] * rate_scale;
            const double du = rate_scale / sc.channel.bandwidth_hz;
            const double e = std::exp(rate / sc.channel.bandwidth_hz);
            grad[v] = sc.energy_weight * e * w * durations[k] * du;
            hess[v] = sc.energy_weight * e * w * durations[k] * du * du;
        }
    }
};

Program build_program(const Scenario& scenario) {
    Program prog;
    prog.scenario = &scenario;
    const int n_tasks = scenario.task_count();
    for (int n = 0; n < n_tasks; ++n) {
        const auto& t = scenario.tasks[n];
        if (t.error_weight * t.amplitude * t.decay > 0.0) prog.free_tasks.push_back(n);
    }

    // Epoch grid: deadlines, densified with arrival instants in the bursty case.
    if (scenario.arrival) {
        StaircaseCurve deadlines;
        for (const auto& t : scenario.tasks) deadlines.corners.push_back({t.deadline_s, 0.0});
        prog.instants = merged_instants(deadlines, *scenario.arrival);
    } else {
        for (const auto& t : scenario.tasks) prog.instants.push_back(t.deadline_s);
    }
    double previous = 0.0;
    for (double t : prog.instants) {
        prog.durations.push_back(t - previous);
        previous = t;
    }

    prog.bits_scale = scenario.budget_bits;
    prog.rate_scale = scenario.budget_bits / scenario.final_deadline_s();

    const int nf = prog.n_free();
    const int ne = prog.n_epochs();
    const int nv = prog.n_vars();
    const double sB = prog.bits_scale;

    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    auto add_row = [&](const Eigen::VectorXd& a, double b) {
        rows.push_back(a);
        rhs.push_back(b);
        return static_cast<int>(rows.size()) - 1;
    };

    // Cumulative scaled bits transmitted by epoch k: sum_{m<=k} z_r[m] * Td[m],
    // with Td in units where rate_scale * Td = bits_scale * (T / t_final).
    Eigen::VectorXd cum_rate_row = Eigen::VectorXd::Zero(nv);
    std::vector<Eigen::VectorXd> cum_by_instant(ne);
    for (int k = 0; k < ne; ++k) {
        cum_rate_row[nf + k] = prog.durations[k] * prog.rate_scale / sB;
        cum_by_instant[k] = cum_rate_row;
    }

    // Budget.
    {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        for (int i = 0; i < nf; ++i) a[i] = 1.0;
        prog.row_budget = add_row(a, scenario.budget_bits / sB);
    }
    // Delivery by each deadline.
    for (int j = 0; j < n_tasks; ++j) {
        const double t_j = scenario.tasks[j].deadline_s;
        int k = 0;
        while (k + 1 < ne && prog.instants[k] < t_j * (1.0 - 1e-12)) ++k;
        Eigen::VectorXd a = -cum_by_instant[k];
        for (int i = 0; i < nf; ++i)
            if (prog.free_tasks[i] <= j) a[i] += 1.0;
        prog.rows_transmission.push_back(add_row(a, 0.0));
    }
    // Buffer walls and per-task caps.
    if (scenario.buffer_cap_bits) {
        const double cap = *scenario.buffer_cap_bits / sB;
        for (int j = 0; j < n_tasks; ++j) {
            Eigen::VectorXd a = cum_by_instant[j];
            for (int i = 0; i < nf; ++i)
                if (prog.free_tasks[i] <= j - 1) a[i] -= 1.0;
            prog.rows_buffer.push_back(add_row(a, cap));
        }
        for (int i = 0; i < nf; ++i) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
            a[i] = 1.0;
            prog.rows_task_cap.push_back(add_row(a, cap));
        }
    }
    // Arrival walls at every epoch instant.
    if (scenario.arrival) {
        for (int k = 0; k < ne; ++k) {
            const double avail = eval_carry_forward(*scenario.arrival, prog.instants[k]);
            prog.rows_arrival.push_back(add_row(cum_by_instant[k], avail / sB));
        }
    }
    // Variable floors.
    for (int i = 0; i < nf; ++i) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        a[i] = -1.0;
        prog.rows_d_floor.push_back(add_row(a, 0.0));
    }
    for (int k = 0; k < ne; ++k) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
        a[nf + k] = -1.0;
        prog.rows_r_floor.push_back(add_row(a, 0.0));
    }

    prog.rows.resize(static_cast<Eigen::Index>(rows.size()), nv);
    prog.rhs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        prog.rows.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        prog.rhs[static_cast<Eigen::Index>(i)] = rhs[i];
    }
    return prog;
}

// Strictly interior start: near-equal split shrunk inside every bound, rates
// from the midline of the feasible tunnel of that split.
Eigen::VectorXd interior_start(const Program& prog) {
    const auto& sc = *prog.scenario;
    const int nf = prog.n_free();
    const int ne = prog.n_epochs();
    const int n_tasks = sc.task_count();
    const double sB = prog.bits_scale;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(prog.n_vars());
    double prefix = 0.0;
    for (int i = 0; i < nf; ++i) {
        double bits = 0.9 * sc.budget_bits / nf;
        if (sc.buffer_cap_bits) bits = std::min(bits, 0.9 * *sc.buffer_cap_bits);
        if (sc.arrival) {
            const double bound =
                0.9 * eval_carry_forward(*sc.arrival, sc.tasks[prog.free_tasks[i]].deadline_s);
            bits = std::min(bits, bound - prefix);
        }
        if (!(bits > 0.0))
            throw InfeasibleError("merged: no strictly interior split (arrival pins a prefix)");
        z[i] = bits / sB;
        prefix += bits;
    }

    // Requirement prefix of the start split at each deadline.
    std::vector<double> req_prefix(n_tasks);
    {
        double cum = 0.0;
        int fi = 0;
        for (int n = 0; n < n_tasks; ++n) {
            if (fi < nf && prog.free_tasks[fi] == n) cum += z[fi++] * sB;
            req_prefix[n] = cum;
        }
    }

    // Tunnel walls at epoch instants for the start split.
    std::vector<double> lower(ne, 0.0), upper(ne);
    for (int k = 0; k < ne; ++k) {
        int last_deadline = -1;
        while (last_deadline + 1 < n_tasks &&
               sc.tasks[last_deadline + 1].deadline_s <= prog.instants[k] * (1.0 + 1e-12))
            ++last_deadline;
        lower[k] = last_deadline >= 0 ? req_prefix[last_deadline] : 0.0;
        if (sc.buffer_cap_bits) {
            // Epoch grid equals the deadline grid in the limited case.
            upper[k] = (k > 0 ? req_prefix[k - 1] : 0.0) + *sc.buffer_cap_bits;
        } else if (sc.arrival) {
            upper[k] = eval_carry_forward(*sc.arrival, prog.instants[k]);
        } else {
            upper[k] = req_prefix[n_tasks - 1] * 1.5 + sc.budget_bits;
        }
    }

    double x_prev = 0.0;
    for (int k = 0; k < ne; ++k) {
        const double floor = std::max(lower[k], x_prev);
        if (!(upper[k] - floor > 0.0))
            throw InfeasibleError("merged: no strictly interior schedule (tunnel pinched)");
        double x = 0.5 * (floor + upper[k]);
        x = std::max(x, x_prev + 1e-9 * sB * (prog.durations[k] / sc.final_deadline_s()));
        if (!(x < upper[k])) x = 0.5 * (x_prev + upper[k]);
        const double rate = (x - x_prev) / prog.durations[k];
        z[nf + k] = rate / prog.rate_scale;
        x_prev = x;
    }

    const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
    if (slack.minCoeff() <= 0.0)
        throw InfeasibleError("merged: failed to construct a strictly interior start");
    return z;
}

struct BarrierOutcome {
    Eigen::VectorXd z;
    Eigen::VectorXd multipliers;  // scaled units, one per row
    int iterations = 0;
    double mu_final = 0.0;
};

double barrier_value(const Program& prog, const Eigen::VectorXd& z, double mu) {
    const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
    if (slack.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    return prog.objective(z) - mu * slack.array().log().sum();
}

BarrierOutcome minimize_barrier(const Program& prog, Eigen::VectorXd z, const MergedOptions& opt) {
    const int m = static_cast<int>(prog.rows.rows());
    const int nv = prog.n_vars();
    BarrierOutcome out;
    double mu = 1.0;

    Eigen::VectorXd grad(nv), hess(nv);
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        for (int it = 0; it < opt.max_newton; ++it) {
            const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
            prog.derivatives(z, grad, hess);
            Eigen::VectorXd g = grad + mu * prog.rows.transpose() * slack.cwiseInverse();
            Eigen::MatrixXd H = hess.asDiagonal();
            H.noalias() += prog.rows.transpose() *
                           (mu * slack.array().square().inverse()).matrix().asDiagonal() * prog.rows;
            const Eigen::VectorXd dz = -H.ldlt().solve(g);
            const double decrement = -g.dot(dz);
            const double scale = std::max(1.0, std::abs(prog.objective(z)));
            if (decrement * 0.5 <= std::max(1e-16 * scale, 1e-7 * mu)) break;

            double step = 1.0;
            for (int i = 0; i < m; ++i) {
                const double along = prog.rows.row(i).dot(dz);
                if (along > 0.0) step = std::min(step, 0.99 * slack[i] / along);
            }
            const double phi0 = barrier_value(prog, z, mu);
            const double slope = g.dot(dz);
            while (step > 1e-18 &&
                   barrier_value(prog, z + step * dz, mu) > phi0 + 1e-4 * step * slope)
                step *= 0.5;
            z += step * dz;
            ++out.iterations;
        }
        if (m * mu <= opt.gap_rel * std::max(std::abs(prog.objective(z)), 1e-9)) break;
        mu /= 10.0;
    }

    out.z = z;
    out.mu_final = mu;
    const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
    out.multipliers = mu * slack.cwiseInverse();
    return out;
}

std::pair<double, double> residuals_scaled(const Program& prog, const Eigen::VectorXd& z,
                                           const Eigen::VectorXd& nu);

// Dual crossover: with the primal snapped onto its active set (floors clipped,
// rates on the walls), refit the multipliers of the near-active rows by
// sign-constrained least squares on the stationarity condition. Barrier
// estimates are accurate only to the slack rounding (~1e-5 relative); the
// refit reaches machine precision when the active set is identified.
Eigen::VectorXd refine_multipliers(const Program& prog, const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& barrier_nu) {
    const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
    Eigen::VectorXd grad(prog.n_vars()), hess(prog.n_vars());
    prog.derivatives(z, grad, hess);

    auto fit_for = [&](double activation) {
        std::vector<int> support;
        for (Eigen::Index i = 0; i < slack.size(); ++i) {
            const double scale = std::max(std::abs(prog.rhs[i]), 1.0);
            if (slack[i] <= activation * scale || barrier_nu[i] * slack[i] > 1e-7)
                support.push_back(i);
        }
        Eigen::VectorXd nu = Eigen::VectorXd::Zero(slack.size());
        for (int round = 0; round < 48 && !support.empty(); ++round) {
            Eigen::MatrixXd at(prog.n_vars(), support.size());
            for (std::size_t s = 0; s < support.size(); ++s)
                at.col(static_cast<Eigen::Index>(s)) = prog.rows.row(support[s]).transpose();
            Eigen::MatrixXd gram = at.transpose() * at;
            gram.diagonal().array() += 1e-13 * std::max(gram.diagonal().maxCoeff(), 1.0);
            const Eigen::VectorXd fit = gram.ldlt().solve(at.transpose() * (-grad));
            int worst = -1;
            double most_negative = -1e-12;
            for (std::size_t s = 0; s < support.size(); ++s)
                if (fit[static_cast<Eigen::Index>(s)] < most_negative) {
                    most_negative = fit[static_cast<Eigen::Index>(s)];
                    worst = static_cast<int>(s);
                }
            if (worst < 0) {
                for (std::size_t s = 0; s < support.size(); ++s)
                    nu[support[s]] = std::max(fit[static_cast<Eigen::Index>(s)], 0.0);
                return nu;
            }
            support.erase(support.begin() + worst);
        }
        return nu;
    };

    Eigen::VectorXd best = barrier_nu;
    auto best_res = residuals_scaled(prog, z, best);
    for (double activation : {1e-7, 1e-6, 1e-5, 1e-4}) {
        const Eigen::VectorXd nu = fit_for(activation);
        const auto res = residuals_scaled(prog, z, nu);
        if (std::max(res.first, res.second) < std::max(best_res.first, best_res.second)) {
            best = nu;
            best_res = res;
        }
    }
    return best;
}

// Active-set Newton polish: pin the rows the barrier ended on as equalities
// and solve the reduced problem to machine precision, dropping rows whose
// multiplier comes out negative. Clears the sqrt(mu)-sized drift the central
// path leaves along weakly-active (degenerate) constraints.
struct Polished {
    Eigen::VectorXd z;
    Eigen::VectorXd nu;
};

std::optional<Polished> newton_polish(const Program& prog, Eigen::VectorXd z, double theta) {
    const Eigen::Index m = prog.rows.rows();
    const int nv = prog.n_vars();
    std::vector<int> active;
    {
        const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
        for (Eigen::Index i = 0; i < m; ++i)
            if (slack[i] <= theta * std::max(std::abs(prog.rhs[i]), 1.0))
                active.push_back(static_cast<int>(i));
    }

    Eigen::VectorXd grad(nv), hess(nv);
    const Eigen::VectorXd z_in = z;
    for (int round = 0; round < 16; ++round) {
        const int na = static_cast<int>(active.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nv + na, nv + na);
        Eigen::VectorXd rhs_vec(nv + na);
        Eigen::VectorXd nu_active = Eigen::VectorXd::Zero(na);

        z = z_in;
        for (int it = 0; it < 25; ++it) {
            prog.derivatives(z, grad, hess);
            kkt.topLeftCorner(nv, nv) = hess.asDiagonal();
            for (int a = 0; a < na; ++a) {
                kkt.block(0, nv + a, nv, 1) = prog.rows.row(active[a]).transpose();
                kkt.block(nv + a, 0, 1, nv) = prog.rows.row(active[a]);
                kkt(nv + a, nv + a) = -1e-13;
            }
            rhs_vec.head(nv) = -grad;
            for (int a = 0; a < na; ++a)
                rhs_vec[nv + a] = prog.rhs[active[a]] - prog.rows.row(active[a]).dot(z);
            const Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(kkt).solve(rhs_vec);
            Eigen::VectorXd dz = sol.head(nv);
            nu_active = sol.tail(na);

            // Keep the error terms inside their domain while stepping.
            double step = 1.0;
            for (int i = 0; i < prog.n_free(); ++i)
                if (dz[i] < 0.0 && z[i] + dz[i] < 1e-13)
                    step = std::min(step, (1e-13 - z[i]) / dz[i]);
            z += step * dz;
            if (dz.norm() * step <= 1e-14 * (1.0 + z.norm())) break;
        }

        int worst = -1;
        double most_negative = -1e-10;
        for (int a = 0; a < na; ++a)
            if (nu_active[a] < most_negative) {
                most_negative = nu_active[a];
                worst = a;
            }
        if (worst >= 0) {
            active.erase(active.begin() + worst);
            continue;
        }

        const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
        for (Eigen::Index i = 0; i < m; ++i)
            if (slack[i] < -1e-9 * std::max(std::abs(prog.rhs[i]), 1.0)) return std::nullopt;
        if (!z.allFinite()) return std::nullopt;

        Polished out;
        out.z = z;
        out.nu = Eigen::VectorXd::Zero(m);
        for (int a = 0; a < na; ++a) out.nu[active[a]] = std::max(nu_active[a], 0.0);
        return out;
    }
    return std::nullopt;
}

KktMultipliers collect_multipliers(const Program& prog, const Eigen::VectorXd& scaled) {
    const double inv = 1.0 / prog.bits_scale;  // rows are in budget units
    KktMultipliers mult;
    auto gather = [&](const std::vector<int>& idx) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) v[static_cast<Eigen::Index>(i)] = scaled[idx[i]] * inv;
        return v;
    };
    mult.budget = scaled[prog.row_budget] * inv;
    mult.transmission = gather(prog.rows_transmission);
    mult.buffer = gather(prog.rows_buffer);
    mult.arrival = gather(prog.rows_arrival);

    const int n_tasks = prog.scenario->task_count();
    mult.task_cap = Eigen::VectorXd::Zero(n_tasks);
    mult.partition_floor = Eigen::VectorXd::Zero(n_tasks);
    for (std::size_t i = 0; i < prog.rows_task_cap.size(); ++i)
        mult.task_cap[prog.free_tasks[i]] = scaled[prog.rows_task_cap[i]] * inv;
    for (std::size_t i = 0; i < prog.rows_d_floor.size(); ++i)
        mult.partition_floor[prog.free_tasks[i]] = scaled[prog.rows_d_floor[i]] * inv;
    mult.rate_floor = gather(prog.rows_r_floor);
    return mult;
}

// Reconstructs the scaled variable vector from a primal pair.
Eigen::VectorXd pack_variables(const Program& prog, const Partition& partition,
                               const RatePlan& plan) {
    const int nf = prog.n_free();
    const int ne = prog.n_epochs();
    Eigen::VectorXd z(prog.n_vars());
    for (int i = 0; i < nf; ++i) z[i] = partition.bits[prog.free_tasks[i]] / prog.bits_scale;
    double t_prev = 0.0, x_prev = 0.0;
    for (int k = 0; k < ne; ++k) {
        const double x = curve_eval(plan, std::min(prog.instants[k], plan.total_duration_s()));
        z[nf + k] = ((x - x_prev) / prog.durations[k]) / prog.rate_scale;
        t_prev = prog.instants[k];
        x_prev = x;
    }
    (void)t_prev;
    return z;
}

Eigen::VectorXd pack_multipliers(const Program& prog, const KktMultipliers& mult) {
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(prog.rows.rows());
    const double sB = prog.bits_scale;
    auto scatter = [&](const std::vector<int>& idx, const Eigen::VectorXd& v) {
        for (std::size_t i = 0; i < idx.size() && static_cast<Eigen::Index>(i) < v.size(); ++i)
            nu[idx[i]] = v[static_cast<Eigen::Index>(i)] * sB;
    };
    nu[prog.row_budget] = mult.budget * sB;
    scatter(prog.rows_transmission, mult.transmission);
    scatter(prog.rows_buffer, mult.buffer);
    scatter(prog.rows_arrival, mult.arrival);
    for (std::size_t i = 0; i < prog.rows_task_cap.size(); ++i)
        if (mult.task_cap.size() == prog.scenario->task_count())
            nu[prog.rows_task_cap[i]] = mult.task_cap[prog.free_tasks[i]] * sB;
    for (std::size_t i = 0; i < prog.rows_d_floor.size(); ++i)
        if (mult.partition_floor.size() == prog.scenario->task_count())
            nu[prog.rows_d_floor[i]] = mult.partition_floor[prog.free_tasks[i]] * sB;
    scatter(prog.rows_r_floor, mult.rate_floor);
    return nu;
}

std::pair<double, double> residuals_scaled(const Program& prog, const Eigen::VectorXd& z,
                                           const Eigen::VectorXd& nu) {
    Eigen::VectorXd grad(prog.n_vars()), hess(prog.n_vars());
    prog.derivatives(z, grad, hess);
    const Eigen::VectorXd lagr = grad + prog.rows.transpose() * nu;
    const double scale = std::max(std::abs(prog.objective(z)), 1e-12);

    double stationarity = 0.0;
    for (int v = 0; v < prog.n_vars(); ++v) {
        // At an active floor without an explicit floor multiplier only a
        // negative Lagrangian gradient counts against stationarity.
        const bool at_floor = z[v] <= 1e-9;
        const int floor_row =
            v < prog.n_free() ? prog.rows_d_floor[v] : prog.rows_r_floor[v - prog.n_free()];
        const bool floor_mult_given = nu[floor_row] > 0.0;
        const double violation =
            (at_floor && !floor_mult_given) ? std::max(0.0, -lagr[v]) : std::abs(lagr[v]);
        stationarity = std::max(stationarity, violation);
    }

    const Eigen::VectorXd slack = prog.rhs - prog.rows * z;
    double complementarity = 0.0;
    for (Eigen::Index i = 0; i < slack.size(); ++i)
        complementarity = std::max(complementarity, std::abs(nu[i] * slack[i]));
    return {stationarity / scale, complementarity / scale};
}

void require_normalized(const Scenario& scenario) {
    if (!(scenario.energy_weight > 0.0))
        throw std::invalid_argument("merged: energy weight must be > 0");
    double total = scenario.energy_weight;
    for (const auto& t : scenario.tasks) total += t.error_weight;
    if (std::abs(total - 1.0) > 1e-6)
        throw std::invalid_argument("merged: weights must be normalized to sum to 1");
}

RatePlan matching_rate_schedule(const Scenario& scenario, const Partition& partition) {
    const StaircaseCurve req = requirement_curve(partition, scenario.tasks);
    if (scenario.buffer_cap_bits) return sp_limited(req, *scenario.buffer_cap_bits);
    if (scenario.arrival) return sp_bursty(req, *scenario.arrival);
    return sp_unlimited(req);
}

SolveReport make_report(const Scenario& scenario, const Partition& partition, const RatePlan& plan,
                        const KktMultipliers& mult, int iterations) {
    SolveReport report;
    report.objective = weighted_objective(partition, plan, scenario);
    report.energy_j = plan_energy(plan, scenario.channel);
    report.per_task_error.resize(scenario.task_count());
    for (int n = 0; n < scenario.task_count(); ++n) {
        const double x = sample_count(partition.bits[n], scenario.tasks[n]);
        report.per_task_error[n] =
            x > 0.0 ? learning_error(x, scenario.tasks[n]) : std::numeric_limits<double>::infinity();
    }
    report.multiplier_budget = mult.budget;
    report.multipliers_transmission = mult.transmission;
    report.iterations = iterations;
    return report;
}

}  // namespace

MergedSolution solve_merged(const Scenario& scenario, const MergedOptions& options) {
    validate_or_throw(scenario, "solve_merged: invalid scenario");
    require_normalized(scenario);
    if (scenario.buffer_cap_bits && scenario.arrival)
        throw std::invalid_argument("solve_merged: buffer cap and bursty arrival together are unsupported");

    Program prog = build_program(scenario);
    const int n_tasks = scenario.task_count();

    MergedSolution sol;
    sol.partition.bits = Eigen::VectorXd::Zero(n_tasks);

    if (prog.n_free() == 0) {
        // Pure energy objective: transmit nothing.
        sol.plan.segments = {{0.0, scenario.final_deadline_s()}};
        sol.multipliers.transmission = Eigen::VectorXd::Zero(n_tasks);
        sol.report = make_report(scenario, sol.partition, sol.plan, sol.multipliers, 0);
        sol.report.converged = true;
        return sol;
    }

    const Eigen::VectorXd start = interior_start(prog);
    BarrierOutcome outcome = minimize_barrier(prog, start, options);

    for (int i = 0; i < prog.n_free(); ++i) {
        const int n = prog.free_tasks[i];
        double bits = outcome.z[i] * prog.bits_scale;
        if (bits < kClipBits && scenario.tasks[n].prior_samples > 0.0) bits = 0.0;
        sol.partition.bits[n] = bits;
    }

    // Exact rate finish, then an active-set polish of both primal and dual;
    // keep the best certified candidate.
    auto snap_partition = [&](const Eigen::VectorXd& z) {
        Partition part;
        part.bits = Eigen::VectorXd::Zero(n_tasks);
        for (int i = 0; i < prog.n_free(); ++i) {
            const int n = prog.free_tasks[i];
            double bits = z[i] * prog.bits_scale;
            if (bits < kClipBits && scenario.tasks[n].prior_samples > 0.0) bits = 0.0;
            part.bits[n] = bits;
        }
        return part;
    };

    struct Candidate {
        Partition partition;
        RatePlan plan;
        Eigen::VectorXd nu;
        double stationarity = 0.0;
        double complementarity = 0.0;
        double objective = 0.0;
    };
    auto finish = [&](const Eigen::VectorXd& z_raw, const Eigen::VectorXd& nu_seed) {
        Candidate c;
        c.partition = snap_partition(z_raw);
        c.plan = matching_rate_schedule(scenario, c.partition);
        const Eigen::VectorXd z = pack_variables(prog, c.partition, c.plan);
        c.nu = refine_multipliers(prog, z, nu_seed);
        const auto res = residuals_scaled(prog, z, c.nu);
        c.stationarity = res.first;
        c.complementarity = res.second;
        c.objective = weighted_objective(c.partition, c.plan, scenario);
        return c;
    };

    Candidate best = finish(outcome.z, outcome.multipliers);
    {
        const Eigen::VectorXd z0 = pack_variables(prog, best.partition, best.plan);
        for (double theta : {1e-7, 3e-6, 1e-4}) {
            const auto polished = newton_polish(prog, z0, theta);
            if (!polished) continue;
            const Candidate c = finish(polished->z, polished->nu);
            const bool better =
                std::max(c.stationarity, c.complementarity) <
                std::max(best.stationarity, best.complementarity);
            if (better) best = c;
        }
    }

    sol.partition = best.partition;
    sol.plan = best.plan;
    sol.multipliers = collect_multipliers(prog, best.nu);
    const double stat = best.stationarity;
    const double comp = best.complementarity;
    sol.report = make_report(scenario, sol.partition, sol.plan, sol.multipliers, outcome.iterations);
    sol.report.kkt_stationarity_residual = stat;
    sol.report.kkt_complementarity_residual = comp;
    sol.report.converged = stat <= options.kkt_tol && comp <= options.kkt_tol;
    if (!sol.report.converged) {
        std::ostringstream msg;
        msg << "solve_merged: uncertified after " << outcome.iterations
            << " Newton steps (stationarity " << stat << ", complementarity " << comp << ")";
        throw ConvergenceError(msg.str(), stat, comp);
    }
    return sol;
}

MergedSolution solve_stratified(const Scenario& scenario) {
    validate_or_throw(scenario, "solve_stratified: invalid scenario");
    if (scenario.buffer_cap_bits && scenario.arrival)
        throw std::invalid_argument("solve_stratified: buffer cap and bursty arrival together are unsupported");

    PartitionSolution part;
    if (scenario.buffer_cap_bits)
        part = partition_capped(scenario.tasks, scenario.budget_bits, *scenario.buffer_cap_bits);
    else if (scenario.arrival)
        part = partition_arrival_constrained(scenario.tasks, scenario.budget_bits, *scenario.arrival);
    else
        part = partition_unconstrained(scenario.tasks, scenario.budget_bits);

    MergedSolution sol;
    sol.partition = part.partition;
    sol.plan = matching_rate_schedule(scenario, sol.partition);

    // Rate-side multipliers of the energy stage, recovered from the schedule.
    const int n_tasks = scenario.task_count();
    Eigen::VectorXd water(n_tasks);
    double t_prev = 0.0, x_prev = 0.0;
    const auto& ch = scenario.channel;
    for (int j = 0; j < n_tasks; ++j) {
        const double t_j = scenario.tasks[j].deadline_s;
        const double x = curve_eval(sol.plan, std::min(t_j, sol.plan.total_duration_s()));
        const double rate = (x - x_prev) / (t_j - t_prev);
        water[j] = std::exp(rate / ch.bandwidth_hz) * ch.noise_power_w / (ch.gain * ch.bandwidth_hz);
        t_prev = t_j;
        x_prev = x;
    }
    sol.multipliers.budget = part.multiplier;
    sol.multipliers.transmission.resize(n_tasks);
    for (int j = 0; j < n_tasks; ++j)
        sol.multipliers.transmission[j] = water[j] - (j + 1 < n_tasks ? water[j + 1] : 0.0);

    sol.report = make_report(scenario, sol.partition, sol.plan, sol.multipliers, 0);

    // Residuals of the two stages' own optimality systems.
    double stat = 0.0;
    for (int n = 0; n < n_tasks; ++n) {
        const double bits = sol.partition.bits[n];
        if (bits <= 0.0 || part.multiplier <= 0.0) continue;
        const double gain = marginal_error_reduction(bits, scenario.tasks[n]);
        stat = std::max(stat, std::abs(gain - part.multiplier) / part.multiplier);
    }
    sol.report.kkt_stationarity_residual = stat;
    sol.report.kkt_complementarity_residual =
        std::abs(part.multiplier * part.budget_residual) /
        std::max(1e-12, std::abs(sol.report.objective));
    sol.report.converged = true;
    return sol;
}

std::pair<double, double> kkt_residuals(const Partition& partition, const RatePlan& plan,
                                        const KktMultipliers& multipliers,
                                        const Scenario& scenario) {
    if (partition.bits.size() != scenario.task_count())
        throw std::invalid_argument("kkt_residuals: partition/task size mismatch");
    Program prog = build_program(scenario);
    const Eigen::VectorXd z = pack_variables(prog, partition, plan);
    const Eigen::VectorXd nu = pack_multipliers(prog, multipliers);
    return residuals_scaled(prog, z, nu);
}

}  // namespace txsched
