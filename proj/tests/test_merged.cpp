#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "txsched/instance_gen.hpp"
#include "txsched/merged.hpp"
#include "txsched/model.hpp"
#include "txsched/oracle.hpp"
#include "txsched/partition.hpp"
#include "txsched/rate_control.hpp"
#include "txsched/run.hpp"

#include <cmath>
#include <random>

using namespace txsched;
using namespace txsched::testing;

namespace {

const ChannelModel kUnitChannel{1.0, 1.0, 1.0};

Scenario single_task_toy() {
    Scenario sc;
    sc.tasks = {task(1, 1, 0, 1, 1, 0.5)};
    sc.budget_bits = 10.0;
    sc.energy_weight = 0.5;
    sc.channel = kUnitChannel;
    return sc;
}

// Independent 1-D verifier for the toy: golden-section on
// g(D) = 0.5 (e^D - 1) + 0.5 / D.
double golden_section_toy() {
    auto g = [](double d) { return 0.5 * (std::exp(d) - 1.0) + 0.5 / d; };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 1e-6, hi = 5.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    for (int it = 0; it < 300; ++it) {
        if (g(x1) < g(x2)) {
            hi = x2;
            x2 = x1;
            x1 = hi - phi * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + phi * (hi - lo);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("single-task toy matches the 1-D oracle and its analytic multipliers") {
    const Scenario sc = single_task_toy();
    const auto sol = solve_merged(sc);
    const double d_star = golden_section_toy();

    CHECK(close(d_star, 0.70346742249839165, 1e-6));  // oracle agrees with the frozen value
    CHECK(close(sol.partition.bits[0], d_star, 1e-3));
    CHECK(close(sol.report.objective, 1.2211386472474871, 1e-3));
    CHECK(sol.report.converged);
    CHECK(sol.report.kkt_stationarity_residual <= 1e-6);
    CHECK(sol.report.kkt_complementarity_residual <= 1e-6);
    CHECK(close(sol.report.multipliers_transmission[0], 1.0103736793059288, 1e-4));
    CHECK(sol.report.multiplier_budget == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("pure energy weighting yields the all-zero solution exactly") {
    Scenario sc = single_task_toy();
    sc.tasks[0].error_weight = 0.0;
    sc.energy_weight = 1.0;
    const auto sol = solve_merged(sc);
    CHECK(sol.partition.bits[0] == 0.0);
    CHECK(sol.report.objective == 0.0);
    REQUIRE(sol.plan.segments.size() == 1);
    CHECK(sol.plan.segments[0].rate_bps == 0.0);
    CHECK(sol.report.converged);
}

TEST_CASE("kkt_residuals behaves like a certificate") {
    const Scenario sc = single_task_toy();
    Partition part;
    part.bits = Eigen::VectorXd::Constant(1, 0.70346742249839165);
    const RatePlan p = plan({{0.70346742249839165, 1.0}});

    SUBCASE("analytic multipliers certify the optimum") {
        KktMultipliers mult;
        mult.budget = 0.0;
        mult.transmission = Eigen::VectorXd::Constant(1, 1.0103736793059288);
        const auto [stat, comp] = kkt_residuals(part, p, mult, sc);
        CHECK(stat <= 1e-8);
        CHECK(comp <= 1e-8);
    }
    SUBCASE("zero multipliers at an interior point: vacuous slackness, real gradient") {
        Partition interior;
        interior.bits = Eigen::VectorXd::Constant(1, 2.0);
        const auto [stat, comp] =
            kkt_residuals(interior, plan({{3.0, 1.0}}), KktMultipliers{}, sc);
        CHECK(comp == doctest::Approx(0.0));
        CHECK(stat > 1e-3);
    }
    SUBCASE("stationarity grows linearly in a primal perturbation") {
        KktMultipliers mult;
        mult.budget = 0.0;
        mult.transmission = Eigen::VectorXd::Constant(1, 1.0103736793059288);
        auto stationarity_at = [&](double eps) {
            Partition shifted;
            shifted.bits = Eigen::VectorXd::Constant(1, 0.70346742249839165 + eps);
            const RatePlan moved = plan({{0.70346742249839165 + eps, 1.0}});
            return kkt_residuals(shifted, moved, mult, sc).first;
        };
        const double r1 = stationarity_at(1e-3);
        const double r2 = stationarity_at(2e-3);
        CHECK(r1 > 1e-6);
        CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(0.25));
    }
}

TEST_CASE("model derivatives used by the solver match central differences") {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const auto spec = task(1, 1 + 3 * unit(rng), 2 * unit(rng), 0.5 + 5 * unit(rng),
                               0.3 + unit(rng), 0.2 + 0.6 * unit(rng));
        const double bits = 0.2 + 3 * unit(rng);
        const double h = 1e-5 * std::max(1.0, bits);
        auto err = [&](double d) {
            return spec.error_weight * learning_error(sample_count(d, spec), spec);
        };
        const double numeric = (err(bits + h) - err(bits - h)) / (2 * h);
        CHECK(close(-numeric, marginal_error_reduction(bits, spec), 1e-6));

        const ChannelModel ch{0.5 + unit(rng), 0.5 + unit(rng), 0.5 + unit(rng)};
        const double rate = 2.0 * unit(rng);
        const double duration = 0.5 + unit(rng);
        auto energy = [&](double r) {
            return plan_energy(RatePlan{{{r, duration}}}, ch);
        };
        const double hr = 1e-6 * std::max(1.0, rate);
        const double numeric_r = (energy(rate + hr) - energy(rate - hr)) / (2 * hr);
        const double analytic_r =
            std::exp(rate / ch.bandwidth_hz) * ch.noise_power_w / (ch.gain * ch.bandwidth_hz) *
            duration;
        CHECK(close(numeric_r, analytic_r, 1e-6));
    }
}

TEST_CASE("joint optimum keeps the directional water-filling structure") {
    std::mt19937_64 rng(606);
    for (int i = 0; i < 40; ++i) {
        const Scenario sc = random_scenario(rng, 5, false, false);
        const auto sol = solve_merged(sc);
        for (std::size_t s = 0; s + 1 < sol.plan.segments.size(); ++s)
            CHECK(sol.plan.segments[s + 1].rate_bps <=
                  sol.plan.segments[s].rate_bps * (1.0 + 1e-9) + 1e-12);

        // Recovered rates match the multiplier form
        // r = B ln(h B tail_mu / (alpha sigma^2)) clipped at zero.
        const auto& ch = sc.channel;
        double tail = 0.0;
        std::vector<double> predicted(sc.task_count());
        for (int j = sc.task_count() - 1; j >= 0; --j) {
            tail += sol.report.multipliers_transmission[j];
            const double inside = ch.gain * ch.bandwidth_hz * tail /
                                  (sc.energy_weight * ch.noise_power_w);
            predicted[j] = inside > 1.0 ? ch.bandwidth_hz * std::log(inside) : 0.0;
        }
        double t_prev = 0.0, x_prev = 0.0;
        for (int j = 0; j < sc.task_count(); ++j) {
            const double t_j = sc.tasks[j].deadline_s;
            const double x = curve_eval(sol.plan, std::min(t_j, sol.plan.total_duration_s()));
            const double rate = (x - x_prev) / (t_j - t_prev);
            CHECK(std::abs(rate - predicted[j]) <= 1e-4 * std::max(1.0, rate));
            t_prev = t_j;
            x_prev = x;
        }
    }
}

TEST_CASE("wall conditions hold for limited and bursty joint optima") {
    std::mt19937_64 rng(707);
    for (int i = 0; i < 30; ++i) {
        const Scenario sc = random_scenario(rng, 4, i % 2 == 0, i % 2 == 1);
        MergedSolution sol;
        try {
            sol = solve_merged(sc);
        } catch (const InfeasibleError&) {
            continue;
        }
        const auto req = requirement_curve(sol.partition, sc.tasks);
        CHECK(check_feasible(sol.plan, req, sc.buffer_cap_bits, sc.arrival).feasible);
    }
}

TEST_CASE("merged never loses to the stratified pipeline") {
    std::mt19937_64 rng(808);
    for (int i = 0; i < 100; ++i) {
        const int kind = i % 3;
        const Scenario sc = random_scenario(rng, 5, kind == 1, kind == 2);
        const auto merged = solve_merged(sc);
        const auto strat = solve_stratified(sc);
        CHECK(merged.report.objective <=
              strat.report.objective + 1e-6 * std::max(1.0, strat.report.objective));
        // Optimal substructure: the returned rates are the exact optimum for
        // the returned split.
        const auto req = requirement_curve(merged.partition, sc.tasks);
        RatePlan conditional;
        if (sc.buffer_cap_bits)
            conditional = sp_limited(req, *sc.buffer_cap_bits);
        else if (sc.arrival)
            conditional = sp_bursty(req, *sc.arrival);
        else
            conditional = sp_unlimited(req);
        CHECK(close(plan_energy(merged.plan, sc.channel),
                    plan_energy(conditional, sc.channel), 1e-6));
    }
}

TEST_CASE("merged tracks the exhaustive joint oracle on tiny instances") {
    std::mt19937_64 rng(909);
    OracleConfig cfg;
    cfg.grid_points_per_axis = 14;
    cfg.descent_iterations = 120;
    for (int i = 0; i < 6; ++i) {
        const Scenario sc = random_scenario(rng, 3, false, false);
        const auto merged = solve_merged(sc);
        const auto oracle = oracle_joint(sc, cfg);
        CHECK(merged.report.objective <=
              oracle.objective + 1e-6 * std::max(1.0, oracle.objective));
        // The grid best cannot beat the solver by more than its resolution
        // allows; bound the gap by a first-order estimate along each axis.
        double resolution_gap = 1e-6;
        for (int n = 0; n < sc.task_count(); ++n) {
            const double h = sc.budget_bits / (cfg.grid_points_per_axis - 1);
            resolution_gap += marginal_error_reduction(
                                  std::max(oracle.partition.bits[n] - h, 0.0) , sc.tasks[n]) * h;
        }
        CHECK(oracle.objective - merged.report.objective <= resolution_gap);
    }
}

TEST_CASE("sweeping the energy weight trades energy against error monotonically") {
    std::mt19937_64 rng(1010);
    for (int i = 0; i < 12; ++i) {
        const Scenario sc = random_scenario(rng, 4, false, false);
        double previous_energy = std::numeric_limits<double>::infinity();
        double previous_error = -std::numeric_limits<double>::infinity();
        for (double alpha : {0.2, 0.5, 0.8}) {
            const auto sol = solve_merged(with_energy_weight(sc, alpha));
            const double err = profile_weighted_error(sc, sol.partition);
            CHECK(sol.report.energy_j <= previous_energy * (1.0 + 1e-8) + 1e-12);
            CHECK(err >= previous_error * (1.0 - 1e-8) - 1e-12);
            previous_energy = sol.report.energy_j;
            previous_error = err;
        }
    }
}

TEST_CASE("invalid weightings are rejected") {
    Scenario sc = single_task_toy();
    sc.energy_weight = 0.0;
    sc.tasks[0].error_weight = 1.0;
    CHECK_THROWS_AS(solve_merged(sc), std::invalid_argument);
    sc.energy_weight = 0.7;  // 0.7 + 0.5 != 1
    sc.tasks[0].error_weight = 0.5;
    CHECK_THROWS_AS(solve_merged(sc), std::invalid_argument);
}
