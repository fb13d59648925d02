#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "txsched/baselines.hpp"
#include "txsched/instance_gen.hpp"
#include "txsched/merged.hpp"
#include "txsched/model.hpp"

#include <cmath>
#include <random>

using namespace txsched;
using namespace txsched::testing;

namespace {

// Error-dominant weights so the budget binds at the joint optimum.
Scenario symmetric_scenario() {
    Scenario sc;
    sc.tasks = {task(1, 1, 0, 1, 1, 0.45), task(2, 1, 0, 1, 1, 0.45)};
    sc.budget_bits = 2.0;
    sc.energy_weight = 0.1;
    sc.channel = {1.0, 1.0, 1.0};
    return sc;
}

}  // namespace

TEST_CASE("kind names round-trip") {
    CHECK(baseline_kind_from_string("EDP") == BaselineKind::EDP);
    CHECK(baseline_kind_from_string("ERC") == BaselineKind::ERC);
    CHECK(baseline_kind_from_string("EDPRC") == BaselineKind::EDPRC);
    CHECK_THROWS_AS(baseline_kind_from_string("edp"), std::invalid_argument);
}

TEST_CASE("equal split matches the joint split on a symmetric scenario") {
    const Scenario sc = symmetric_scenario();
    const auto edp = baseline_solve(sc, BaselineKind::EDP);
    const auto joint = solve_merged(sc);
    CHECK(close(edp.partition.bits[0], edp.partition.bits[1], 1e-12));
    CHECK(close(edp.partition.bits[0], joint.partition.bits[0], 1e-6));
    CHECK(close(edp.partition.bits[1], joint.partition.bits[1], 1e-6));
}

TEST_CASE("constant-rate scheme transmits at the minimal feasible rate, then idles") {
    // Requirements from split [2, 1] at deadlines [1, 2]: rate 2 for 1.5 s.
    Scenario sc;
    sc.tasks = {task(1, 1, 0, 2, 1, 0.25), task(2, 1, 0, 1, 1, 0.25)};
    sc.budget_bits = 3.0;
    sc.energy_weight = 0.5;
    sc.channel = {1.0, 1.0, 1.0};
    // Force the optimized split to [2, 1] by construction: a grid of this
    // two-task family with budget 3 gives exactly that at a=[2,1] only when
    // the water levels agree; instead pin the split through EDPRC semantics.
    const auto edprc = baseline_solve(sc, BaselineKind::EDPRC);
    // Equal split [1.5, 1.5]: prefix ratios {1.5, 1.5}; constant rate 1.5
    // until 3 bits are out at t = 2, no idle tail.
    REQUIRE(edprc.plan.segments.size() == 1);
    CHECK(edprc.plan.segments[0].rate_bps == doctest::Approx(1.5));
    CHECK(edprc.plan.segments[0].duration_s == doctest::Approx(2.0));

    // Hand-checkable idle tail: one task needing 2 bits by t=1, horizon 2.
    Scenario tail;
    tail.tasks = {task(1, 1, 0, 1, 1, 0.25), task(2, 1, 1, 1, 1, 0.25)};
    tail.budget_bits = 2.0;
    tail.energy_weight = 0.5;
    tail.channel = {1.0, 1.0, 1.0};
    Partition two;
    two.bits = Eigen::VectorXd::Zero(2);
    two.bits << 2.0, 1.0;
    const auto req = requirement_curve(two, tail.tasks);
    // Minimal feasible constant rate max(2/1, 3/2) = 2; 3 bits out by 1.5 s.
    const auto erc_energy = (std::exp(2.0) - 1.0) * 1.5;
    RatePlan expected = plan({{2.0, 1.5}, {0.0, 0.5}});
    CHECK(close(plan_energy(expected, tail.channel), erc_energy, 1e-12));
    CHECK(check_feasible(expected, req).feasible);
}

TEST_CASE("equal split that breaks a bound is reported, not patched") {
    Scenario sc = symmetric_scenario();
    sc.buffer_cap_bits = 0.6;  // equal share of 1.0 exceeds the cap
    CHECK_THROWS_AS(baseline_solve(sc, BaselineKind::EDP), InfeasibleError);

    Scenario late = symmetric_scenario();
    late.arrival = arrival({{1, 0.4}, {2, 2.0}});  // 1.0 needed by t=1, 0.4 there
    CHECK_THROWS_AS(baseline_solve(late, BaselineKind::EDP), InfeasibleError);
}

TEST_CASE("baselines are feasible and never beat the joint design") {
    std::mt19937_64 rng(77);
    int compared = 0;
    for (int i = 0; i < 60; ++i) {
        const int kind_mix = i % 3;
        const Scenario sc = random_scenario(rng, 5, kind_mix == 1, kind_mix == 2);
        const auto joint = solve_merged(sc);
        for (auto kind : {BaselineKind::EDP, BaselineKind::ERC, BaselineKind::EDPRC}) {
            MergedSolution base;
            try {
                base = baseline_solve(sc, kind);
            } catch (const InfeasibleError&) {
                continue;  // equal split can genuinely break caps/arrivals
            }
            const auto req = requirement_curve(base.partition, sc.tasks);
            CHECK(check_feasible(base.plan, req, sc.buffer_cap_bits, sc.arrival).feasible);
            CHECK(joint.report.objective <= base.report.objective + 1e-9 +
                                                1e-9 * std::abs(base.report.objective));
            ++compared;
        }
    }
    CHECK(compared > 100);
}
