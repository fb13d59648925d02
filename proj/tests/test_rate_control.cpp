#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "txsched/instance_gen.hpp"
#include "txsched/model.hpp"
#include "txsched/rate_control.hpp"

#include <cmath>
#include <random>

using namespace txsched;
using namespace txsched::testing;

namespace {

// Right-continuous staircase value with the instant snapped to a corner when
// it lands within rounding of one (plan breakpoints are accumulated sums).
double snapped(const StaircaseCurve& curve, double t) {
    double value = 0.0;
    for (const auto& c : curve.corners)
        if (c.time_s <= t || txsched::tol::near(c.time_s, t, 1e-9)) value = c.cumulative_bits;
    return value;
}

double snapped(const ArrivalCurve& curve, double t) {
    double value = 0.0;
    for (const auto& e : curve.events)
        if (e.time_s <= t || txsched::tol::near(e.time_s, t, 1e-9)) value = e.cumulative_bits;
    return value;
}

void check_plan_shape(const RatePlan& p, double horizon) {
    double total = 0.0;
    for (const auto& seg : p.segments) {
        CHECK(seg.rate_bps >= 0.0);
        CHECK(seg.duration_s > 0.0);
        total += seg.duration_s;
    }
    CHECK(total == doctest::Approx(horizon).epsilon(1e-12));
}

}  // namespace

TEST_CASE("unbounded-buffer schedules from the worked examples") {
    SUBCASE("two corners, falling rate") {
        const auto p = sp_unlimited(staircase({{1, 2}, {2, 3}}));
        REQUIRE(p.segments.size() == 2);
        CHECK(p.segments[0].rate_bps == doctest::Approx(2.0));
        CHECK(p.segments[0].duration_s == doctest::Approx(1.0));
        CHECK(p.segments[1].rate_bps == doctest::Approx(1.0));
        CHECK(p.segments[1].duration_s == doctest::Approx(1.0));
    }
    SUBCASE("later corner dominates the slope") {
        const auto p = sp_unlimited(staircase({{1, 1}, {2, 4}}));
        REQUIRE(p.segments.size() == 1);
        CHECK(p.segments[0].rate_bps == doctest::Approx(2.0));
        CHECK(p.segments[0].duration_s == doctest::Approx(2.0));
    }
    SUBCASE("single corner") {
        const auto p = sp_unlimited(staircase({{2, 4}}));
        REQUIRE(p.segments.size() == 1);
        CHECK(p.segments[0].rate_bps == doctest::Approx(2.0));
    }
    SUBCASE("uniformly light epochs collapse to one segment at total/horizon") {
        const auto p = sp_unlimited(staircase({{1, 0.5}, {2, 1.0}, {4, 2.0}}));
        REQUIRE(p.segments.size() == 1);
        CHECK(p.segments[0].rate_bps == doctest::Approx(0.5));
        CHECK(p.segments[0].duration_s == doctest::Approx(4.0));
    }
}

TEST_CASE("limited-buffer schedules from the worked examples") {
    SUBCASE("drop on an empty buffer") {
        const auto p = sp_limited(staircase({{1, 1}, {2, 1.1}, {3, 2.1}}), 1.0);
        REQUIRE(p.segments.size() == 2);
        CHECK(p.segments[0].rate_bps == doctest::Approx(1.0));
        CHECK(p.segments[0].duration_s == doctest::Approx(1.0));
        CHECK(p.segments[1].rate_bps == doctest::Approx(0.55));
        CHECK(p.segments[1].duration_s == doctest::Approx(2.0));
    }
    SUBCASE("rise at the full-buffer instant") {
        const auto p = sp_limited(staircase({{1, 0.1}, {2, 0.6}, {3, 1.1}}), 0.5);
        REQUIRE(p.segments.size() == 2);
        CHECK(p.segments[0].rate_bps == doctest::Approx(0.3));
        CHECK(p.segments[0].duration_s == doctest::Approx(2.0));
        CHECK(p.segments[1].rate_bps == doctest::Approx(0.5));
        CHECK(p.segments[1].duration_s == doctest::Approx(1.0));
    }
    SUBCASE("huge cap reproduces the unbounded schedule") {
        const auto req = staircase({{1, 2}, {2, 3}, {3, 3.2}});
        const auto capped = sp_limited(req, 1e9);
        const auto free = sp_unlimited(req);
        REQUIRE(capped.segments.size() == free.segments.size());
        for (std::size_t i = 0; i < free.segments.size(); ++i) {
            CHECK(capped.segments[i].rate_bps == doctest::Approx(free.segments[i].rate_bps));
            CHECK(capped.segments[i].duration_s == doctest::Approx(free.segments[i].duration_s));
        }
    }
    SUBCASE("an increment above the cap is infeasible") {
        CHECK_THROWS_AS(sp_limited(staircase({{1, 2}, {2, 3}}), 1.5), InfeasibleError);
    }
}

TEST_CASE("bursty-arrival schedules from the worked examples") {
    SUBCASE("arrival wall pins the rate") {
        const auto p = sp_bursty(staircase({{2, 2}}), arrival({{1, 1}, {2, 2}}));
        REQUIRE(p.segments.size() == 1);
        CHECK(p.segments[0].rate_bps == doctest::Approx(1.0));
        CHECK(p.segments[0].duration_s == doctest::Approx(2.0));
    }
    SUBCASE("every interval pins rate one") {
        const auto p =
            sp_bursty(staircase({{1, 1}, {2, 2}}), arrival({{0.5, 0.5}, {1, 1}, {2, 2}}));
        REQUIRE(p.segments.size() == 1);
        CHECK(p.segments[0].rate_bps == doctest::Approx(1.0));
        CHECK(p.segments[0].duration_s == doctest::Approx(2.0));
    }
    SUBCASE("one-shot arrival reproduces the unbounded schedule") {
        const auto req = staircase({{1, 2}, {2, 3}, {3, 3.2}});
        const auto bursty = sp_bursty(req, arrival({{0, 100.0}}));
        const auto free = sp_unlimited(req);
        REQUIRE(bursty.segments.size() == free.segments.size());
        for (std::size_t i = 0; i < free.segments.size(); ++i)
            CHECK(bursty.segments[i].rate_bps == doctest::Approx(free.segments[i].rate_bps));
    }
    SUBCASE("requirement beyond the arrival stock is infeasible") {
        CHECK_THROWS_AS(sp_bursty(staircase({{1, 2}}), arrival({{1, 1.5}})), InfeasibleError);
    }
}

TEST_CASE("feasible rate intervals match the defining ratios") {
    SUBCASE("limited case") {
        const auto iv = feasible_rate_intervals(staircase({{1, 1}, {2, 1.1}, {3, 2.1}}), 1.0);
        REQUIRE(iv.size() == 3);
        CHECK(iv[0].low == doctest::Approx(1.0));
        CHECK(iv[0].high == doctest::Approx(1.0));
        CHECK(iv[1].low == doctest::Approx(0.55));
        CHECK(iv[1].high == doctest::Approx(1.0));
        CHECK(iv[2].low == doctest::Approx(0.7));
        CHECK(iv[2].high == doctest::Approx(0.7));
    }
    SUBCASE("bursty case") {
        const auto iv = feasible_rate_intervals(staircase({{2, 2}}), arrival({{1, 1}, {2, 2}}));
        REQUIRE(iv.size() == 2);
        CHECK(iv[0].low == doctest::Approx(0.0));
        CHECK(iv[0].high == doctest::Approx(1.0));
        CHECK(iv[1].low == doctest::Approx(1.0));
        CHECK(iv[1].high == doctest::Approx(1.0));
    }
    SUBCASE("huge cap leaves only the running-average lows") {
        const auto iv = feasible_rate_intervals(staircase({{1, 1}, {2, 3}}), 1e12);
        CHECK(iv[0].low == doctest::Approx(1.0));
        CHECK(iv[1].low == doctest::Approx(1.5));
        CHECK(iv[0].high >= 1e11);
    }
}

TEST_CASE("structural invariants on random instances") {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 400; ++i) {
        const RateInstance inst = random_rate_instance(rng);
        const double horizon = inst.requirements.final_time_s();

        {
            const auto p = sp_unlimited(inst.requirements);
            check_plan_shape(p, horizon);
            CHECK(check_feasible(p, inst.requirements).feasible);
            // Strictly decreasing rates; cumulative touches the requirement
            // at every breakpoint.
            double t = 0.0;
            for (std::size_t s = 0; s < p.segments.size(); ++s) {
                if (s > 0) CHECK(p.segments[s].rate_bps < p.segments[s - 1].rate_bps + 1e-12);
                t += p.segments[s].duration_s;
                CHECK(close(curve_eval(p, t), snapped(inst.requirements, t), 1e-9));
            }
        }
        {
            const auto p = sp_limited(inst.requirements, inst.buffer_cap_bits);
            check_plan_shape(p, horizon);
            CHECK(check_feasible(p, inst.requirements, inst.buffer_cap_bits).feasible);
            // Rate drops only on an empty buffer, rises only on a full one.
            double t = 0.0;
            for (std::size_t s = 0; s + 1 < p.segments.size(); ++s) {
                t += p.segments[s].duration_s;
                const double sent = curve_eval(p, t);
                const double required = snapped(inst.requirements, t);
                double required_before = 0.0;
                for (const auto& c : inst.requirements.corners)
                    if (c.time_s < t * (1.0 - 1e-12)) required_before = c.cumulative_bits;
                if (p.segments[s + 1].rate_bps < p.segments[s].rate_bps)
                    CHECK(close(sent, required, 1e-9));
                else
                    CHECK(close(sent - required_before, inst.buffer_cap_bits, 1e-9));
            }
        }
        {
            const auto p = sp_bursty(inst.requirements, inst.arrival);
            check_plan_shape(p, horizon);
            CHECK(check_feasible(p, inst.requirements, std::nullopt, inst.arrival).feasible);
            // Drops on the requirement wall, rises on the arrival wall.
            double t = 0.0;
            for (std::size_t s = 0; s + 1 < p.segments.size(); ++s) {
                t += p.segments[s].duration_s;
                const double sent = curve_eval(p, t);
                if (p.segments[s + 1].rate_bps < p.segments[s].rate_bps)
                    CHECK(close(sent, snapped(inst.requirements, t), 1e-9));
                else
                    CHECK(close(sent, snapped(inst.arrival, t), 1e-9));
            }
        }
    }
}

TEST_CASE("re-solving the shifted residual problem reproduces the tail") {
    std::mt19937_64 rng(202);
    int exercised = 0;
    for (int i = 0; i < 150; ++i) {
        const RateInstance inst = random_rate_instance(rng);
        for (int variant = 0; variant < 3; ++variant) {
            RatePlan p;
            if (variant == 0) p = sp_unlimited(inst.requirements);
            if (variant == 1) p = sp_limited(inst.requirements, inst.buffer_cap_bits);
            if (variant == 2) p = sp_bursty(inst.requirements, inst.arrival);
            if (p.segments.size() < 2) continue;

            const double t1 = p.segments[0].duration_s;
            const double sent = p.segments[0].rate_bps * t1;
            double consumed = 0.0;
            for (const auto& c : inst.requirements.corners)
                if (c.time_s <= t1 * (1.0 + 1e-12)) consumed = c.cumulative_bits;
            // Exact re-anchoring is defined when the first segment ends with
            // an empty buffer (nothing carried into the residual problem).
            if (std::abs(sent - consumed) > 1e-9 * std::max(1.0, sent)) continue;

            StaircaseCurve shifted;
            for (const auto& c : inst.requirements.corners)
                if (c.time_s > t1 * (1.0 + 1e-12))
                    shifted.corners.push_back({c.time_s - t1, std::max(c.cumulative_bits - sent, 0.0)});
            if (shifted.corners.empty()) continue;

            RatePlan tail;
            if (variant == 0) tail = sp_unlimited(shifted);
            if (variant == 1) tail = sp_limited(shifted, inst.buffer_cap_bits);
            if (variant == 2) {
                ArrivalCurve shifted_arrival;
                double stock_at_shift = 0.0;
                for (const auto& e : inst.arrival.events)
                    if (e.time_s <= t1 * (1.0 + 1e-12)) stock_at_shift = e.cumulative_bits;
                if (stock_at_shift - sent > 0.0)
                    shifted_arrival.events.push_back({0.0, stock_at_shift - sent});
                for (const auto& e : inst.arrival.events)
                    if (e.time_s > t1 * (1.0 + 1e-12))
                        shifted_arrival.events.push_back({e.time_s - t1, e.cumulative_bits - sent});
                if (shifted_arrival.events.empty()) continue;
                tail = sp_bursty(shifted, shifted_arrival);
            }

            REQUIRE(tail.segments.size() == p.segments.size() - 1);
            for (std::size_t s = 0; s < tail.segments.size(); ++s) {
                CHECK(close(tail.segments[s].rate_bps, p.segments[s + 1].rate_bps, 1e-9));
                CHECK(close(tail.segments[s].duration_s, p.segments[s + 1].duration_s, 1e-9));
            }
            ++exercised;
        }
    }
    CHECK(exercised > 60);
}
