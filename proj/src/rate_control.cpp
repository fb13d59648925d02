#include "txsched/rate_control.hpp"

#include "txsched/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

namespace txsched {

namespace {

constexpr double kRateRel = 1e-9;   // wall-touch / interval tolerance
constexpr double kTieRel = 1e-12;   // slope-tie tolerance (collinear corners)

double rate_tol(double a, double b) {
    return kRateRel * std::max({std::abs(a), std::abs(b), 1e-12});
}

// Constraint tunnel sampled at strictly increasing instants. lower[k] is the
// least cumulative amount that must be on the server at t[k]; upper[k] the
// most that may have been transmitted by t[k].
struct Tunnel {
    std::vector<double> t;
    std::vector<double> lower;
    std::vector<double> upper;
};

// Pulls the tightest piecewise-linear curve from (0, 0) through the tunnel.
// State (t0, x0) advances segment by segment; each segment ends on the wall
// that forced it (lower for a rate drop or the terminal stretch, upper for a
// rate rise), never violating either wall in between.
RatePlan pull_string(const Tunnel& tunnel) {
    const std::size_t count = tunnel.t.size();
    RatePlan plan;
    std::size_t begin = 0;
    double t0 = 0.0, x0 = 0.0;

    while (begin < count) {
        double low = -std::numeric_limits<double>::infinity();
        double high = std::numeric_limits<double>::infinity();
        std::size_t last = begin;       // last instant the running range reaches
        bool blocked_below = false;     // next range fell below the running one
        bool blocked = false;

        std::vector<double> lows(count - begin), highs(count - begin);
        for (std::size_t j = begin; j < count; ++j) {
            const double span = tunnel.t[j] - t0;
            const double lo = (tunnel.lower[j] - x0) / span;
            const double hi = (tunnel.upper[j] - x0) / span;
            lows[j - begin] = lo;
            highs[j - begin] = hi;
            assert(lo <= hi + rate_tol(lo, hi) && "tunnel pinched: lower wall above upper wall");
            const double next_low = std::max(low, lo);
            const double next_high = std::min(high, hi);
            if (next_low > next_high + rate_tol(next_low, next_high)) {
                blocked = true;
                // Exactly one side blocks; on numeric grazes take the larger gap.
                blocked_below = (low - hi) >= (lo - high);
                break;
            }
            low = next_low;
            high = next_high;
            last = j;
        }

        const bool pick_low = !blocked || blocked_below;
        const double rate_level = pick_low ? low : high;
        std::size_t end = begin;
        for (std::size_t j = begin; j <= last; ++j) {
            const double v = pick_low ? lows[j - begin] : highs[j - begin];
            if (std::abs(v - rate_level) <= rate_tol(v, rate_level)) end = j;
        }

        const double rate = std::max(rate_level, 0.0);
        const double duration = tunnel.t[end] - t0;
        plan.segments.push_back({rate, duration});
        x0 += rate * duration;
        t0 = tunnel.t[end];
        begin = end + 1;
    }
    return plan;
}

double eval_carry_forward(const ArrivalCurve& arrival, double t_s) {
    double value = 0.0;
    for (const auto& e : arrival.events) {
        if (e.time_s > t_s) break;
        value = e.cumulative_bits;
    }
    return value;
}

Tunnel limited_tunnel(const StaircaseCurve& requirements, double cap_bits) {
    Tunnel tunnel;
    double previous = 0.0;
    for (const auto& corner : requirements.corners) {
        if (corner.cumulative_bits - previous > cap_bits + tol::slack(corner.cumulative_bits, previous)) {
            std::ostringstream msg;
            msg << "requirement increment " << corner.cumulative_bits - previous << " bits at t="
                << corner.time_s << " exceeds the buffer capacity " << cap_bits;
            throw InfeasibleError(msg.str());
        }
        tunnel.t.push_back(corner.time_s);
        // Walls may graze within the bit slack (split exactly at the cap);
        // keep them consistent so the pulled curve can pass through the pinch.
        tunnel.lower.push_back(std::min(corner.cumulative_bits, previous + cap_bits));
        tunnel.upper.push_back(previous + cap_bits);
        previous = corner.cumulative_bits;
    }
    return tunnel;
}

Tunnel bursty_tunnel(const StaircaseCurve& requirements, const ArrivalCurve& arrival) {
    Tunnel tunnel;
    tunnel.t = merged_instants(requirements, arrival);
    for (double t : tunnel.t) {
        const double required = curve_eval(requirements, t);
        const double arrived = eval_carry_forward(arrival, t);
        if (!tol::leq(required, arrived)) {
            std::ostringstream msg;
            msg << "requirement " << required << " bits at t=" << t
                << " exceeds the " << arrived << " bits arrived by then";
            throw InfeasibleError(msg.str());
        }
        tunnel.lower.push_back(std::min(required, arrived));
        tunnel.upper.push_back(arrived);
    }
    return tunnel;
}

}  // namespace

std::vector<double> merged_instants(const StaircaseCurve& requirements,
                                    const ArrivalCurve& arrival) {
    const double horizon = requirements.final_time_s();
    std::vector<double> instants;
    for (const auto& c : requirements.corners) instants.push_back(c.time_s);
    for (const auto& e : arrival.events)
        if (e.time_s > 0.0 && e.time_s <= horizon) instants.push_back(e.time_s);
    std::sort(instants.begin(), instants.end());
    instants.erase(std::unique(instants.begin(), instants.end(),
                               [](double a, double b) { return tol::near(a, b, 1e-12); }),
                   instants.end());
    return instants;
}

RatePlan sp_unlimited(const StaircaseCurve& requirements) {
    if (requirements.corners.empty())
        throw std::invalid_argument("sp_unlimited: empty requirement curve");
    const auto& corners = requirements.corners;
    const std::size_t count = corners.size();

    RatePlan plan;
    std::size_t begin = 0;
    double t0 = 0.0, x0 = 0.0;
    while (begin < count) {
        // Steepest remaining average slope; collinear ties go to the latest
        // corner so each segment is maximal and rates strictly decrease.
        std::size_t pick = begin;
        double best = (corners[begin].cumulative_bits - x0) / (corners[begin].time_s - t0);
        for (std::size_t j = begin + 1; j < count; ++j) {
            const double slope = (corners[j].cumulative_bits - x0) / (corners[j].time_s - t0);
            const double tie = kTieRel * std::max(std::abs(best), 1e-12);
            if (slope > best + tie) {
                best = slope;
                pick = j;
            } else if (slope >= best - tie) {
                pick = j;
            }
        }
        const double rate = std::max(best, 0.0);
        plan.segments.push_back({rate, corners[pick].time_s - t0});
        x0 += rate * (corners[pick].time_s - t0);
        t0 = corners[pick].time_s;
        begin = pick + 1;
    }
    return plan;
}

RatePlan sp_limited(const StaircaseCurve& requirements, double buffer_cap_bits) {
    if (requirements.corners.empty())
        throw std::invalid_argument("sp_limited: empty requirement curve");
    if (!(buffer_cap_bits > 0.0))
        throw std::invalid_argument("sp_limited: buffer capacity must be > 0");
    return pull_string(limited_tunnel(requirements, buffer_cap_bits));
}

RatePlan sp_bursty(const StaircaseCurve& requirements, const ArrivalCurve& arrival) {
    if (requirements.corners.empty())
        throw std::invalid_argument("sp_bursty: empty requirement curve");
    validate_or_throw(arrival, "sp_bursty: invalid arrival curve");
    return pull_string(bursty_tunnel(requirements, arrival));
}

std::vector<RateInterval> feasible_rate_intervals(const StaircaseCurve& requirements,
                                                  double buffer_cap_bits) {
    const Tunnel tunnel = limited_tunnel(requirements, buffer_cap_bits);
    std::vector<RateInterval> intervals(tunnel.t.size());
    for (std::size_t j = 0; j < tunnel.t.size(); ++j)
        intervals[j] = {tunnel.lower[j] / tunnel.t[j], tunnel.upper[j] / tunnel.t[j]};
    return intervals;
}

std::vector<RateInterval> feasible_rate_intervals(const StaircaseCurve& requirements,
                                                  const ArrivalCurve& arrival) {
    const Tunnel tunnel = bursty_tunnel(requirements, arrival);
    std::vector<RateInterval> intervals(tunnel.t.size());
    for (std::size_t m = 0; m < tunnel.t.size(); ++m)
        intervals[m] = {tunnel.lower[m] / tunnel.t[m], tunnel.upper[m] / tunnel.t[m]};
    return intervals;
}

}  // namespace txsched
