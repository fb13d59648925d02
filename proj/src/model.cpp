#include "txsched/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace txsched {

double RatePlan::total_duration_s() const {
    double total = 0.0;
    for (const auto& seg : segments) total += seg.duration_s;
    return total;
}

double RatePlan::total_bits() const {
    double total = 0.0;
    for (const auto& seg : segments) total += seg.rate_bps * seg.duration_s;
    return total;
}

std::vector<double> RatePlan::breakpoints_s() const {
    std::vector<double> times;
    times.reserve(segments.size());
    double t = 0.0;
    for (const auto& seg : segments) {
        t += seg.duration_s;
        times.push_back(t);
    }
    return times;
}

const char* to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::transmission: return "transmission";
        case ViolationKind::buffer: return "buffer";
        case ViolationKind::arrival: return "arrival";
    }
    return "?";
}

std::vector<std::string> validate(const LearningTaskSpec& task) {
    std::vector<std::string> out;
    if (!(task.deadline_s > 0.0)) out.push_back("deadline_s must be > 0");
    if (!(task.bits_per_sample >= 1.0)) out.push_back("bits_per_sample must be >= 1");
    if (!(task.prior_samples >= 0.0)) out.push_back("prior_samples must be >= 0");
    if (!(task.amplitude > 0.0)) out.push_back("amplitude must be > 0");
    if (!(task.decay > 0.0)) out.push_back("decay must be > 0");
    if (!(task.error_weight >= 0.0)) out.push_back("error_weight must be >= 0");
    return out;
}

std::vector<std::string> validate(const ChannelModel& channel) {
    std::vector<std::string> out;
    if (!(channel.bandwidth_hz > 0.0)) out.push_back("bandwidth_hz must be > 0");
    if (!(channel.noise_power_w > 0.0)) out.push_back("noise_power_w must be > 0");
    if (!(channel.gain > 0.0)) out.push_back("gain must be > 0");
    return out;
}

std::vector<std::string> validate(const ArrivalCurve& arrival) {
    std::vector<std::string> out;
    if (arrival.events.empty()) out.push_back("arrival curve has no events");
    for (std::size_t i = 0; i < arrival.events.size(); ++i) {
        const auto& e = arrival.events[i];
        if (!(e.time_s >= 0.0)) out.push_back("arrival event time must be >= 0");
        if (!(e.cumulative_bits >= 0.0)) out.push_back("arrival cumulative_bits must be >= 0");
        if (i > 0) {
            if (!(e.time_s > arrival.events[i - 1].time_s))
                out.push_back("arrival event times must be strictly increasing");
            if (e.cumulative_bits < arrival.events[i - 1].cumulative_bits)
                out.push_back("arrival cumulative_bits must be non-decreasing");
        }
    }
    return out;
}

std::vector<std::string> validate(const Scenario& scenario) {
    std::vector<std::string> out;
    if (scenario.tasks.empty()) out.push_back("scenario has no tasks");
    for (std::size_t n = 0; n < scenario.tasks.size(); ++n) {
        for (const auto& p : validate(scenario.tasks[n]))
            out.push_back("task " + std::to_string(n + 1) + ": " + p);
        if (n > 0 && !(scenario.tasks[n].deadline_s > scenario.tasks[n - 1].deadline_s))
            out.push_back("task " + std::to_string(n + 1) + ": deadlines must be strictly increasing");
    }
    if (!(scenario.budget_bits > 0.0)) out.push_back("budget_bits must be > 0");
    if (scenario.buffer_cap_bits && !(*scenario.buffer_cap_bits > 0.0))
        out.push_back("buffer_cap_bits must be > 0 when given");
    if (scenario.arrival)
        for (const auto& p : validate(*scenario.arrival)) out.push_back("arrival: " + p);
    if (!(scenario.energy_weight >= 0.0)) out.push_back("energy_weight must be >= 0");
    for (const auto& p : validate(scenario.channel)) out.push_back("channel: " + p);
    return out;
}

std::vector<std::string> validate(const RatePlan& plan) {
    std::vector<std::string> out;
    for (const auto& seg : plan.segments) {
        if (!(seg.rate_bps >= 0.0)) out.push_back("segment rates must be >= 0");
        if (!(seg.duration_s > 0.0)) out.push_back("segment durations must be > 0");
    }
    return out;
}

std::vector<std::string> validate(const StaircaseCurve& curve) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < curve.corners.size(); ++i) {
        const auto& c = curve.corners[i];
        if (!(c.time_s > 0.0)) out.push_back("corner times must be > 0");
        if (!(c.cumulative_bits >= 0.0)) out.push_back("corner cumulative_bits must be >= 0");
        if (i > 0) {
            if (!(c.time_s > curve.corners[i - 1].time_s))
                out.push_back("corner times must be strictly increasing");
            if (c.cumulative_bits < curve.corners[i - 1].cumulative_bits)
                out.push_back("corner cumulative_bits must be non-decreasing");
        }
    }
    return out;
}

double sample_count(double data_bits, const LearningTaskSpec& task) {
    if (data_bits < 0.0) throw std::invalid_argument("sample_count: data_bits must be >= 0");
    return data_bits / task.bits_per_sample + task.prior_samples;
}

double learning_error(double samples, const LearningTaskSpec& task) {
    if (samples <= 0.0) throw std::domain_error("learning_error: undefined for samples <= 0");
    return task.amplitude * std::pow(samples, -task.decay);
}

double rate_power_w(double rate_bps, const ChannelModel& channel) {
    return std::expm1(rate_bps / channel.bandwidth_hz) * channel.noise_power_w / channel.gain;
}

double plan_energy(const RatePlan& plan, const ChannelModel& channel) {
    double energy = 0.0;
    for (const auto& seg : plan.segments) energy += rate_power_w(seg.rate_bps, channel) * seg.duration_s;
    return energy;
}

double weighted_objective(const Partition& partition, const RatePlan& plan,
                          const Scenario& scenario) {
    if (partition.bits.size() != scenario.task_count())
        throw std::invalid_argument("weighted_objective: partition/task size mismatch");
    double error_term = 0.0;
    for (int n = 0; n < scenario.task_count(); ++n) {
        const auto& task = scenario.tasks[n];
        if (task.error_weight == 0.0) continue;
        error_term += task.error_weight * learning_error(sample_count(partition.bits[n], task), task);
    }
    return scenario.energy_weight * plan_energy(plan, scenario.channel) + error_term;
}

StaircaseCurve requirement_curve(const Partition& partition,
                                 const std::vector<LearningTaskSpec>& tasks) {
    if (partition.bits.size() != static_cast<Eigen::Index>(tasks.size()))
        throw std::invalid_argument("requirement_curve: partition/task size mismatch");
    StaircaseCurve curve;
    curve.corners.reserve(tasks.size());
    double cumulative = 0.0;
    for (std::size_t n = 0; n < tasks.size(); ++n) {
        cumulative += partition.bits[static_cast<Eigen::Index>(n)];
        curve.corners.push_back({tasks[n].deadline_s, cumulative});
    }
    return curve;
}

namespace {

[[noreturn]] void out_of_range(const char* what, double t, double final_t) {
    std::ostringstream msg;
    msg << what << ": t = " << t << " outside [0, " << final_t << "]";
    throw std::out_of_range(msg.str());
}

}  // namespace

double curve_eval(const StaircaseCurve& curve, double t_s) {
    const double final_t = curve.final_time_s();
    if (t_s < 0.0 || t_s > final_t * (1.0 + 1e-12)) out_of_range("curve_eval(staircase)", t_s, final_t);
    double value = 0.0;
    for (const auto& c : curve.corners) {
        if (c.time_s > t_s) break;
        value = c.cumulative_bits;
    }
    return value;
}

double curve_eval(const ArrivalCurve& curve, double t_s) {
    const double final_t = curve.events.empty() ? 0.0 : curve.events.back().time_s;
    if (t_s < 0.0 || t_s > final_t * (1.0 + 1e-12)) out_of_range("curve_eval(arrival)", t_s, final_t);
    double value = 0.0;
    for (const auto& e : curve.events) {
        if (e.time_s > t_s) break;
        value = e.cumulative_bits;
    }
    return value;
}

double curve_eval(const RatePlan& plan, double t_s) {
    const double final_t = plan.total_duration_s();
    if (t_s < 0.0 || t_s > final_t * (1.0 + tol::bits_rel))
        out_of_range("curve_eval(plan)", t_s, final_t);
    double bits = 0.0;
    double t = 0.0;
    for (const auto& seg : plan.segments) {
        if (t_s <= t + seg.duration_s) return bits + seg.rate_bps * (t_s - t);
        bits += seg.rate_bps * seg.duration_s;
        t += seg.duration_s;
    }
    return bits;
}

FeasibilityReport check_feasible(const RatePlan& plan, const StaircaseCurve& requirements,
                                 std::optional<double> buffer_cap_bits,
                                 const std::optional<ArrivalCurve>& arrival) {
    if (requirements.corners.empty())
        throw std::invalid_argument("check_feasible: empty requirement curve");
    const double plan_span = plan.total_duration_s();
    if (plan_span + tol::slack(plan_span, requirements.final_time_s()) < requirements.final_time_s())
        throw std::invalid_argument("check_feasible: plan does not span the final deadline");

    FeasibilityReport report;
    report.max_buffer_bits = 0.0;
    std::optional<Violation> worst;
    auto note = [&](double t, ViolationKind kind) {
        // Earliest instant wins; at equal instants transmission < buffer < arrival.
        if (!worst || t < worst->time_s - 1e-15 ||
            (t <= worst->time_s + 1e-15 && static_cast<int>(kind) < static_cast<int>(worst->kind)))
            worst = Violation{t, kind};
    };

    double consumed_before = 0.0;  // cumulative through the previous deadline
    for (const auto& corner : requirements.corners) {
        const double transmitted = curve_eval(plan, corner.time_s);
        if (!tol::geq(transmitted, corner.cumulative_bits))
            note(corner.time_s, ViolationKind::transmission);
        if (buffer_cap_bits && !tol::leq(transmitted - consumed_before, *buffer_cap_bits))
            note(corner.time_s, ViolationKind::buffer);
        report.max_buffer_bits =
            std::max(report.max_buffer_bits, transmitted - corner.cumulative_bits);
        consumed_before = corner.cumulative_bits;
    }

    if (arrival) {
        std::vector<double> instants;
        for (const auto& e : arrival->events) instants.push_back(e.time_s);
        for (const auto& c : requirements.corners) instants.push_back(c.time_s);
        std::sort(instants.begin(), instants.end());
        const double arrival_span = arrival->events.back().time_s;
        for (double t : instants) {
            if (t > plan_span * (1.0 + 1e-12) || t > arrival_span * (1.0 + 1e-12)) continue;
            if (!tol::leq(curve_eval(plan, t), curve_eval(*arrival, t)))
                note(t, ViolationKind::arrival);
        }
    }

    report.first_violation = worst;
    report.feasible = !worst.has_value();
    return report;
}

}  // namespace txsched
