#include "txsched/instance_gen.hpp"

#include "txsched/model.hpp"

#include <algorithm>
#include <cmath>

namespace txsched {

namespace {

std::vector<double> sorted_times(std::mt19937_64& rng, int count, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> times(count);
    for (auto& t : times) t = dist(rng);
    std::sort(times.begin(), times.end());
    // Keep instants apart so durations never collapse.
    for (int i = 1; i < count; ++i)
        times[i] = std::max(times[i], times[i - 1] + 0.05 * (hi - lo) / count);
    return times;
}

}  // namespace

RateInstance random_rate_instance(std::mt19937_64& rng, int max_corners) {
    std::uniform_int_distribution<int> count_dist(1, max_corners);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int corners = count_dist(rng);

    RateInstance inst;
    const auto times = sorted_times(rng, corners, 0.5, 10.0);
    double cumulative = 0.0;
    double max_increment = 0.0;
    for (int j = 0; j < corners; ++j) {
        double increment = unit(rng) < 0.15 ? 0.0 : 0.1 + 1.9 * unit(rng);
        cumulative += increment;
        max_increment = std::max(max_increment, increment);
        inst.requirements.corners.push_back({times[j], cumulative});
    }
    if (cumulative == 0.0) {
        inst.requirements.corners.back().cumulative_bits = 0.5;
        cumulative = max_increment = 0.5;
    }

    inst.buffer_cap_bits = max_increment + 0.05 + 1.5 * unit(rng);

    // Arrival events at every deadline plus a few extras, always dominating
    // the requirement there; occasionally exactly tight to ride the wall.
    std::vector<double> event_times = times;
    const int extras = static_cast<int>(3 * unit(rng));
    for (int e = 0; e < extras; ++e) event_times.push_back(0.2 + (times.back() - 0.2) * unit(rng));
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    double stock = 0.0;
    for (double t : event_times) {
        const double needed = curve_eval(inst.requirements, std::min(t, times.back()));
        const double slack = unit(rng) < 0.3 ? 0.0 : unit(rng) * 0.8;
        stock = std::max(stock, needed + slack);
        inst.arrival.events.push_back({t, stock});
    }
    return inst;
}

Scenario random_scenario(std::mt19937_64& rng, int max_tasks, bool with_cap, bool with_arrival) {
    std::uniform_int_distribution<int> count_dist(1, max_tasks);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = count_dist(rng);

    Scenario scenario;
    const auto deadlines = sorted_times(rng, n, 1.0, 10.0);
    for (int i = 0; i < n; ++i) {
        LearningTaskSpec task;
        task.deadline_s = deadlines[i];
        task.bits_per_sample = 1.0 + 4.0 * unit(rng);
        task.prior_samples = unit(rng) < 0.4 ? 0.0 : std::floor(4.0 * unit(rng));
        task.amplitude = 0.5 + 9.5 * unit(rng);
        task.decay = 0.3 + 0.9 * unit(rng);
        task.error_weight = 0.05 + unit(rng);
        scenario.tasks.push_back(task);
    }
    scenario.budget_bits = 0.5 + 4.5 * unit(rng);
    scenario.channel = ChannelModel{1.0, 1.0, 1.0};

    const double alpha = 0.2 + 0.6 * unit(rng);
    double weight_total = 0.0;
    for (const auto& t : scenario.tasks) weight_total += t.error_weight;
    for (auto& t : scenario.tasks) t.error_weight *= (1.0 - alpha) / weight_total;
    scenario.energy_weight = alpha;

    if (with_cap)
        scenario.buffer_cap_bits =
            scenario.budget_bits * (0.3 + 0.9 * unit(rng)) / std::sqrt(static_cast<double>(n));
    if (with_arrival) {
        ArrivalCurve arrival;
        double stock = 0.0;
        for (int i = 0; i < n; ++i) {
            const double target = scenario.budget_bits * (static_cast<double>(i + 1) / n);
            stock = std::max(stock + 0.02 * scenario.budget_bits,
                             target * (0.55 + 0.65 * unit(rng)));
            arrival.events.push_back({deadlines[i], stock});
        }
        arrival.events.back().cumulative_bits =
            std::max(arrival.events.back().cumulative_bits, scenario.budget_bits);
        scenario.arrival = std::move(arrival);
    }
    return scenario;
}

}  // namespace txsched
