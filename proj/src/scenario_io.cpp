#include "txsched/scenario_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace txsched {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return it.key() == k; }) == known.end())
            throw std::runtime_error("unknown field '" + it.key() + "' in " + where);
    }
}

double number_at(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw std::runtime_error("missing field '" + std::string(key) + "' in " + where);
    const auto& v = obj.at(key);
    if (!v.is_number()) throw std::runtime_error("field '" + std::string(key) + "' in " + where + " must be a number");
    return v.get<double>();
}

void densify_arrival(Scenario& scenario) {
    if (!scenario.arrival) return;
    auto& events = scenario.arrival->events;
    for (const auto& task : scenario.tasks) {
        const double t = task.deadline_s;
        const bool present = std::any_of(events.begin(), events.end(), [&](const ArrivalEvent& e) {
            return tol::near(e.time_s, t, 1e-12);
        });
        if (present) continue;
        double carried = 0.0;
        for (const auto& e : events) {
            if (e.time_s > t) break;
            carried = e.cumulative_bits;
        }
        events.push_back({t, carried});
    }
    std::sort(events.begin(), events.end(),
              [](const ArrivalEvent& a, const ArrivalEvent& b) { return a.time_s < b.time_s; });
}

void normalize_weights(Scenario& scenario) {
    double total = scenario.energy_weight;
    for (const auto& t : scenario.tasks) total += t.error_weight;
    if (total <= 0.0) throw std::invalid_argument("scenario: weights sum to zero");
    if (std::abs(total - 1.0) <= 1e-12) return;  // idempotent on normalized input
    scenario.energy_weight /= total;
    for (auto& t : scenario.tasks) t.error_weight /= total;
}

}  // namespace

Scenario parse_scenario_json(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(origin + ": " + e.what());
    }
    if (!doc.is_object()) throw std::runtime_error(origin + ": top level must be an object");
    reject_unknown(doc,
                   {"tasks", "budget_bits", "buffer_cap_bits", "arrival_events", "energy_weight",
                    "channel"},
                   origin);

    Scenario scenario;
    if (!doc.contains("tasks") || !doc.at("tasks").is_array())
        throw std::runtime_error(origin + ": 'tasks' must be an array");
    int index = 0;
    for (const auto& jt : doc.at("tasks")) {
        const std::string where = origin + ", task " + std::to_string(++index);
        if (!jt.is_object()) throw std::runtime_error(where + " must be an object");
        reject_unknown(jt,
                       {"deadline_s", "bits_per_sample", "prior_samples", "amplitude", "decay",
                        "error_weight"},
                       where);
        LearningTaskSpec task;
        task.deadline_s = number_at(jt, "deadline_s", where);
        task.bits_per_sample = number_at(jt, "bits_per_sample", where);
        task.prior_samples = number_at(jt, "prior_samples", where);
        task.amplitude = number_at(jt, "amplitude", where);
        task.decay = number_at(jt, "decay", where);
        task.error_weight = number_at(jt, "error_weight", where);
        scenario.tasks.push_back(task);
    }
    scenario.budget_bits = number_at(doc, "budget_bits", origin);
    if (doc.contains("buffer_cap_bits"))
        scenario.buffer_cap_bits = number_at(doc, "buffer_cap_bits", origin);
    if (doc.contains("arrival_events")) {
        const auto& ja = doc.at("arrival_events");
        if (!ja.is_array()) throw std::runtime_error(origin + ": 'arrival_events' must be an array");
        ArrivalCurve curve;
        int ei = 0;
        for (const auto& je : ja) {
            const std::string where = origin + ", arrival event " + std::to_string(++ei);
            if (!je.is_object()) throw std::runtime_error(where + " must be an object");
            reject_unknown(je, {"time_s", "cumulative_bits"}, where);
            curve.events.push_back(
                {number_at(je, "time_s", where), number_at(je, "cumulative_bits", where)});
        }
        scenario.arrival = std::move(curve);
    }
    scenario.energy_weight = number_at(doc, "energy_weight", origin);
    if (!doc.contains("channel") || !doc.at("channel").is_object())
        throw std::runtime_error(origin + ": 'channel' must be an object");
    const auto& jc = doc.at("channel");
    reject_unknown(jc, {"bandwidth_hz", "noise_power_w", "gain"}, origin + ", channel");
    scenario.channel.bandwidth_hz = number_at(jc, "bandwidth_hz", origin + ", channel");
    scenario.channel.noise_power_w = number_at(jc, "noise_power_w", origin + ", channel");
    scenario.channel.gain = number_at(jc, "gain", origin + ", channel");

    validate_or_throw(scenario, origin);
    normalize_weights(scenario);
    densify_arrival(scenario);
    if (scenario.arrival &&
        scenario.arrival->events.back().time_s < scenario.final_deadline_s() * (1.0 - 1e-12))
        throw std::invalid_argument(origin + ": arrival curve ends before the last deadline");
    return scenario;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_json(buffer.str(), path);
}

std::string scenario_to_json(const Scenario& scenario) {
    json doc;
    doc["tasks"] = json::array();
    for (const auto& t : scenario.tasks) {
        doc["tasks"].push_back({{"deadline_s", t.deadline_s},
                                {"bits_per_sample", t.bits_per_sample},
                                {"prior_samples", t.prior_samples},
                                {"amplitude", t.amplitude},
                                {"decay", t.decay},
                                {"error_weight", t.error_weight}});
    }
    doc["budget_bits"] = scenario.budget_bits;
    if (scenario.buffer_cap_bits) doc["buffer_cap_bits"] = *scenario.buffer_cap_bits;
    if (scenario.arrival) {
        doc["arrival_events"] = json::array();
        for (const auto& e : scenario.arrival->events)
            doc["arrival_events"].push_back(
                {{"time_s", e.time_s}, {"cumulative_bits", e.cumulative_bits}});
    }
    doc["energy_weight"] = scenario.energy_weight;
    doc["channel"] = {{"bandwidth_hz", scenario.channel.bandwidth_hz},
                      {"noise_power_w", scenario.channel.noise_power_w},
                      {"gain", scenario.channel.gain}};
    return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario file: " + path);
    out << scenario_to_json(scenario);
}

}  // namespace txsched
