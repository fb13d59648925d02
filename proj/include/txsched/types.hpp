#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace txsched {

/// One learning task hosted at the server: a hard deadline, the size of one
/// training sample on the wire, samples already present, and the two
/// inverse-power-law error constants together with the task's weight in the
/// scalarized objective.
struct LearningTaskSpec {
    double deadline_s = 0.0;       // t_n > 0
    double bits_per_sample = 0.0;  // d_n >= 1
    double prior_samples = 0.0;    // c_n >= 0
    double amplitude = 0.0;        // a_n > 0
    double decay = 0.0;            // b_n > 0
    double error_weight = 0.0;     // beta_n >= 0
};

/// Fixed-gain channel: rate r costs (e^{r/B} - 1) * noise/gain watts.
struct ChannelModel {
    double bandwidth_hz = 1.0;
    double noise_power_w = 1.0;
    double gain = 1.0;
};

/// Cumulative bits available at the sensor over time, as a right-continuous
/// staircase. An event (t, v) means v bits total have arrived once t is
/// reached. Before the first event the curve is 0.
struct ArrivalEvent {
    double time_s = 0.0;
    double cumulative_bits = 0.0;
};

struct ArrivalCurve {
    std::vector<ArrivalEvent> events;
};

/// A full problem instance. Tasks are sorted by strictly increasing deadline.
/// `buffer_cap_bits` absent means the server buffer is unbounded; `arrival`
/// absent means the whole budget sits at the sensor from t = 0.
struct Scenario {
    std::vector<LearningTaskSpec> tasks;
    double budget_bits = 0.0;
    std::optional<double> buffer_cap_bits;
    std::optional<ArrivalCurve> arrival;
    double energy_weight = 0.0;  // alpha
    ChannelModel channel;

    int task_count() const { return static_cast<int>(tasks.size()); }
    double final_deadline_s() const { return tasks.empty() ? 0.0 : tasks.back().deadline_s; }
};

/// Fresh bits allotted to each task.
struct Partition {
    Eigen::VectorXd bits;
};

/// Piecewise-constant transmission schedule. The cumulative view is the
/// piecewise-linear integral of the rates.
struct RateSegment {
    double rate_bps = 0.0;
    double duration_s = 0.0;
};

struct RatePlan {
    std::vector<RateSegment> segments;

    double total_duration_s() const;
    double total_bits() const;
    /// Times at which one segment hands over to the next (includes the end).
    std::vector<double> breakpoints_s() const;
};

/// Cumulative bits that must have been delivered by each corner time
/// (right-continuous staircase; the lower wall of the transmission tunnel).
struct StaircaseCorner {
    double time_s = 0.0;
    double cumulative_bits = 0.0;
};

struct StaircaseCurve {
    std::vector<StaircaseCorner> corners;

    double final_time_s() const { return corners.empty() ? 0.0 : corners.back().time_s; }
    double total_bits() const { return corners.empty() ? 0.0 : corners.back().cumulative_bits; }
};

enum class ViolationKind { transmission, buffer, arrival };

struct Violation {
    double time_s = 0.0;
    ViolationKind kind = ViolationKind::transmission;
};

struct FeasibilityReport {
    bool feasible = true;
    std::optional<Violation> first_violation;
    /// Largest carry-over held for future tasks, measured just after each
    /// deadline's consumption.
    double max_buffer_bits = 0.0;
};

const char* to_string(ViolationKind kind);

/// Raised when an instance admits no feasible schedule (cap exceeded,
/// arrival shortfall, ...).
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an iterative solver exhausts its budget; carries the last
/// KKT residuals for diagnosis.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double stationarity, double complementarity)
        : std::runtime_error(what), stationarity(stationarity), complementarity(complementarity) {}

    double stationarity = 0.0;
    double complementarity = 0.0;
};

/// Collects human-readable invariant violations; empty means valid.
std::vector<std::string> validate(const LearningTaskSpec& task);
std::vector<std::string> validate(const ChannelModel& channel);
std::vector<std::string> validate(const ArrivalCurve& arrival);
std::vector<std::string> validate(const Scenario& scenario);
std::vector<std::string> validate(const RatePlan& plan);
std::vector<std::string> validate(const StaircaseCurve& curve);

/// Throws std::invalid_argument listing every violation.
template <typename T>
void validate_or_throw(const T& value, const std::string& label) {
    const auto problems = validate(value);
    if (problems.empty()) return;
    std::string msg = label + ":";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
}

namespace tol {

/// Relative slack applied to all bit-quantity comparisons.
inline constexpr double bits_rel = 1e-9;

inline double slack(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1.0});
    return bits_rel * scale;
}

inline bool geq(double a, double b) { return a >= b - slack(a, b); }
inline bool leq(double a, double b) { return a <= b + slack(a, b); }
inline bool near(double a, double b, double rel = bits_rel) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace tol

}  // namespace txsched
