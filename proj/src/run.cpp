#include "txsched/run.hpp"

#include "txsched/baselines.hpp"
#include "txsched/instance_gen.hpp"
#include "txsched/merged.hpp"
#include "txsched/model.hpp"
#include "txsched/fitting.hpp"
#include "txsched/rate_control.hpp"
#include "txsched/scenario_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace txsched {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_plan_csv(const std::string& path, const RatePlan& plan, const ChannelModel& channel) {
    std::ofstream out(path);
    out << "segment,t_start_s,t_end_s,rate_bps,power_w,cum_bits\n";
    double t = 0.0, bits = 0.0;
    int index = 0;
    for (const auto& seg : plan.segments) {
        const double t_end = t + seg.duration_s;
        bits += seg.rate_bps * seg.duration_s;
        out << ++index << ',' << fmt(t) << ',' << fmt(t_end) << ',' << fmt(seg.rate_bps) << ','
            << fmt(rate_power_w(seg.rate_bps, channel)) << ',' << fmt(bits) << '\n';
        t = t_end;
    }
}

void write_partition_csv(const std::string& path, const Partition& partition,
                         const Scenario& scenario) {
    std::ofstream out(path);
    out << "task,bits,samples,error\n";
    for (int n = 0; n < scenario.task_count(); ++n) {
        const double samples = sample_count(partition.bits[n], scenario.tasks[n]);
        const double error = samples > 0.0 ? learning_error(samples, scenario.tasks[n])
                                           : std::numeric_limits<double>::infinity();
        out << n + 1 << ',' << fmt(partition.bits[n]) << ',' << fmt(samples) << ',' << fmt(error)
            << '\n';
    }
}

void write_report_txt(const std::string& path, const MergedSolution& sol, const Scenario& scenario,
                      double wall_seconds) {
    std::ofstream out(path);
    out << "objective = " << fmt(sol.report.objective) << '\n';
    out << "energy_j = " << fmt(sol.report.energy_j) << '\n';
    out << "kkt_stationarity_residual = " << fmt(sol.report.kkt_stationarity_residual) << '\n';
    out << "kkt_complementarity_residual = " << fmt(sol.report.kkt_complementarity_residual) << '\n';
    out << "iterations = " << sol.report.iterations << '\n';
    out << "converged = " << (sol.report.converged ? "yes" : "no") << '\n';
    out << "wall_clock_s = " << fmt(wall_seconds) << '\n';
    out << "multiplier_budget = " << fmt(sol.report.multiplier_budget) << '\n';
    for (int n = 0; n < scenario.task_count(); ++n) {
        out << "task" << n + 1 << " bits = " << fmt(sol.partition.bits[n])
            << ", samples_floor = " << fmt(std::floor(sample_count(sol.partition.bits[n], scenario.tasks[n])))
            << ", error = " << fmt(sol.report.per_task_error[n]) << '\n';
    }
}

MergedSolution solve_by_mode(const Scenario& scenario, const std::string& mode,
                             const std::string& kind, double tol) {
    if (mode == "stratified") return solve_stratified(scenario);
    if (mode == "merged") {
        MergedOptions opt;
        opt.kkt_tol = tol;
        return solve_merged(scenario, opt);
    }
    if (mode == "baseline") return baseline_solve(scenario, baseline_kind_from_string(kind));
    throw std::invalid_argument("unknown solve mode: " + mode);
}

int run_solve(const RunRequest& req, const std::string& mode, const std::string& kind,
              std::ostream& out) {
    const Scenario scenario = load_scenario(req.scenario_path);
    const auto t0 = std::chrono::steady_clock::now();
    const MergedSolution sol = solve_by_mode(scenario, mode, kind, req.tol);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::filesystem::path dir(req.out_dir);
    std::filesystem::create_directories(dir);
    write_plan_csv((dir / "plan.csv").string(), sol.plan, scenario.channel);
    write_partition_csv((dir / "partition.csv").string(), sol.partition, scenario);
    write_report_txt((dir / "report.txt").string(), sol, scenario, wall);

    out << "mode " << (mode == "baseline" ? mode + ":" + kind : mode) << ": objective "
        << fmt(sol.report.objective) << ", energy " << fmt(sol.report.energy_j) << " J, "
        << sol.plan.segments.size() << " segments, " << sol.report.iterations << " iterations\n";
    out << "artifacts in " << dir.string() << '\n';
    return 0;
}

int run_sweep(const RunRequest& req, std::ostream& out) {
    if (req.alphas.empty()) throw std::invalid_argument("sweep: no --alphas given");
    const Scenario base = load_scenario(req.scenario_path);
    const std::filesystem::path dir(req.out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "pareto.csv");
    csv << "alpha,energy_j,weighted_error\n";
    MergedOptions opt;
    opt.kkt_tol = req.tol;
    for (double alpha : req.alphas) {
        const Scenario scenario = with_energy_weight(base, alpha);
        const MergedSolution sol = solve_merged(scenario, opt);
        csv << fmt(alpha) << ',' << fmt(sol.report.energy_j) << ','
            << fmt(profile_weighted_error(scenario, sol.partition)) << '\n';
    }
    out << "pareto.csv written for " << req.alphas.size() << " weights in " << dir.string() << '\n';
    return 0;
}

int run_fit(const RunRequest& req, std::ostream& out) {
    std::ifstream in(req.fit_csv_path);
    if (!in) throw std::runtime_error("cannot open points file: " + req.fit_csv_path);
    std::vector<FitSample> points;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b;
        if (!std::getline(row, a, ',') || !std::getline(row, b)) continue;
        try {
            points.push_back({std::stod(a), std::stod(b)});
        } catch (const std::exception&) {
            continue;  // header or stray line
        }
    }
    const FitResult fit = fit_power_law(points);
    const std::filesystem::path dir(req.out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream report(dir / "fit.txt");
    report << "amplitude = " << fmt(fit.amplitude) << '\n'
           << "decay = " << fmt(fit.decay) << '\n'
           << "rmse = " << fmt(fit.rmse) << '\n'
           << "points = " << points.size() << '\n';
    out << "fit: amplitude " << fmt(fit.amplitude) << ", decay " << fmt(fit.decay) << ", rmse "
        << fmt(fit.rmse) << " (" << points.size() << " points)\n";
    return 0;
}

int run_oracle_check(const RunRequest& req, std::ostream& out) {
    std::mt19937_64 rng(req.oracle.seed);
    int failures = 0;
    for (int i = 0; i < req.oracle_instances; ++i) {
        const RateInstance inst = random_rate_instance(rng);
        const ChannelModel channel{1.0, 1.0, 1.0};
        std::string verdict = "ok";
        auto examine = [&](const char* label, const RatePlan& plan, const RatePlan& reference,
                           std::optional<double> cap, const std::optional<ArrivalCurve>& arrival) {
            const auto feas = check_feasible(plan, inst.requirements, cap, arrival);
            const double energy = plan_energy(plan, channel);
            const double bound = plan_energy(reference, channel) * 1.005 + 1e-12;
            if (!feas.feasible || energy > bound) {
                ++failures;
                std::ostringstream why;
                why << "FAIL " << label << (feas.feasible ? " energy " : " infeasible ")
                    << fmt(energy) << " vs oracle bound " << fmt(bound);
                verdict = why.str();
                return false;
            }
            return true;
        };
        examine("unlimited", sp_unlimited(inst.requirements),
                oracle_rate_control(inst.requirements, req.oracle), std::nullopt, std::nullopt) &&
            examine("limited", sp_limited(inst.requirements, inst.buffer_cap_bits),
                    oracle_rate_control(inst.requirements, inst.buffer_cap_bits, req.oracle),
                    inst.buffer_cap_bits, std::nullopt) &&
            examine("bursty", sp_bursty(inst.requirements, inst.arrival),
                    oracle_rate_control(inst.requirements, inst.arrival, req.oracle), std::nullopt,
                    inst.arrival);
        out << "instance " << i + 1 << ": " << verdict << '\n';
    }
    out << req.oracle_instances << " instances, " << failures << " failures\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

Scenario with_energy_weight(const Scenario& scenario, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("energy weight must lie strictly inside (0, 1)");
    Scenario result = scenario;
    double profile_total = 0.0;
    for (const auto& t : scenario.tasks) profile_total += t.error_weight;
    if (profile_total <= 0.0) throw std::invalid_argument("scenario has no error weight to rescale");
    result.energy_weight = alpha;
    for (auto& t : result.tasks) t.error_weight *= (1.0 - alpha) / profile_total;
    return result;
}

double profile_weighted_error(const Scenario& scenario, const Partition& partition) {
    double profile_total = 0.0;
    for (const auto& t : scenario.tasks) profile_total += t.error_weight;
    double acc = 0.0;
    for (int n = 0; n < scenario.task_count(); ++n) {
        const auto& task = scenario.tasks[n];
        if (task.error_weight == 0.0) continue;
        acc += task.error_weight / profile_total *
               learning_error(sample_count(partition.bits[n], task), task);
    }
    return acc;
}

int run(const RunRequest& request, std::ostream& out, std::ostream& err) {
    try {
        if (request.mode == "stratified" || request.mode == "merged")
            return run_solve(request, request.mode, "", out);
        if (request.mode == "baseline" || request.mode.rfind("baseline:", 0) == 0) {
            const std::string kind = request.mode == "baseline"
                                         ? request.baseline_kind
                                         : request.mode.substr(std::string("baseline:").size());
            return run_solve(request, "baseline", kind, out);
        }
        if (request.mode == "sweep") return run_sweep(request, out);
        if (request.mode == "fit") return run_fit(request, out);
        if (request.mode == "oracle-check") return run_oracle_check(request, out);
        throw std::invalid_argument("unknown mode: " + request.mode);
    } catch (const InfeasibleError& e) {
        err << "infeasible instance: " << e.what() << '\n';
        return 2;
    } catch (const ConvergenceError& e) {
        err << "solver did not converge: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace txsched
