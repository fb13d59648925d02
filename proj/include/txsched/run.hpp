#pragma once

#include "txsched/oracle.hpp"
#include "txsched/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace txsched {

/// One CLI invocation. `mode` is one of stratified, merged, baseline:<kind>,
/// oracle-check, fit, sweep.
struct RunRequest {
    std::string mode;
    std::string scenario_path;
    std::string out_dir = ".";
    std::vector<double> alphas;
    std::string baseline_kind;
    std::string fit_csv_path;
    OracleConfig oracle;
    int oracle_instances = 50;
    double tol = 1e-6;
};

/// Executes a request, writing artifacts under out_dir and a summary to
/// `out`. Returns the process exit code: 0 success, 2 infeasible instance,
/// 3 solver non-convergence, 1 anything else (diagnostics on `err`).
int run(const RunRequest& request, std::ostream& out, std::ostream& err);

/// Re-weights a scenario to energy weight `alpha`, keeping the tasks'
/// relative error-weight profile; the result is normalized.
Scenario with_energy_weight(const Scenario& scenario, double alpha);

/// Weighted mean task error under the alpha-independent profile
/// error_weight / sum(error_weights); the error column of pareto.csv.
double profile_weighted_error(const Scenario& scenario, const Partition& partition);

}  // namespace txsched
