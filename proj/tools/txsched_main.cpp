#include "txsched/run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<double> parse_alphas(const std::string& csv) {
    std::vector<double> values;
    std::istringstream in(csv);
    std::string token;
    while (std::getline(in, token, ',')) {
        if (!token.empty()) values.push_back(std::stod(token));
    }
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-partition and transmission-rate schedules for multi-deadline learning tasks"};
    app.require_subcommand(1);

    txsched::RunRequest req;
    std::string alphas_csv;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", req.out_dir, "output directory for artifacts");
        cmd->add_option("--tol", req.tol, "solver certification tolerance");
        cmd->add_option("--seed", seed, "random seed");
    };

    auto* solve = app.add_subcommand("solve", "solve one scenario and emit plan/partition/report");
    solve->add_option("--mode", req.mode, "stratified | merged | baseline:<kind>")
        ->default_val("merged");
    solve->add_option("scenario", req.scenario_path, "scenario file")->required();
    add_common(solve);

    auto* sweep = app.add_subcommand("sweep", "Pareto sweep over energy weights, emits pareto.csv");
    sweep->add_option("--alphas", alphas_csv, "comma-separated energy weights")->required();
    sweep->add_option("scenario", req.scenario_path, "scenario file")->required();
    add_common(sweep);

    auto* baseline = app.add_subcommand("baseline", "run a comparison scheme");
    baseline->add_option("--kind", req.baseline_kind, "EDP | ERC | EDPRC")->required();
    baseline->add_option("scenario", req.scenario_path, "scenario file")->required();
    add_common(baseline);

    auto* fit = app.add_subcommand("fit", "fit the error model to samples,error CSV points");
    fit->add_option("points", req.fit_csv_path, "CSV file with columns samples,error")->required();
    add_common(fit);

    auto* oracle = app.add_subcommand("oracle-check", "cross-check schedules against the brute-force oracle");
    oracle->add_option("--n", req.oracle_instances, "number of random instances");
    add_common(oracle);

    CLI11_PARSE(app, argc, argv);

    if (solve->parsed()) {
        // mode already holds stratified/merged/baseline:<kind>
    } else if (sweep->parsed()) {
        req.mode = "sweep";
        req.alphas = parse_alphas(alphas_csv);
    } else if (baseline->parsed()) {
        req.mode = "baseline";
    } else if (fit->parsed()) {
        req.mode = "fit";
    } else if (oracle->parsed()) {
        req.mode = "oracle-check";
    }
    req.oracle.seed = seed;

    return txsched::run(req, std::cout, std::cerr);
}
