// bvsol: batch runner for vanishing-viscosity experiments on rate-independent
// systems. Subcommands: run, sweep, transition, diagnose, export.
//
// Exit codes: 0 all verdicts pass, 1 diagnostic failure, 2 solver failure,
// 3 configuration error, 4 infeasible transition.

#include "bvsol/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config;
    std::string preset;
    std::string out = "out";
    int workers = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "configuration file (INI sections, key = value)");
    cmd->add_option("--preset", args.preset,
                    "named preset: moving_interface, double_well_wave, tv_double_well, "
                    "dirichlet_well");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--workers", args.workers, "concurrent sweep cells (0 = from config)");
    cmd->add_option("--override", args.overrides, "override as section.key=value (repeatable)")
        ->take_all();
}

bvsol::ExperimentConfig load(const CommonArgs& args) {
    auto cfg = bvsol::load_config(args.preset, args.config, args.overrides);
    if (args.workers > 0) cfg.workers = args.workers;
    return cfg;
}

void print_verdicts(const bvsol::RunOutcome& out) {
    for (const auto& v : out.verdicts)
        std::printf("%-34s %s  (value %.6g, threshold %.6g)\n", v.name.c_str(),
                    v.pass ? "PASS" : "FAIL", v.value, v.threshold);
    if (!out.message.empty()) std::fprintf(stderr, "%s\n", out.message.c_str());
}

bvsol::GridFunction state_arg(const bvsol::ExperimentConfig& cfg, const std::string& constant,
                              const std::string& snapshot, int index) {
    if (!snapshot.empty()) {
        std::ifstream in(snapshot);
        if (!in) throw bvsol::config_error("cannot open snapshot " + snapshot);
        nlohmann::ordered_json j;
        in >> j;
        const bvsol::Grid1D grid(j["grid_l"].get<double>(), j["grid_n"].get<int>());
        if (index < 0 || index >= static_cast<int>(j["states"].size()))
            throw bvsol::config_error("snapshot index out of range");
        return {grid, j["states"][static_cast<std::size_t>(index)].get<std::vector<double>>()};
    }
    return {cfg.model.grid, std::stod(constant)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bvsol: balanced-viscosity limits of rate-independent systems"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, trans_args, diag_args, export_args;

    auto* cmd_run = app.add_subcommand("run", "solve one configuration and run diagnostics");
    add_common(cmd_run, run_args);

    auto* cmd_sweep = app.add_subcommand("sweep", "run a (eps, tau) refinement or grid sweep");
    add_common(cmd_sweep, sweep_args);

    auto* cmd_trans = app.add_subcommand("transition", "optimize a jump transition at frozen t");
    add_common(cmd_trans, trans_args);
    std::string u_minus = "0", u_plus = "1", snapshot;
    double frozen_t = 0.0;
    int segments = 200, idx_minus = 0, idx_plus = -1;
    cmd_trans->add_option("--u-minus", u_minus, "left endpoint (constant state value)");
    cmd_trans->add_option("--u-plus", u_plus, "right endpoint (constant state value)");
    cmd_trans->add_option("--t", frozen_t, "frozen time of the transition");
    cmd_trans->add_option("--segments", segments, "path segments M");
    cmd_trans->add_option("--snapshot", snapshot, "states.json to read endpoints from");
    cmd_trans->add_option("--index-minus", idx_minus, "snapshot index of u-");
    cmd_trans->add_option("--index-plus", idx_plus, "snapshot index of u+");

    auto* cmd_diag = app.add_subcommand("diagnose", "re-run diagnostics on stored artifacts");
    cmd_diag->add_option("--out", diag_args.out, "artifact directory")->required();

    auto* cmd_export = app.add_subcommand("export", "flatten diagnostics.json to CSV");
    cmd_export->add_option("--out", export_args.out, "artifact directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        bvsol::RunOutcome out;
        if (cmd_run->parsed()) {
            out = bvsol::run_experiment(load(run_args), run_args.out);
        } else if (cmd_sweep->parsed()) {
            out = bvsol::sweep_experiment(load(sweep_args), sweep_args.out);
        } else if (cmd_trans->parsed()) {
            const auto cfg = load(trans_args);
            const auto a = state_arg(cfg, u_minus, snapshot, idx_minus);
            const auto b = state_arg(cfg, u_plus, snapshot, idx_plus);
            out = bvsol::transition_experiment(cfg, a, b, frozen_t, segments, trans_args.out);
        } else if (cmd_diag->parsed()) {
            out = bvsol::diagnose_artifacts(diag_args.out);
        } else if (cmd_export->parsed()) {
            out = bvsol::export_artifacts(export_args.out);
        }
        print_verdicts(out);
        return out.exit_code;
    } catch (const bvsol::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    } catch (const bvsol::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
