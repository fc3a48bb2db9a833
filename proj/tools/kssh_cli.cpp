#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kssh/runner.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    double w = 0, v = 0, tmax = 0, dt = 0, tref = -1;
    std::vector<double> gamma;
    std::vector<int> cells;
    std::vector<int> subsystems;
    std::vector<std::string> observables;
    std::string boundary, initial, out, cache;
    int doubled_cap = -2;
    int workers = 0;
    int k_points = 0;
};

void attach_options(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "JSON config file; flags override its values");
    cmd->add_option("--w", opt.w, "intra-cell hopping");
    cmd->add_option("--v", opt.v, "inter-cell hopping");
    cmd->add_option("--gamma", opt.gamma, "measurement rate(s)")->delimiter(',');
    cmd->add_option("--cells", opt.cells, "unit cell count(s)")->delimiter(',');
    cmd->add_option("--boundary", opt.boundary, "open | periodic");
    cmd->add_option("--initial", opt.initial, "localized:<site> | pair:<s1>,<s2>");
    cmd->add_option("--tmax", opt.tmax, "evolution window");
    cmd->add_option("--dt", opt.dt, "sample spacing");
    cmd->add_option("--tref", opt.tref, "time-average window start (default 0.6*tmax)");
    cmd->add_option("--subsystems", opt.subsystems, "subsystem cell counts")->delimiter(',');
    cmd->add_option("--observables", opt.observables, "observable names")->delimiter(',');
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_option("--doubled-cap", opt.doubled_cap, "doubled-chain dimension cap (-1 auto)");
    cmd->add_option("--cache", opt.cache, "basis cache directory");
    cmd->add_option("--workers", opt.workers, "worker threads (env KSSH_WORKERS overrides)");
    cmd->add_option("--kpoints", opt.k_points, "momentum samples for spectrum");
}

kssh::ExperimentConfig build_config(const CLI::App* cmd, const CliOptions& opt) {
    kssh::ExperimentConfig config;
    if (!opt.config_path.empty()) config = kssh::load_config(opt.config_path);
    auto set = [cmd](const std::string& flag) { return cmd->count(flag) > 0; };
    if (set("--w")) config.model.w = opt.w;
    if (set("--v")) config.model.v = opt.v;
    if (set("--boundary")) {
        config.model.boundary =
            opt.boundary == "periodic" ? kssh::Boundary::periodic : kssh::Boundary::open;
        if (opt.boundary != "periodic" && opt.boundary != "open") {
            throw std::invalid_argument("--boundary must be open or periodic");
        }
    }
    if (set("--gamma")) config.gamma_list = opt.gamma;
    if (set("--cells")) config.cells_list = opt.cells;
    if (set("--initial")) config.initial_state = kssh::InitialState::parse(opt.initial);
    if (set("--tmax")) config.grid.t_max = opt.tmax;
    if (set("--dt")) config.grid.dt = opt.dt;
    if (set("--tref")) config.t_ref = opt.tref;
    if (set("--subsystems")) config.subsystem_list = opt.subsystems;
    if (set("--observables")) config.observables = opt.observables;
    if (set("--out")) config.output_dir = opt.out;
    if (set("--doubled-cap")) config.doubled_cap = opt.doubled_cap;
    if (set("--cache")) config.cache_dir = opt.cache;
    if (set("--workers")) config.workers = opt.workers;
    if (set("--kpoints")) config.spectrum_k_points = opt.k_points;
    return config;
}

int report(const kssh::SweepResult& result) {
    int failed = 0;
    for (const auto& row : result.rows) {
        if (!row.error.empty()) {
            ++failed;
            std::fprintf(stderr, "error: %s: %s\n", row.point.c_str(), row.error.c_str());
        }
    }
    std::printf("%zu result rows (%d failed) -> %s\n", result.rows.size(), failed,
                result.output_dir.c_str());
    return result.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Krylov-space dynamics of a monitored non-Hermitian SSH chain"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* spectrum = app.add_subcommand("spectrum", "dispersion and dense spectra");
    CLI::App* evolve = app.add_subcommand("evolve", "spread-complexity dynamics");
    CLI::App* kcop = app.add_subcommand("kcop", "subsystem purification complexity");
    CLI::App* qfi = app.add_subcommand("qfi", "quantum Fisher information");
    CLI::App* sweep = app.add_subcommand("sweep", "composite sweep over the configured grid");
    for (CLI::App* cmd : {spectrum, evolve, kcop, qfi, sweep}) attach_options(cmd, opt);

    CLI::App* repro = app.add_subcommand("reproduce", "run a stored figure recipe");
    std::string figure_id, repro_out, profile = "default";
    repro->add_option("figure", figure_id, "figure id; use 'list' to print the catalog")
        ->required();
    repro->add_option("--out", repro_out, "output directory");
    repro->add_option("--profile", profile, "default | extended")
        ->check(CLI::IsMember({"default", "extended"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (repro->parsed()) {
            if (figure_id == "list") {
                for (const auto& id : kssh::reproduce_ids()) std::printf("%s\n", id.c_str());
                return 0;
            }
            return report(kssh::reproduce(figure_id, repro_out, profile == "extended"));
        }
        for (CLI::App* cmd : {spectrum, evolve, kcop, qfi, sweep}) {
            if (!cmd->parsed()) continue;
            const kssh::ExperimentConfig config = build_config(cmd, opt);
            if (cmd == spectrum) return report(kssh::run_spectrum(config));
            if (cmd == evolve) return report(kssh::run_dynamics(config));
            if (cmd == kcop) return report(kssh::run_kcop(config));
            if (cmd == qfi) return report(kssh::run_qfi(config));
            return report(kssh::run_sweep(config));
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
