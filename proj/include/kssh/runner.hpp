#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kssh/model.hpp"
#include "kssh/observables.hpp"
#include "kssh/types.hpp"

namespace kssh {

/// Site-basis initial state: "localized:<site>" or "pair:<s1>,<s2>" with
/// equal weights; sites are 1-based positions on the 2L-site chain.
struct InitialState {
    enum class Kind { localized, pair };
    Kind kind = Kind::localized;
    int site1 = 15;
    int site2 = 16;

    static InitialState parse(const std::string& text);
    std::string str() const;
    Vector vector(int dim) const;
};

struct ExperimentConfig {
    ModelParams model;       // w, v, boundary; gamma/cells come from the lists
    TimeGrid grid;
    InitialState initial_state;
    std::vector<double> gamma_list{0.5};
    std::vector<int> cells_list{20};
    std::vector<int> subsystem_list;
    std::vector<std::string> observables{"complexity", "entropy", "entropic_complexity",
                                         "kipr"};
    double t_ref = -1.0; // < 0 selects 0.6 * t_max
    std::string output_dir = "out";
    int doubled_cap = -1;
    std::string cache_dir;
    int workers = 0; // 0: env override KSSH_WORKERS, then hardware
    int spectrum_k_points = 201;

    double effective_t_ref() const;
    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_config(const std::string& path);

struct SweepRow {
    std::string point;      // "gamma=1.2,L=20,..."
    std::string observable;
    std::string file;       // relative CSV path, empty for scalar-only rows
    std::optional<double> scalar;
    std::string error;      // per-point isolation: failures land here
};

struct SweepResult {
    std::vector<SweepRow> rows;
    nlohmann::json manifest;
    std::string output_dir;
    int exit_code = 0; // 0 ok, 2 partial failure

    bool ok() const { return exit_code == 0; }
};

SweepResult run_spectrum(const ExperimentConfig& config);
SweepResult run_dynamics(const ExperimentConfig& config);
SweepResult run_kcop(const ExperimentConfig& config);
SweepResult run_qfi(const ExperimentConfig& config);

/// Composite sweep: dispatches on the configured observable names.
SweepResult run_sweep(const ExperimentConfig& config);

/// Known figure recipes ("fig1", "fig2", ..., "qfipb").  extended switches
/// the desk-scale profile for the heavy kcop figures to the full system size.
std::vector<std::string> reproduce_ids();
SweepResult reproduce(const std::string& figure_id, const std::string& output_dir,
                      bool extended = false);

/// Bounded worker pool; results must be written to disjoint slots by index.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);
int resolve_workers(int requested);

std::uint64_t file_checksum(const std::string& path);
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

} // namespace kssh
