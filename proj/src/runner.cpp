#include "kssh/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kssh/bilanczos.hpp"
#include "kssh/evolution.hpp"
#include "kssh/qfi.hpp"
#include "kssh/subsystem.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace kssh {

namespace {

constexpr const char* kToolName = "kssh";
constexpr const char* kToolVersion = "0.1.0";
constexpr double kLanczosTol = 1e-10;
constexpr double kLeakageWarn = 1e-6;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string boundary_name(Boundary b) {
    return b == Boundary::open ? "open" : "periodic";
}

Boundary parse_boundary(const std::string& s) {
    if (s == "open") return Boundary::open;
    if (s == "periodic") return Boundary::periodic;
    throw std::invalid_argument("boundary must be 'open' or 'periodic', got '" + s + "'");
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t bytes, std::uint64_t hash) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

bool wants(const ExperimentConfig& config, const std::string& name) {
    for (const auto& o : config.observables) {
        if (o == name) return true;
    }
    return false;
}

} // namespace

// ---------------------------------------------------------------- InitialState

InitialState InitialState::parse(const std::string& text) {
    InitialState st;
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("initial state must be 'localized:<site>' or 'pair:<s1>,<s2>'");
    }
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    try {
        if (kind == "localized") {
            st.kind = Kind::localized;
            st.site1 = std::stoi(rest);
        } else if (kind == "pair") {
            const auto comma = rest.find(',');
            if (comma == std::string::npos) throw std::invalid_argument("pair needs two sites");
            st.kind = Kind::pair;
            st.site1 = std::stoi(rest.substr(0, comma));
            st.site2 = std::stoi(rest.substr(comma + 1));
        } else {
            throw std::invalid_argument("unknown initial-state kind '" + kind + "'");
        }
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse initial state '" + text + "'");
    }
    return st;
}

std::string InitialState::str() const {
    if (kind == Kind::localized) return "localized:" + std::to_string(site1);
    return "pair:" + std::to_string(site1) + "," + std::to_string(site2);
}

Vector InitialState::vector(int dim) const {
    // sites count positions along the physical chain; storage is interleaved
    Vector psi = Vector::Zero(dim);
    if (kind == Kind::localized) {
        psi(site_index_from_chain_position(site1, dim / 2)) = 1.0;
    } else {
        if (site1 == site2) throw std::invalid_argument("pair state needs distinct sites");
        psi(site_index_from_chain_position(site1, dim / 2)) = 1.0 / std::sqrt(2.0);
        psi(site_index_from_chain_position(site2, dim / 2)) = 1.0 / std::sqrt(2.0);
    }
    return psi;
}

// ------------------------------------------------------------ ExperimentConfig

double ExperimentConfig::effective_t_ref() const {
    return t_ref >= 0.0 ? t_ref : 0.6 * grid.t_max;
}

void ExperimentConfig::validate() const {
    grid.validate();
    if (gamma_list.empty()) throw std::invalid_argument("config: gamma list is empty");
    if (cells_list.empty()) throw std::invalid_argument("config: cells list is empty");
    for (double g : gamma_list) {
        if (!(g >= 0.0)) throw std::invalid_argument("config: gamma must be >= 0");
    }
    for (int l : cells_list) {
        if (l < 1) throw std::invalid_argument("config: cells must be >= 1");
        InitialState st = initial_state;
        st.vector(2 * l); // throws when a site is out of range
    }
    if (effective_t_ref() >= grid.t_max) {
        throw std::invalid_argument("config: t_ref must be below t_max");
    }
    if (spectrum_k_points < 2) throw std::invalid_argument("config: k_points must be >= 2");
}

json ExperimentConfig::to_json() const {
    json j;
    j["w"] = model.w;
    j["v"] = model.v;
    j["boundary"] = boundary_name(model.boundary);
    j["gamma"] = gamma_list;
    j["cells"] = cells_list;
    j["initial"] = initial_state.str();
    j["tmax"] = grid.t_max;
    j["dt"] = grid.dt;
    j["tstart"] = grid.t_start;
    j["tref"] = t_ref;
    j["subsystems"] = subsystem_list;
    j["observables"] = observables;
    j["out"] = output_dir;
    j["doubled_cap"] = doubled_cap;
    j["cache"] = cache_dir;
    j["workers"] = workers;
    j["k_points"] = spectrum_k_points;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("w")) c.model.w = j.at("w").get<double>();
    if (j.contains("v")) c.model.v = j.at("v").get<double>();
    if (j.contains("boundary")) c.model.boundary = parse_boundary(j.at("boundary").get<std::string>());
    if (j.contains("gamma")) {
        if (j.at("gamma").is_array()) c.gamma_list = j.at("gamma").get<std::vector<double>>();
        else c.gamma_list = {j.at("gamma").get<double>()};
    }
    if (j.contains("cells")) {
        if (j.at("cells").is_array()) c.cells_list = j.at("cells").get<std::vector<int>>();
        else c.cells_list = {j.at("cells").get<int>()};
    }
    if (j.contains("initial")) c.initial_state = InitialState::parse(j.at("initial").get<std::string>());
    if (j.contains("tmax")) c.grid.t_max = j.at("tmax").get<double>();
    if (j.contains("dt")) c.grid.dt = j.at("dt").get<double>();
    if (j.contains("tstart")) c.grid.t_start = j.at("tstart").get<double>();
    if (j.contains("tref")) c.t_ref = j.at("tref").get<double>();
    if (j.contains("subsystems")) c.subsystem_list = j.at("subsystems").get<std::vector<int>>();
    if (j.contains("observables")) c.observables = j.at("observables").get<std::vector<std::string>>();
    if (j.contains("out")) c.output_dir = j.at("out").get<std::string>();
    if (j.contains("doubled_cap")) c.doubled_cap = j.at("doubled_cap").get<int>();
    if (j.contains("cache")) c.cache_dir = j.at("cache").get<std::string>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("k_points")) c.spectrum_k_points = j.at("k_points").get<int>();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

// --------------------------------------------------------------------- workers

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("KSSH_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    workers = std::min(std::max(workers, 1), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// ------------------------------------------------------------------ file utils

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checksum: cannot open " + path);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char buf[65536];
    while (is) {
        is.read(buf, sizeof(buf));
        hash = fnv1a_bytes(buf, static_cast<std::size_t>(is.gcount()), hash);
    }
    return hash;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << header << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ',';
            os << fmt_double(row[i]);
        }
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

namespace {

std::vector<std::vector<double>> series_rows(const ObservableSeries& s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(s.times.size());
    for (int i = 0; i < s.times.size(); ++i) rows.push_back({s.times(i), s.values(i)});
    return rows;
}

std::vector<std::vector<double>> qfi_rows(const QfiSeries& s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(s.times.size());
    for (int i = 0; i < s.times.size(); ++i) rows.push_back({s.times(i), s.values(i)});
    return rows;
}

// Collects rows and warnings from worker tasks and assembles the manifest.
class SweepAssembler {
public:
    SweepAssembler(const ExperimentConfig& config, std::string command)
        : config_(config), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
        fs::create_directories(config.output_dir);
    }

    const std::string& dir() const { return config_.output_dir; }

    void add_row(SweepRow row) {
        std::lock_guard<std::mutex> lock(mutex_);
        rows_.push_back(std::move(row));
    }

    void add_warning(const std::string& text) {
        std::lock_guard<std::mutex> lock(mutex_);
        warnings_.push_back(text);
    }

    void record_failure(const std::string& point, const std::string& what) {
        SweepRow row;
        row.point = point;
        row.error = what;
        add_row(std::move(row));
    }

    std::string csv_path(const std::string& name) const { return config_.output_dir + "/" + name; }

    SweepResult finish() {
        SweepResult result;
        std::sort(rows_.begin(), rows_.end(), [](const SweepRow& a, const SweepRow& b) {
            if (a.point != b.point) return a.point < b.point;
            if (a.observable != b.observable) return a.observable < b.observable;
            return a.file < b.file;
        });
        result.rows = std::move(rows_);
        result.output_dir = config_.output_dir;

        json manifest;
        manifest["tool"] = kToolName;
        manifest["version"] = kToolVersion;
        manifest["command"] = command_;
        manifest["config"] = config_.to_json();
        const std::string dump = manifest["config"].dump();
        manifest["config_hash"] = hex64(fnv1a_bytes(dump.data(), dump.size(), 0xcbf29ce484222325ull));
        manifest["tolerances"] = {{"bilanczos_tol", kLanczosTol},
                                  {"pt_critical_tol", 1e-12},
                                  {"purify_cutoff", 1e-14},
                                  {"leakage_warning", kLeakageWarn}};
        manifest["warnings"] = warnings_;

        json outputs = json::array();
        int failures = 0;
        for (const auto& row : result.rows) {
            json r;
            r["point"] = row.point;
            r["observable"] = row.observable;
            if (!row.file.empty()) {
                r["file"] = row.file;
                r["checksum"] = hex64(file_checksum(csv_path(row.file)));
            }
            if (row.scalar) r["value"] = *row.scalar;
            if (!row.error.empty()) {
                r["error"] = row.error;
                ++failures;
            }
            outputs.push_back(std::move(r));
        }
        manifest["outputs"] = std::move(outputs);
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        manifest["timing_seconds"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() / 1000.0;

        std::ofstream os(csv_path("manifest.json"));
        os << manifest.dump(2) << '\n';

        result.manifest = std::move(manifest);
        result.exit_code = failures ? 2 : 0;
        return result;
    }

private:
    ExperimentConfig config_;
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::mutex mutex_;
    std::vector<SweepRow> rows_;
    std::vector<std::string> warnings_;
};

KrylovBasis basis_for(const Hamiltonian& h, const Vector& psi0, const std::string& cache_dir) {
    if (cache_dir.empty()) return state_bilanczos(h, psi0, kLanczosTol);
    fs::create_directories(cache_dir);
    const std::string path =
        cache_dir + "/" + hex64(basis_cache_key(h.matrix, psi0, kLanczosTol)) + ".kbasis";
    if (fs::exists(path)) return load_basis(path);
    KrylovBasis basis = state_bilanczos(h, psi0, kLanczosTol);
    save_basis(basis, path);
    return basis;
}

std::string point_name(double gamma, int cells, const ExperimentConfig& config) {
    return "gamma=" + fmt_short(gamma) + ",L=" + std::to_string(cells) + ",boundary=" +
           boundary_name(config.model.boundary) + ",initial=" + config.initial_state.str();
}

std::string file_tag(double gamma, int cells, const ExperimentConfig& config) {
    return "gamma" + fmt_short(gamma) + "_L" + std::to_string(cells) + "_" +
           boundary_name(config.model.boundary);
}

} // namespace

// ---------------------------------------------------------------- run_spectrum

SweepResult run_spectrum(const ExperimentConfig& config) {
    config.validate();
    SweepAssembler out(config, "spectrum");
    const int workers = resolve_workers(config.workers);
    const int n_gamma = static_cast<int>(config.gamma_list.size());

    parallel_for(n_gamma, workers, [&](int gi) {
        const double gamma = config.gamma_list[gi];
        ModelParams params = config.model;
        params.gamma = gamma;
        params.cells = config.cells_list.front();
        const std::string point = point_name(gamma, params.cells, config);
        try {
            std::vector<std::vector<double>> rows;
            const int nk = config.spectrum_k_points;
            for (int i = 0; i < nk; ++i) {
                const double k = -M_PI + 2.0 * M_PI * i / (nk - 1);
                const SpectrumPoint sp = dispersion(params, k);
                rows.push_back({k, sp.eps_plus.real(), sp.eps_plus.imag(),
                                sp.eps_minus.real(), sp.eps_minus.imag()});
            }
            const std::string disp_file = "dispersion_gamma" + fmt_short(gamma) + ".csv";
            write_csv(out.csv_path(disp_file), "k,re_plus,im_plus,re_minus,im_minus", rows);
            out.add_row({point, "dispersion", disp_file, std::nullopt, ""});

            const Hamiltonian h = build_hamiltonian(params);
            std::vector<std::vector<double>> eigrows;
            for (const cplx& e : full_spectrum(h)) eigrows.push_back({e.real(), e.imag()});
            const std::string eig_file = "eigvals_" + file_tag(gamma, params.cells, config) + ".csv";
            write_csv(out.csv_path(eig_file), "re,im", eigrows);
            out.add_row({point, "eigenvalues", eig_file, std::nullopt, ""});
        } catch (const std::exception& e) {
            out.record_failure(point, e.what());
        }
    });
    return out.finish();
}

// ---------------------------------------------------------------- run_dynamics

SweepResult run_dynamics(const ExperimentConfig& config) {
    config.validate();
    SweepAssembler out(config, "evolve");
    const int workers = resolve_workers(config.workers);
    const int n_gamma = static_cast<int>(config.gamma_list.size());
    const int n_cells = static_cast<int>(config.cells_list.size());
    const int count = n_gamma * n_cells;

    parallel_for(count, workers, [&](int idx) {
        const double gamma = config.gamma_list[idx % n_gamma];
        const int cells = config.cells_list[idx / n_gamma];
        ModelParams params = config.model;
        params.gamma = gamma;
        params.cells = cells;
        const std::string point = point_name(gamma, cells, config);
        try {
            const Hamiltonian h = build_hamiltonian(params);
            const Vector psi0 = config.initial_state.vector(params.dim());
            const KrylovBasis basis = basis_for(h, psi0, config.cache_dir);
            if (basis.dim < params.dim()) {
                const double leak = max_leakage(h, psi0, basis, config.grid);
                if (leak > kLeakageWarn) {
                    out.add_warning(point + ": early-terminated basis (K=" +
                                    std::to_string(basis.dim) + "), exact-state leakage " +
                                    fmt_short(leak));
                }
            }
            const auto states = krylov_wavefunctions(basis, config.grid);

            std::vector<std::pair<std::string, ObservableKind>> wanted;
            if (wants(config, "complexity")) wanted.push_back({"complexity", ObservableKind::complexity});
            if (wants(config, "entropy")) wanted.push_back({"entropy", ObservableKind::entropy});
            if (wants(config, "entropic_complexity")) {
                wanted.push_back({"entropic_complexity", ObservableKind::entropic_complexity});
            }
            if (wants(config, "kipr")) {
                wanted.push_back({"kipr_r", ObservableKind::kipr_right});
                wanted.push_back({"kipr_l", ObservableKind::kipr_left});
            }
            for (const auto& [name, kind] : wanted) {
                const ObservableSeries series = build_series(states, kind);
                const std::string file = name + "_" + file_tag(gamma, cells, config) + ".csv";
                write_csv(out.csv_path(file), "t,value", series_rows(series));
                out.add_row({point, name, file, std::nullopt, ""});

                SweepRow late{point, name + ".late_mean", "", late_window_mean(series), ""};
                out.add_row(late);
                if (auto t_sat = saturation_time(series)) {
                    out.add_row({point, name + ".saturation_time", "", *t_sat, ""});
                }
                out.add_row({point, name + ".prominent_maxima", "",
                             static_cast<double>(prominent_maxima_count(series)), ""});
            }
        } catch (const std::exception& e) {
            out.record_failure(point, e.what());
        }
    });
    return out.finish();
}

// -------------------------------------------------------------------- run_kcop

SweepResult run_kcop(const ExperimentConfig& config) {
    config.validate();
    if (config.subsystem_list.empty()) {
        throw std::invalid_argument("kcop: subsystem list is empty");
    }
    SweepAssembler out(config, "kcop");
    const int workers = resolve_workers(config.workers);
    const int n_gamma = static_cast<int>(config.gamma_list.size());
    const int n_cells = static_cast<int>(config.cells_list.size());
    const int n_sub = static_cast<int>(config.subsystem_list.size());
    const int count = n_gamma * n_cells * n_sub;
    const double t_ref = config.effective_t_ref();

    struct PointResult {
        double late_kcop = 0.0, avg_kcop = 0.0, avg_kipr = 0.0;
        bool ok = false;
    };
    std::vector<PointResult> results(count);

    parallel_for(count, workers, [&](int idx) {
        const double gamma = config.gamma_list[idx % n_gamma];
        const int cells = config.cells_list[(idx / n_gamma) % n_cells];
        const int ell = config.subsystem_list[idx / (n_gamma * n_cells)];
        ModelParams params = config.model;
        params.gamma = gamma;
        params.cells = cells;
        const std::string point = point_name(gamma, cells, config) + ",ell=" + std::to_string(ell);
        try {
            const Hamiltonian h = build_hamiltonian(params);
            const Vector psi0 = config.initial_state.vector(params.dim());
            const KrylovBasis basis = basis_for(h, psi0, config.cache_dir);
            const SubsystemDynamics dyn =
                subsystem_dynamics(basis, config.grid, ell, config.doubled_cap);
            if (dyn.doubled_stop == LanczosStop::cap_reached && dyn.max_tail_weight > 1e-3) {
                out.add_warning(point + ": doubled-chain cap (" +
                                std::to_string(dyn.doubled_dim) + ") clips the distribution, " +
                                "tail weight " + fmt_short(dyn.max_tail_weight));
            }
            const std::string tag = file_tag(gamma, cells, config) + "_ell" + std::to_string(ell);
            const std::string kcop_file = "kcop_" + tag + ".csv";
            write_csv(out.csv_path(kcop_file), "t,kcop", series_rows(dyn.kcop));
            out.add_row({point, "kcop", kcop_file, std::nullopt, ""});
            const std::string kipr_file = "kipr_purified_" + tag + ".csv";
            write_csv(out.csv_path(kipr_file), "t,kipr_purified", series_rows(dyn.kipr_purified));
            out.add_row({point, "kipr_purified", kipr_file, std::nullopt, ""});

            PointResult r;
            r.late_kcop = late_window_mean(dyn.kcop);
            r.avg_kcop = time_average(dyn.kcop, t_ref);
            r.avg_kipr = time_average(dyn.kipr_purified, t_ref);
            r.ok = true;
            results[idx] = r;
            out.add_row({point, "kcop.late_mean", "", r.late_kcop, ""});
            out.add_row({point, "kcop.time_average", "", r.avg_kcop, ""});
            out.add_row({point, "kipr_purified.time_average", "", r.avg_kipr, ""});
            out.add_row({point, "ell_k", "", static_cast<double>(dyn.ell_k), ""});
        } catch (const std::exception& e) {
            out.record_failure(point, e.what());
        }
    });

    // Scaling tables and fits over the subsystem list, one per (gamma, L).
    for (int ci = 0; ci < n_cells; ++ci) {
        const int cells = config.cells_list[ci];
        for (int gi = 0; gi < n_gamma; ++gi) {
            const double gamma = config.gamma_list[gi];
            const std::string point = point_name(gamma, cells, config);
            std::vector<double> ells, late, avg, kipr_avg;
            for (int si = 0; si < n_sub; ++si) {
                const int idx = gi + n_gamma * (ci + n_cells * si);
                if (!results[idx].ok) continue;
                ells.push_back(config.subsystem_list[si]);
                late.push_back(results[idx].late_kcop);
                avg.push_back(results[idx].avg_kcop);
                kipr_avg.push_back(results[idx].avg_kipr);
            }
            if (ells.size() < 2) continue;
            const std::string tag = file_tag(gamma, cells, config);
            auto emit_table = [&](const std::string& name, const std::vector<double>& vals) {
                std::vector<std::vector<double>> rows;
                for (std::size_t i = 0; i < ells.size(); ++i) rows.push_back({ells[i], vals[i]});
                const std::string file = name + "_vs_ell_" + tag + ".csv";
                write_csv(out.csv_path(file), "ell,value", rows);
                out.add_row({point, name + "_vs_ell", file, std::nullopt, ""});
            };
            emit_table("kcop_late", late);
            emit_table("kcop_avg", avg);
            emit_table("kipr_purified_avg", kipr_avg);
            if (ells.size() >= 3) {
                const auto to_vec = [](const std::vector<double>& v) {
                    return Eigen::Map<const RealVector>(v.data(), static_cast<int>(v.size()));
                };
                try {
                    const FitResult f1 = power_law_fit(to_vec(ells), to_vec(late));
                    out.add_row({point, "kcop_late.scaling_exponent", "", f1.exponent, ""});
                    const FitResult f2 = power_law_fit(to_vec(ells), to_vec(avg));
                    out.add_row({point, "kcop_avg.scaling_exponent", "", f2.exponent, ""});
                    const FitResult f3 = power_law_fit(to_vec(ells), to_vec(kipr_avg));
                    out.add_row({point, "kipr_purified_avg.scaling_exponent", "", f3.exponent, ""});
                } catch (const std::exception& e) {
                    out.record_failure(point, std::string("scaling fit: ") + e.what());
                }
            }
        }
    }

    // Time-averaged kcop against gamma, one file per (L, ell).
    for (int ci = 0; ci < n_cells; ++ci) {
        for (int si = 0; si < n_sub; ++si) {
            std::vector<std::vector<double>> rows;
            for (int gi = 0; gi < n_gamma; ++gi) {
                const int idx = gi + n_gamma * (ci + n_cells * si);
                if (!results[idx].ok) continue;
                rows.push_back({config.gamma_list[gi], results[idx].avg_kcop});
            }
            if (rows.empty()) continue;
            const std::string file = "kcop_avg_vs_gamma_L" +
                                     std::to_string(config.cells_list[ci]) + "_ell" +
                                     std::to_string(config.subsystem_list[si]) + ".csv";
            write_csv(out.csv_path(file), "gamma,kcop_avg", rows);
            out.add_row({"L=" + std::to_string(config.cells_list[ci]) +
                             ",ell=" + std::to_string(config.subsystem_list[si]),
                         "kcop_avg_vs_gamma", file, std::nullopt, ""});
        }
    }
    return out.finish();
}

// --------------------------------------------------------------------- run_qfi

SweepResult run_qfi(const ExperimentConfig& config) {
    config.validate();
    SweepAssembler out(config, "qfi");
    const int workers = resolve_workers(config.workers);
    const int n_gamma = static_cast<int>(config.gamma_list.size());
    const int n_cells = static_cast<int>(config.cells_list.size());
    const int count = n_gamma * n_cells;
    const double t_ref = config.effective_t_ref();
    const bool want_state = wants(config, "qfi_state") || config.observables.empty();
    const bool want_operator = wants(config, "qfi_operator");

    struct PointResult {
        double avg_state_na = 0.0, avg_state_1mb = 0.0;
        double avg_full = 0.0, avg_diag = 0.0;
        bool ok_state = false, ok_operator = false;
    };
    std::vector<PointResult> results(count);

    parallel_for(count, workers, [&](int idx) {
        const double gamma = config.gamma_list[idx % n_gamma];
        const int cells = config.cells_list[idx / n_gamma];
        ModelParams params = config.model;
        params.gamma = gamma;
        params.cells = cells;
        const std::string point = point_name(gamma, cells, config);
        const std::string tag = file_tag(gamma, cells, config);
        try {
            const Hamiltonian h = build_hamiltonian(params);
            const Vector psi0 = config.initial_state.vector(params.dim());
            const Matrix op_na = measurement_operator(params, MeasurementKind::n_a);

            if (want_state) {
                const QfiSeries s_na = qfi_state(h, psi0, op_na, config.grid);
                const std::string f_na = "qfi_state_nA_" + tag + ".csv";
                write_csv(out.csv_path(f_na), "t,fq", qfi_rows(s_na));
                out.add_row({point, "qfi_state_nA", f_na, std::nullopt, ""});
                results[idx].avg_state_na = averaged_qfi(s_na, t_ref);
                out.add_row({point, "qfi_state_nA.time_average", "", results[idx].avg_state_na, ""});

                const Matrix op_1mb =
                    measurement_operator(params, MeasurementKind::one_minus_n_b);
                const QfiSeries s_b = qfi_state(h, psi0, op_1mb, config.grid);
                const std::string f_b = "qfi_state_1mnB_" + tag + ".csv";
                write_csv(out.csv_path(f_b), "t,fq", qfi_rows(s_b));
                out.add_row({point, "qfi_state_1mnB", f_b, std::nullopt, ""});
                results[idx].avg_state_1mb = averaged_qfi(s_b, t_ref);
                out.add_row({point, "qfi_state_1mnB.time_average", "", results[idx].avg_state_1mb, ""});
                results[idx].ok_state = true;
            }

            if (want_operator) {
                const OperatorQfi suite = qfi_operator_suite(h, psi0, op_na, config.grid);
                const std::string f_full = "qfi_operator_" + tag + ".csv";
                write_csv(out.csv_path(f_full), "t,fq", qfi_rows(suite.full));
                out.add_row({point, "qfi_operator", f_full, std::nullopt, ""});
                const std::string f_diag = "qfi_diagonal_" + tag + ".csv";
                write_csv(out.csv_path(f_diag), "t,fq", qfi_rows(suite.diagonal));
                out.add_row({point, "qfi_diagonal", f_diag, std::nullopt, ""});

                results[idx].avg_full = averaged_qfi(suite.full, t_ref);
                results[idx].avg_diag = averaged_qfi(suite.diagonal, t_ref);
                results[idx].ok_operator = true;
                out.add_row({point, "qfi_operator.time_average", "", results[idx].avg_full, ""});
                out.add_row({point, "qfi_diagonal.time_average", "", results[idx].avg_diag, ""});
                if (suite.max_pair_imag > 1e-8) {
                    out.add_warning(point + ": operator wavefunction pair products deviate from real by " +
                                    fmt_short(suite.max_pair_imag));
                }

                // f_n tables, thinned in time.
                const int stride = std::max(1, static_cast<int>(suite.fn.times.size()) / 50);
                for (int i = 0; i < suite.fn.times.size(); i += stride) {
                    std::vector<std::vector<double>> rows;
                    for (int m = 0; m < suite.fn.f.cols(); ++m) {
                        rows.push_back({static_cast<double>(m), suite.fn.f(i, m)});
                    }
                    const std::string file =
                        "fn_" + tag + "_t" + fmt_short(suite.fn.times(i)) + ".csv";
                    write_csv(out.csv_path(file), "n,f_n", rows);
                    out.add_row({point, "fn_profile", file, std::nullopt, ""});
                }
            }
        } catch (const std::exception& e) {
            out.record_failure(point, e.what());
        }
    });

    // Averaged curves per picture: gamma, fq_avg, L.
    auto emit_curve = [&](const std::string& name,
                          const std::function<std::optional<double>(const PointResult&)>& pick) {
        std::vector<std::vector<double>> rows;
        for (int ci = 0; ci < n_cells; ++ci) {
            for (int gi = 0; gi < n_gamma; ++gi) {
                const auto val = pick(results[gi + n_gamma * ci]);
                if (!val) continue;
                rows.push_back({config.gamma_list[gi], *val,
                                static_cast<double>(config.cells_list[ci])});
            }
        }
        if (rows.empty()) return;
        const std::string file = name + "_vs_gamma.csv";
        write_csv(out.csv_path(file), "gamma,fq_avg,L", rows);
        out.add_row({"sweep", name + "_vs_gamma", file, std::nullopt, ""});
    };
    emit_curve("qfi_state_avg", [](const PointResult& r) -> std::optional<double> {
        if (!r.ok_state) return std::nullopt;
        return r.avg_state_na;
    });
    emit_curve("qfi_operator_avg", [](const PointResult& r) -> std::optional<double> {
        if (!r.ok_operator) return std::nullopt;
        return r.avg_full;
    });
    emit_curve("qfi_diagonal_avg", [](const PointResult& r) -> std::optional<double> {
        if (!r.ok_operator) return std::nullopt;
        return r.avg_diag;
    });
    return out.finish();
}

// ------------------------------------------------------------------- run_sweep

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    SweepResult combined;
    combined.output_dir = config.output_dir;
    bool any = false;

    auto merge = [&](SweepResult part) {
        combined.rows.insert(combined.rows.end(), part.rows.begin(), part.rows.end());
        combined.exit_code = std::max(combined.exit_code, part.exit_code);
        combined.manifest[any ? "sweep_extra" : "sweep"] = part.manifest;
        any = true;
    };

    const bool dynamics = wants(config, "complexity") || wants(config, "entropy") ||
                          wants(config, "entropic_complexity") || wants(config, "kipr");
    if (dynamics) {
        ExperimentConfig sub = config;
        sub.output_dir = config.output_dir + "/dynamics";
        merge(run_dynamics(sub));
    }
    if ((wants(config, "kcop") || wants(config, "kipr_purified")) &&
        !config.subsystem_list.empty()) {
        ExperimentConfig sub = config;
        sub.output_dir = config.output_dir + "/kcop";
        merge(run_kcop(sub));
    }
    if (wants(config, "qfi_state") || wants(config, "qfi_operator")) {
        ExperimentConfig sub = config;
        sub.output_dir = config.output_dir + "/qfi";
        merge(run_qfi(sub));
    }
    if (!any) throw std::invalid_argument("sweep: no recognized observables configured");
    return combined;
}

// ------------------------------------------------------------------- reproduce

namespace {

struct Recipe {
    std::string id;
    std::string description;
    std::function<SweepResult(const std::string&, bool)> run;
};

ExperimentConfig base_config(const std::string& out) {
    ExperimentConfig c;
    c.model.w = 1.5;
    c.model.v = 0.5;
    c.model.boundary = Boundary::open;
    c.initial_state = InitialState::parse("localized:15");
    c.grid = TimeGrid{50.0, 0.1};
    c.output_dir = out;
    return c;
}

std::vector<Recipe> make_recipes() {
    std::vector<Recipe> recipes;
    auto add = [&recipes](const std::string& id, const std::string& desc, auto fn) {
        recipes.push_back({id, desc, fn});
    };

    add("fig1", "momentum-resolved spectra for gamma = 0.5, 1.4, 2.4",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.model.boundary = Boundary::periodic;
            c.gamma_list = {0.5, 1.4, 2.4};
            return run_spectrum(c);
        });
    add("fig2", "spread complexity across the PT transition, L=20",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {0.5, 0.8, 1.0, 1.2, 1.4};
            c.observables = {"complexity"};
            return run_dynamics(c);
        });
    add("fig2a", "spread entropy and entropic complexity across the PT transition",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {0.5, 0.8, 1.0, 1.2, 1.4};
            c.observables = {"entropy", "entropic_complexity"};
            return run_dynamics(c);
        });
    add("kiprpt", "KIPR below and above the PT transition",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {0.5, 1.0, 1.4};
            c.observables = {"kipr"};
            return run_dynamics(c);
        });
    add("fig3", "complexity measures deeper in the broken phase",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {1.2, 1.6, 2.0, 2.4};
            c.observables = {"complexity", "entropy", "entropic_complexity"};
            return run_dynamics(c);
        });
    add("fig4", "KIPR deeper in the broken phase",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {1.2, 1.6, 2.0, 2.4};
            c.observables = {"kipr"};
            return run_dynamics(c);
        });
    add("fig5", "saturation timescales against gamma",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.grid.t_max = 80.0;
            for (double g = 1.2; g <= 2.8 + 1e-9; g += 0.2) c.gamma_list.push_back(g);
            c.gamma_list.erase(c.gamma_list.begin()); // drop the default 0.5
            c.observables = {"complexity", "entropic_complexity"};
            return run_dynamics(c);
        });
    add("fig6", "late-time complexity against system size",
        [](const std::string& out, bool) {
            // per-size windows: the collapse slows with L, so each size runs
            // to t_max = 10 L before the late-window mean is taken
            SweepResult combined;
            combined.output_dir = out;
            for (int cells : {10, 20, 40, 80}) {
                ExperimentConfig c = base_config(out + "/L" + std::to_string(cells));
                c.cells_list = {cells};
                c.grid = TimeGrid{10.0 * cells, 0.25};
                c.gamma_list = {1.2, 1.6, 2.0, 2.4, 2.8};
                c.observables = {"complexity"};
                SweepResult part = run_dynamics(c);
                combined.rows.insert(combined.rows.end(), part.rows.begin(), part.rows.end());
                combined.exit_code = std::max(combined.exit_code, part.exit_code);
            }
            return combined;
        });
    add("fig7", "kcop subsystem scaling exponent against gamma",
        [](const std::string& out, bool extended) {
            ExperimentConfig c = base_config(out);
            c.cells_list = {extended ? 200 : 100};
            c.gamma_list = {0.4, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0, 2.4};
            c.subsystem_list = {4, 8, 10, 20, 40, 50, 100};
            c.observables = {"kcop"};
            return run_kcop(c);
        });
    add("fig8", "time-averaged kcop against gamma",
        [](const std::string& out, bool extended) {
            ExperimentConfig c = base_config(out);
            c.cells_list = {extended ? 200 : 100};
            c.gamma_list = {0.4, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0, 2.4};
            c.subsystem_list = {4, 10, 20, 50};
            c.observables = {"kcop"};
            return run_kcop(c);
        });
    add("fig9", "scaling of time-averaged kcop against gamma",
        [](const std::string& out, bool extended) {
            ExperimentConfig c = base_config(out);
            c.cells_list = {extended ? 200 : 100};
            c.gamma_list = {0.4, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0, 2.4};
            c.subsystem_list = {4, 8, 10, 20, 40, 50};
            c.observables = {"kcop"};
            return run_kcop(c);
        });
    add("kiprp", "KIPR of the purified state, L=100, ell=20",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.cells_list = {100};
            c.gamma_list = {0.4, 0.8, 1.2, 2.0};
            c.subsystem_list = {20};
            c.observables = {"kipr_purified"};
            return run_kcop(c);
        });
    add("alphavsgamma-kiprp", "scaling exponent of averaged purified KIPR",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.cells_list = {100};
            c.gamma_list = {0.4, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0, 2.4};
            c.subsystem_list = {4, 8, 10, 20, 40};
            c.observables = {"kipr_purified"};
            return run_kcop(c);
        });
    add("fig10", "time-averaged state-picture QFI against gamma",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.grid.t_max = 100.0;
            c.cells_list = {16, 20, 24};
            for (double g = 0.2; g <= 3.0 + 1e-9; g += 0.2) c.gamma_list.push_back(g);
            c.gamma_list.erase(c.gamma_list.begin());
            c.observables = {"qfi_state"};
            return run_qfi(c);
        });
    add("fig11", "diagonal QFI coefficients f_n, L=20",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {0.4, 1.0, 2.0};
            c.observables = {"qfi_operator"};
            return run_qfi(c);
        });
    add("fig12", "time-averaged operator-picture QFI and its diagonal part",
        [](const std::string& out, bool extended) {
            ExperimentConfig c = base_config(out);
            c.grid.t_max = 100.0;
            c.grid.dt = 0.5;
            c.cells_list = extended ? std::vector<int>{16, 20, 24} : std::vector<int>{16, 20};
            for (double g = 0.4; g <= 3.0 + 1e-9; g += 0.2) c.gamma_list.push_back(g);
            c.gamma_list.erase(c.gamma_list.begin());
            c.observables = {"qfi_operator"};
            return run_qfi(c);
        });
    add("fig13", "complexity measures with periodic boundary",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.model.boundary = Boundary::periodic;
            c.gamma_list = {0.5, 1.0, 1.2, 1.4};
            c.observables = {"complexity", "entropy", "entropic_complexity"};
            return run_dynamics(c);
        });
    add("fig14", "periodic boundary, initial state on site 39",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.model.boundary = Boundary::periodic;
            c.initial_state = InitialState::parse("localized:39");
            c.gamma_list = {0.5, 1.0, 1.2, 1.4};
            c.observables = {"complexity", "entropy", "entropic_complexity"};
            return run_dynamics(c);
        });
    add("appc", "initial-state dependence in the broken phase",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.gamma_list = {1.2};
            c.observables = {"complexity", "kipr"};
            SweepResult first = run_dynamics(c);
            ExperimentConfig c5 = c;
            c5.initial_state = InitialState::parse("localized:5");
            c5.output_dir = out + "/site5";
            SweepResult second = run_dynamics(c5);
            ExperimentConfig cp = c;
            cp.initial_state = InitialState::parse("pair:20,21");
            cp.output_dir = out + "/pair_center";
            SweepResult third = run_dynamics(cp);
            first.rows.insert(first.rows.end(), second.rows.begin(), second.rows.end());
            first.rows.insert(first.rows.end(), third.rows.begin(), third.rows.end());
            first.exit_code = std::max({first.exit_code, second.exit_code, third.exit_code});
            return first;
        });
    add("qfipb", "time-averaged QFI with periodic boundary",
        [](const std::string& out, bool) {
            ExperimentConfig c = base_config(out);
            c.model.boundary = Boundary::periodic;
            c.grid.t_max = 100.0;
            c.cells_list = {16, 20, 24};
            for (double g = 0.2; g <= 3.0 + 1e-9; g += 0.2) c.gamma_list.push_back(g);
            c.gamma_list.erase(c.gamma_list.begin());
            c.observables = {"qfi_state"};
            return run_qfi(c);
        });
    return recipes;
}

} // namespace

std::vector<std::string> reproduce_ids() {
    std::vector<std::string> ids;
    for (const auto& r : make_recipes()) ids.push_back(r.id);
    return ids;
}

SweepResult reproduce(const std::string& figure_id, const std::string& output_dir, bool extended) {
    for (const auto& r : make_recipes()) {
        if (r.id == figure_id) {
            const std::string out =
                output_dir.empty() ? ("reproduce_" + figure_id) : output_dir;
            return r.run(out, extended);
        }
    }
    std::string known;
    for (const auto& r : make_recipes()) known += " " + r.id;
    throw std::invalid_argument("unknown figure id '" + figure_id + "'; known:" + known);
}

} // namespace kssh
