#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nmrsim/cs.hpp"
#include "nmrsim/metrics.hpp"
#include "nmrsim/resources.hpp"
#include "nmrsim/simulator.hpp"
#include "nmrsim/spin_system.hpp"

namespace nmrsim {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct GridSpec {
    int n_samples = 4096;
    double total_time_s = 6.0;

    double dt_s() const { return total_time_s / n_samples; }
    double df_hz() const { return 1.0 / total_time_s; }
    void validate() const;
};

enum class Backend { exact, trotter_noiseless, trotter_noisy };

enum class CompileMode { plain, clustered, adaptive };

struct TrotterConfig {
    int steps = 0;                    // 0 selects auto mode
    double auto_epsilon = 1e-4;       // operator-norm error budget per point
    double period_fold_s = 0.0;       // fold evolution times modulo this period (0 = off)
    std::int64_t max_steps = 2000000; // hard cap for auto mode
};

struct RunConfig {
    std::string molecule_path;
    GridSpec grid;
    int budget = 102;
    double alpha = 0.5;
    std::uint64_t schedule_seed = 1;
    Backend backend = Backend::exact;
    CompileMode compile_mode = CompileMode::plain;
    TrotterConfig trotter;
    NoiseModel noise;
    AdaptiveDepthOptions adaptive;
    bool padding = false;
    int shots = 0;
    FidMode fid_mode = FidMode::positive_only;
    std::uint64_t master_seed = 1;
    int threads = 1;
    std::string out_dir = "out";

    void validate() const;
};

std::string backend_name(Backend b);
Backend backend_from_name(const std::string& name);
std::string compile_mode_name(CompileMode m);
CompileMode compile_mode_from_name(const std::string& name);

/// JSON round trip used by --config files and run manifests.
std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);

struct SimulateResult {
    NusSchedule schedule;
    std::vector<double> times_s; // scheduled times, ascending
    std::vector<double> fid;
    std::vector<std::size_t> initial_states;
    // populations[time][state]: exact probabilities from the backend
    std::vector<std::vector<Eigen::VectorXd>> populations;
    // counts[time][state]: present when shots > 0
    std::vector<std::vector<std::vector<std::int64_t>>> counts;
    std::vector<std::int64_t> depths; // charged two-qubit depth per circuit (0 for exact)
};

/// Executes the configured backend over every scheduled time point; the
/// (time x initial state) tasks fan out over `threads` workers with results
/// assembled by task index, so outputs do not depend on the thread count.
SimulateResult run_simulation(const RunConfig& cfg, const SpinSystem& sys);

/// Writes fid.csv, populations.csv, schedule.sched and manifest.json.
void write_simulation_outputs(const RunConfig& cfg, const SimulateResult& result);

struct FidCsv {
    std::vector<double> times_s;
    std::vector<double> values;
    int shots = 0;
    std::string backend;
};

FidCsv read_fid_csv(const std::string& path);

/// Expands sampled FID rows onto the full grid (zeros elsewhere); every
/// schedule index must be covered by a row.
std::vector<double> grid_values_from_fid(const FidCsv& fid, const NusSchedule& sched,
                                         const GridSpec& grid);

struct PopulationsCsv {
    std::vector<double> times_s;                          // per time point
    std::vector<std::size_t> initial_states;              // state set (shared)
    std::vector<std::vector<Eigen::VectorXd>> populations; // effective probabilities
};

PopulationsCsv read_populations_csv(const std::string& path);

struct ReconstructOutputs {
    Spectrum zero_padded;
    Spectrum reconstructed;
    PeakReport peaks;
};

ReconstructOutputs run_reconstruction(const std::vector<double>& grid_values,
                                      const NusSchedule& sched, double dt_s,
                                      const IstOptions& ist_opts = {},
                                      const PeakFitOptions& fit_opts = {});

// CSV emission helpers (deterministic %.17g formatting everywhere).
void write_spectrum_csv(const std::string& path, const Spectrum& s);
void write_peaks_csv(const std::string& path, const PeakReport& report);
void write_fidelity_series_csv(const std::string& path, const FidelitySeries& series);
void write_design_curve_csv(const std::string& path, const DesignCurve& curve, double depth_opt,
                            double delta_f_opt);

/// Runs fn(0..n_tasks-1) on `threads` workers; rethrows the first exception.
void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn);

std::string format_double(double v);

} // namespace nmrsim
