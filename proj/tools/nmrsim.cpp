// Command-line front end: molecule ingestion, end-to-end spectrum runs,
// schedule/reconstruction/fit/resource subcommands, CSV emission.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nmrsim/circuits.hpp"
#include "nmrsim/errors.hpp"
#include "nmrsim/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nmrsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitDimension = 4;

struct CommonArgs {
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string config_path;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--threads", args.threads, "worker threads");
    cmd->add_option("--config", args.config_path, "JSON config (flags override)");
}

RunConfig assemble_config(const CommonArgs& common) {
    RunConfig cfg;
    if (!common.config_path.empty()) cfg = load_config(common.config_path);
    return cfg;
}

int run_simulate(const CommonArgs& common, RunConfig cfg) {
    cfg.validate();
    const SpinSystem sys = load_molecule(cfg.molecule_path);
    const SimulateResult result = run_simulation(cfg, sys);
    write_simulation_outputs(cfg, result);
    std::cout << "simulate: " << result.times_s.size() << " time points, "
              << result.initial_states.size() << " initial states -> " << cfg.out_dir << "\n";
    (void)common;
    return kExitOk;
}

int run_reconstruct(const std::string& fid_path, const std::string& sched_path,
                    const GridSpec& grid, const IstOptions& ist, const PeakFitOptions& fit,
                    const std::string& out_dir) {
    const NusSchedule sched = load_schedule(sched_path);
    const FidCsv fid = read_fid_csv(fid_path);
    GridSpec g = grid;
    g.n_samples = sched.grid_size;
    const std::vector<double> values = grid_values_from_fid(fid, sched, g);
    const ReconstructOutputs outs = run_reconstruction(values, sched, g.dt_s(), ist, fit);

    fs::create_directories(out_dir);
    write_spectrum_csv(out_dir + "/spectrum_zero_padded.csv", outs.zero_padded);
    write_spectrum_csv(out_dir + "/spectrum_reconstructed.csv", outs.reconstructed);
    write_peaks_csv(out_dir + "/peaks.csv", outs.peaks);
    std::cout << "reconstruct: " << outs.peaks.peaks.size() << " peak(s) -> " << out_dir << "\n";
    for (const auto& p : outs.peaks.peaks)
        std::cout << "  f0 = " << p.f0_hz << " Hz +- " << p.uncertainty_hz << " Hz\n";
    return kExitOk;
}

int run_fitpeaks(const std::string& spectrum_path, const PeakFitOptions& fit,
                 const std::string& out_dir) {
    std::ifstream in(spectrum_path);
    if (!in) throw ConfigError("cannot open spectrum file: " + spectrum_path);
    Spectrum s;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f, re, im;
        std::getline(row, f, ',');
        std::getline(row, re, ',');
        std::getline(row, im, ',');
        s.freq_hz.push_back(std::stod(f));
        s.amplitudes.emplace_back(std::stod(re), std::stod(im));
    }
    if (s.freq_hz.size() < 4) throw ConfigError("spectrum too short: " + spectrum_path);
    const PeakReport report = fit_lorentzian_peaks(s, fit);
    fs::create_directories(out_dir);
    write_peaks_csv(out_dir + "/peaks.csv", report);
    std::cout << "fitpeaks: " << report.peaks.size() << " peak(s) -> " << out_dir << "/peaks.csv\n";
    return kExitOk;
}

int run_resources(const std::string& molecule_path, const std::vector<double>& fidelities,
                  double depth_min, double depth_max, int depth_points, double total_time_s,
                  std::int64_t gates_override, const std::string& out_dir) {
    if (fidelities.empty()) throw ConfigError("resources: provide at least one gate fidelity");
    if (depth_points < 2 || !(depth_max > depth_min) || !(depth_min > 0.0))
        throw ConfigError("resources: bad depth grid");
    const SpinSystem sys = load_molecule(molecule_path);

    const BetaBound naive = beta_naive(sys);
    const bool clustered = sys.clusters().has_value();
    const BetaBound used = clustered ? beta_clustered(sys) : naive;

    std::int64_t gates_per_step = gates_override;
    if (gates_per_step <= 0)
        gates_per_step = make_trotter_plan(sys, 1.0, 1,
                                           clustered ? TrotterLayout::clustered : TrotterLayout::plain)
                             .gates_per_step;

    fs::create_directories(out_dir);
    std::cout << "resources: beta_naive = " << naive.total << " rad^2/s^2";
    if (clustered) std::cout << ", beta_clustered = " << used.total << " rad^2/s^2";
    std::cout << ", N_g = " << gates_per_step << "\n";

    for (double f : fidelities) {
        std::vector<double> grid;
        const double log_min = std::log(depth_min);
        const double log_max = std::log(depth_max);
        const double log_inv_f = -std::log(f);
        const double pole = log_inv_f > 0.0 ? sys.n_spins() / log_inv_f
                                            : std::numeric_limits<double>::infinity();
        for (int i = 0; i < depth_points; ++i) {
            const double d =
                std::exp(log_min + (log_max - log_min) * i / static_cast<double>(depth_points - 1));
            if (d < pole) grid.push_back(d);
        }
        if (grid.empty()) throw ConfigError("resources: depth grid entirely beyond divergence point");
        const DesignCurve curve =
            design_curve(used.total, sys.n_spins(), static_cast<double>(gates_per_step), f, grid);
        const OptimalResolution opt =
            optimal_resolution(used.total, sys.n_spins(), static_cast<double>(gates_per_step), f);
        char name[64];
        std::snprintf(name, sizeof name, "design_curve_F%.6g.csv", f);
        write_design_curve_csv(out_dir + "/" + name, curve, opt.depth_opt, opt.delta_f_opt_hz);
        std::cout << "  F = " << f << ": delta_f_opt = " << opt.delta_f_opt_hz
                  << " Hz at depth " << opt.depth_opt << "\n";

        const double gamma_opt = opt.delta_f_opt_hz * 2.0 * 3.14159265358979323846;
        if (gamma_opt > 0.0 && total_time_s > 0.0)
            std::cout << "    r_NMR(T=" << total_time_s
                      << " s) = " << trotter_steps_nmr(used.total, total_time_s, gamma_opt, sys.n_spins())
                      << "\n";
    }
    return kExitOk;
}

int run_diagnose(const std::string& noisy_dir, const std::string& ideal_dir,
                 const std::string& out_dir) {
    const PopulationsCsv noisy = read_populations_csv(noisy_dir + "/populations.csv");
    const PopulationsCsv ideal = read_populations_csv(ideal_dir + "/populations.csv");
    const NusSchedule sched = load_schedule(noisy_dir + "/schedule.sched");
    const RunConfig noisy_cfg = load_config(noisy_dir + "/manifest.json");

    if (noisy.times_s.size() != ideal.times_s.size())
        throw ConfigError("diagnose: runs have different time grids");
    for (std::size_t i = 0; i < noisy.times_s.size(); ++i)
        if (std::abs(noisy.times_s[i] - ideal.times_s[i]) > 1e-12)
            throw ConfigError("diagnose: time grids do not match");

    const FidelitySeries series = bc_series(noisy.times_s, noisy.populations, ideal.populations);
    const Spectrum spectrum = bc_series_spectrum(series, sched, noisy_cfg.grid.dt_s());
    const PeakReport peaks = fit_lorentzian_peaks(spectrum, 4);

    fs::create_directories(out_dir);
    write_fidelity_series_csv(out_dir + "/bc_series.csv", series);
    write_spectrum_csv(out_dir + "/bc_spectrum.csv", spectrum);
    write_peaks_csv(out_dir + "/bc_peaks.csv", peaks);

    double bc_min = 1.0;
    for (double v : series.bc_mean) bc_min = std::min(bc_min, v);
    std::cout << "diagnose: min mean BC = " << bc_min << ", " << peaks.peaks.size()
              << " BC-spectrum peak(s) -> " << out_dir << "\n";
    return kExitOk;
}

int run_schedule(int n_s, int budget, double alpha, std::uint64_t seed, const std::string& out_dir) {
    const NusSchedule sched = poisson_gap_schedule(n_s, budget, alpha, seed);
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/schedule.sched", std::ios::binary);
    if (!out) throw ConfigError("cannot write schedule file");
    write_schedule(out, sched);
    std::cout << "schedule: " << sched.budget() << "/" << n_s << " points -> " << out_dir
              << "/schedule.sched\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nmrsim: classical emulation of digitally simulated zero-field NMR spectra"};
    app.require_subcommand(1);

    // simulate
    CommonArgs sim_common;
    std::string sim_molecule, sim_backend = "exact", sim_compile = "plain", sim_fid_mode;
    int sim_nsamples = 0, sim_budget = 0, sim_steps = -1, sim_shots = -1;
    double sim_total_time = 0.0, sim_alpha = -1.0;
    double sim_amp = -1.0, sim_phase = -1.0, sim_dep1 = -1.0, sim_dep2 = -1.0;
    double sim_auto_eps = 0.0, sim_fold = -1.0;
    std::uint64_t sim_sched_seed = 0;
    bool sim_padding = false;
    auto* sim = app.add_subcommand("simulate", "generate a schedule and compute the FID over it");
    add_common(sim, sim_common);
    sim->add_option("--molecule", sim_molecule, "molecule description file");
    sim->add_option("--n-samples", sim_nsamples, "uniform grid size N_s");
    sim->add_option("--total-time", sim_total_time, "grid span in seconds");
    sim->add_option("--budget", sim_budget, "NUS sample budget");
    sim->add_option("--alpha", sim_alpha, "Poisson-gap shape parameter");
    sim->add_option("--schedule-seed", sim_sched_seed, "schedule RNG seed");
    sim->add_option("--backend", sim_backend, "exact | trotter_noiseless | trotter_noisy");
    sim->add_option("--compile", sim_compile, "plain | clustered | adaptive");
    sim->add_option("--steps", sim_steps, "Trotter steps (0 = auto)");
    sim->add_option("--auto-epsilon", sim_auto_eps, "auto-mode operator-error budget");
    sim->add_option("--fold", sim_fold, "fold evolution times modulo this period (s)");
    sim->add_option("--amp-damping", sim_amp, "two-qubit amplitude damping rate");
    sim->add_option("--phase-damping", sim_phase, "two-qubit phase damping rate");
    sim->add_option("--depolarizing-1q", sim_dep1, "single-qubit depolarizing rate");
    sim->add_option("--depolarizing-2q", sim_dep2, "two-qubit depolarizing rate");
    sim->add_flag("--padding", sim_padding, "pad all circuits to the deepest in the set");
    sim->add_option("--shots", sim_shots, "shot samples per (time, state); 0 = exact populations");
    sim->add_option("--fid-mode", sim_fid_mode, "positive_only | full_trace");

    // reconstruct
    CommonArgs rec_common;
    std::string rec_fid, rec_sched;
    double rec_total_time = 6.0;
    IstOptions rec_ist;
    PeakFitOptions rec_fit;
    auto* rec = app.add_subcommand("reconstruct", "zero-padded and IST-S spectra plus peak report");
    add_common(rec, rec_common);
    rec->add_option("--fid", rec_fid, "fid.csv from a simulate run")->required();
    rec->add_option("--schedule", rec_sched, "schedule file")->required();
    rec->add_option("--total-time", rec_total_time, "grid span in seconds");
    rec->add_option("--iters", rec_ist.iters, "IST-S iterations");
    rec->add_option("--threshold-decay", rec_ist.threshold_decay, "IST-S threshold decay per iteration");
    rec->add_option("--max-peaks", rec_fit.max_peaks, "maximum reported peaks");

    // fitpeaks
    CommonArgs fit_common;
    std::string fit_spectrum;
    PeakFitOptions fit_opts;
    auto* fitp = app.add_subcommand("fitpeaks", "Lorentzian l1 fits on an existing spectrum CSV");
    add_common(fitp, fit_common);
    fitp->add_option("--spectrum", fit_spectrum, "spectrum CSV")->required();
    fitp->add_option("--max-peaks", fit_opts.max_peaks, "maximum reported peaks");

    // resources
    CommonArgs res_common;
    std::string res_molecule;
    std::vector<double> res_fidelities;
    double res_dmin = 10.0, res_dmax = 1e6, res_total_time = 6.0;
    int res_dpoints = 60;
    std::int64_t res_gates = 0;
    auto* res = app.add_subcommand("resources", "design curves and optimal-resolution estimates");
    add_common(res, res_common);
    res->add_option("--molecule", res_molecule, "molecule description file")->required();
    res->add_option("--fidelity", res_fidelities, "two-qubit gate fidelities (repeatable)")->required();
    res->add_option("--depth-min", res_dmin, "smallest depth on the log grid");
    res->add_option("--depth-max", res_dmax, "largest depth on the log grid");
    res->add_option("--depth-points", res_dpoints, "points on the log depth grid");
    res->add_option("--total-time", res_total_time, "evolution span used for the r_NMR report");
    res->add_option("--gates-per-step", res_gates, "override N_g instead of compiling one step");

    // diagnose
    CommonArgs diag_common;
    std::string diag_noisy, diag_ideal;
    auto* diag = app.add_subcommand("diagnose", "BC series and BC spectrum between two runs");
    add_common(diag, diag_common);
    diag->add_option("--noisy", diag_noisy, "run directory of the noisy simulation")->required();
    diag->add_option("--ideal", diag_ideal, "run directory of the noiseless reference")->required();

    // schedule
    CommonArgs sched_common;
    int sch_ns = 4096, sch_budget = 102;
    double sch_alpha = 0.5;
    auto* sch = app.add_subcommand("schedule", "emit a sine-weighted Poisson gap schedule");
    add_common(sch, sched_common);
    sch->add_option("--n-samples", sch_ns, "uniform grid size N_s");
    sch->add_option("--budget", sch_budget, "sample budget");
    sch->add_option("--alpha", sch_alpha, "shape parameter");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            RunConfig cfg = assemble_config(sim_common);
            if (!sim_molecule.empty()) cfg.molecule_path = sim_molecule;
            if (sim_nsamples > 0) cfg.grid.n_samples = sim_nsamples;
            if (sim_total_time > 0.0) cfg.grid.total_time_s = sim_total_time;
            if (sim_budget > 0) cfg.budget = sim_budget;
            if (sim->count("--budget") && sim_budget <= 0)
                throw ConfigError("config: schedule budget must be positive");
            if (sim_alpha >= 0.0) cfg.alpha = sim_alpha;
            if (sim->count("--schedule-seed")) cfg.schedule_seed = sim_sched_seed;
            if (sim->count("--backend")) cfg.backend = backend_from_name(sim_backend);
            if (sim->count("--compile")) cfg.compile_mode = compile_mode_from_name(sim_compile);
            if (sim_steps >= 0) cfg.trotter.steps = sim_steps;
            if (sim_auto_eps > 0.0) cfg.trotter.auto_epsilon = sim_auto_eps;
            if (sim_fold >= 0.0) cfg.trotter.period_fold_s = sim_fold;
            if (sim_amp >= 0.0) cfg.noise.amp_damping_2q = sim_amp;
            if (sim_phase >= 0.0) cfg.noise.phase_damping_2q = sim_phase;
            if (sim_dep1 >= 0.0) cfg.noise.depolarizing_1q = sim_dep1;
            if (sim_dep2 >= 0.0) cfg.noise.depolarizing_2q = sim_dep2;
            if (sim->count("--padding")) cfg.padding = sim_padding;
            if (sim_shots >= 0) cfg.shots = sim_shots;
            if (!sim_fid_mode.empty())
                cfg.fid_mode = sim_fid_mode == "full_trace" ? FidMode::full_trace
                             : sim_fid_mode == "positive_only"
                                 ? FidMode::positive_only
                                 : throw ConfigError("unknown fid mode: " + sim_fid_mode);
            if (sim->count("--seed")) cfg.master_seed = sim_common.seed;
            if (sim->count("--threads")) cfg.threads = sim_common.threads;
            if (sim->count("--out")) cfg.out_dir = sim_common.out_dir;
            return run_simulate(sim_common, cfg);
        }
        if (rec->parsed()) {
            GridSpec grid;
            grid.total_time_s = rec_total_time;
            return run_reconstruct(rec_fid, rec_sched, grid, rec_ist, rec_fit, rec_common.out_dir);
        }
        if (fitp->parsed()) return run_fitpeaks(fit_spectrum, fit_opts, fit_common.out_dir);
        if (res->parsed())
            return run_resources(res_molecule, res_fidelities, res_dmin, res_dmax, res_dpoints,
                                 res_total_time, res_gates, res_common.out_dir);
        if (diag->parsed()) return run_diagnose(diag_noisy, diag_ideal, diag_common.out_dir);
        if (sch->parsed())
            return run_schedule(sch_ns, sch_budget, sch_alpha, sched_common.seed,
                                sched_common.out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return kExitDimension;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
