#include "nmrsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nmrsim/circuits.hpp"
#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t task_seed(std::uint64_t master, std::uint64_t time_idx, std::uint64_t state_idx) {
    return splitmix64(master ^ splitmix64(0x517CC1B727220A95ull + time_idx) ^
                      splitmix64(0x2545F4914F6CDD1Dull + state_idx));
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // '\n' endings regardless of platform
    if (!out) throw ConfigError("cannot open output file: " + path);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void GridSpec::validate() const {
    if (n_samples < 2) throw ConfigError("grid: need at least two samples");
    if (!(total_time_s > 0.0) || !std::isfinite(total_time_s))
        throw ConfigError("grid: total time must be positive and finite");
}

void RunConfig::validate() const {
    grid.validate();
    if (molecule_path.empty()) throw ConfigError("config: molecule path missing");
    if (budget < 1) throw ConfigError("config: schedule budget must be positive");
    if (budget > grid.n_samples) throw ConfigError("config: budget exceeds grid size");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("config: bad alpha");
    if (shots < 0) throw ConfigError("config: shots must be nonnegative");
    if (threads < 1) throw ConfigError("config: threads must be >= 1");
    if (trotter.steps < 0) throw ConfigError("config: trotter steps must be nonnegative");
    if (trotter.steps == 0 && !(trotter.auto_epsilon > 0.0 && trotter.auto_epsilon < 1.0))
        throw ConfigError("config: auto-mode epsilon must lie in (0,1)");
    if (trotter.period_fold_s < 0.0) throw ConfigError("config: negative fold period");
    if (trotter.max_steps < 1) throw ConfigError("config: max_steps must be positive");
    noise.validate();
    if (backend == Backend::exact && padding)
        throw ConfigError("config: padding requires a circuit backend");
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::exact: return "exact";
        case Backend::trotter_noiseless: return "trotter_noiseless";
        case Backend::trotter_noisy: return "trotter_noisy";
    }
    return "?";
}

Backend backend_from_name(const std::string& name) {
    if (name == "exact") return Backend::exact;
    if (name == "trotter_noiseless") return Backend::trotter_noiseless;
    if (name == "trotter_noisy") return Backend::trotter_noisy;
    throw ConfigError("unknown backend: " + name);
}

std::string compile_mode_name(CompileMode m) {
    switch (m) {
        case CompileMode::plain: return "plain";
        case CompileMode::clustered: return "clustered";
        case CompileMode::adaptive: return "adaptive";
    }
    return "?";
}

CompileMode compile_mode_from_name(const std::string& name) {
    if (name == "plain") return CompileMode::plain;
    if (name == "clustered") return CompileMode::clustered;
    if (name == "adaptive") return CompileMode::adaptive;
    throw ConfigError("unknown compile mode: " + name);
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["molecule"] = cfg.molecule_path;
    j["grid"] = {{"n_samples", cfg.grid.n_samples}, {"total_time_s", cfg.grid.total_time_s}};
    j["schedule"] = {{"budget", cfg.budget}, {"alpha", cfg.alpha}, {"seed", cfg.schedule_seed}};
    j["backend"] = backend_name(cfg.backend);
    j["compile"] = {{"mode", compile_mode_name(cfg.compile_mode)},
                    {"steps", cfg.trotter.steps},
                    {"auto_epsilon", cfg.trotter.auto_epsilon},
                    {"period_fold_s", cfg.trotter.period_fold_s},
                    {"max_steps", cfg.trotter.max_steps}};
    j["noise"] = {{"amp_damping_2q", cfg.noise.amp_damping_2q},
                  {"phase_damping_2q", cfg.noise.phase_damping_2q},
                  {"depolarizing_1q", cfg.noise.depolarizing_1q},
                  {"depolarizing_2q", cfg.noise.depolarizing_2q}};
    j["adaptive"] = {{"cost_base", cfg.adaptive.cost_base},
                     {"cost_cap", cfg.adaptive.cost_cap},
                     {"synth_epsilon", cfg.adaptive.synth_epsilon}};
    j["padding"] = cfg.padding;
    j["shots"] = cfg.shots;
    j["fid_mode"] = cfg.fid_mode == FidMode::positive_only ? "positive_only" : "full_trace";
    j["master_seed"] = cfg.master_seed;
    j["threads"] = cfg.threads;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2);
}

RunConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("config")) j = j["config"]; // accept a full manifest too
        cfg.molecule_path = j.value("molecule", cfg.molecule_path);
        if (j.contains("grid")) {
            cfg.grid.n_samples = j["grid"].value("n_samples", cfg.grid.n_samples);
            cfg.grid.total_time_s = j["grid"].value("total_time_s", cfg.grid.total_time_s);
        }
        if (j.contains("schedule")) {
            cfg.budget = j["schedule"].value("budget", cfg.budget);
            cfg.alpha = j["schedule"].value("alpha", cfg.alpha);
            cfg.schedule_seed = j["schedule"].value("seed", cfg.schedule_seed);
        }
        if (j.contains("backend")) cfg.backend = backend_from_name(j["backend"].get<std::string>());
        if (j.contains("compile")) {
            const auto& c = j["compile"];
            if (c.contains("mode")) cfg.compile_mode = compile_mode_from_name(c["mode"].get<std::string>());
            cfg.trotter.steps = c.value("steps", cfg.trotter.steps);
            cfg.trotter.auto_epsilon = c.value("auto_epsilon", cfg.trotter.auto_epsilon);
            cfg.trotter.period_fold_s = c.value("period_fold_s", cfg.trotter.period_fold_s);
            cfg.trotter.max_steps = c.value("max_steps", cfg.trotter.max_steps);
        }
        if (j.contains("noise")) {
            const auto& noise = j["noise"];
            cfg.noise.amp_damping_2q = noise.value("amp_damping_2q", 0.0);
            cfg.noise.phase_damping_2q = noise.value("phase_damping_2q", 0.0);
            cfg.noise.depolarizing_1q = noise.value("depolarizing_1q", 0.0);
            cfg.noise.depolarizing_2q = noise.value("depolarizing_2q", 0.0);
        }
        if (j.contains("adaptive")) {
            const auto& a = j["adaptive"];
            cfg.adaptive.cost_base = a.value("cost_base", cfg.adaptive.cost_base);
            cfg.adaptive.cost_cap = a.value("cost_cap", cfg.adaptive.cost_cap);
            cfg.adaptive.synth_epsilon = a.value("synth_epsilon", cfg.adaptive.synth_epsilon);
        }
        cfg.padding = j.value("padding", cfg.padding);
        cfg.shots = j.value("shots", cfg.shots);
        if (j.contains("fid_mode"))
            cfg.fid_mode = j["fid_mode"].get<std::string>() == "full_trace" ? FidMode::full_trace
                                                                            : FidMode::positive_only;
        cfg.master_seed = j.value("master_seed", cfg.master_seed);
        cfg.threads = j.value("threads", cfg.threads);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn) {
    if (n_tasks <= 0) return;
    if (threads <= 1 || n_tasks == 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int workers = std::min(threads, n_tasks);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const int i = next.fetch_add(1);
                if (i >= n_tasks) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct BackendContext {
    const RunConfig& cfg;
    const SpinSystem& sys;
    const std::vector<double>& times;
    const std::vector<std::size_t>& initial_states;
    const HamiltonianMatrix* hamiltonian = nullptr; // exact evolution paths
    double beta_total = 0.0;                        // auto step selection
    std::vector<std::int64_t> planned_costs;        // adaptive mode
    std::int64_t pad_target = -1;
};

double folded_time(const TrotterConfig& tc, double t) {
    if (tc.period_fold_s <= 0.0) return t;
    return std::fmod(t, tc.period_fold_s);
}

std::int64_t auto_steps(const TrotterConfig& tc, double beta_total, double t_eff) {
    if (tc.steps > 0) return tc.steps;
    const double r = beta_total * t_eff * t_eff / (2.0 * tc.auto_epsilon);
    const auto steps = static_cast<std::int64_t>(std::ceil(r));
    return std::min(tc.max_steps, std::max<std::int64_t>(1, steps));
}

Circuit build_noisy_circuit(const BackendContext& ctx, int ti) {
    const double t_eff = folded_time(ctx.cfg.trotter, ctx.times[static_cast<std::size_t>(ti)]);
    Circuit circ = [&] {
        switch (ctx.cfg.compile_mode) {
            case CompileMode::adaptive:
                return make_exact_block_circuit(ctx.sys, *ctx.hamiltonian, t_eff,
                                                ctx.planned_costs[static_cast<std::size_t>(ti)]);
            case CompileMode::clustered: {
                const auto r = auto_steps(ctx.cfg.trotter, ctx.beta_total, t_eff);
                if (ctx.planned_costs[static_cast<std::size_t>(ti)] > 1000000)
                    throw ConfigError("noisy Trotter circuit would hold over 10^6 gates; "
                                      "set explicit steps, relax auto_epsilon or fold the times");
                return compile_trotter_clustered(ctx.sys, t_eff, static_cast<int>(r));
            }
            case CompileMode::plain:
            default: {
                const auto r = auto_steps(ctx.cfg.trotter, ctx.beta_total, t_eff);
                if (ctx.planned_costs[static_cast<std::size_t>(ti)] > 1000000)
                    throw ConfigError("noisy Trotter circuit would hold over 10^6 gates; "
                                      "set explicit steps, relax auto_epsilon or fold the times");
                return compile_trotter_plain(ctx.sys, t_eff, static_cast<int>(r));
            }
        }
    }();
    if (ctx.pad_target >= 0 && circ.two_qubit_depth() < ctx.pad_target)
        circ = pad_circuit(circ, ctx.pad_target);
    return circ;
}

} // namespace

SimulateResult run_simulation(const RunConfig& cfg, const SpinSystem& sys) {
    cfg.validate();
    sys.validate();
    if (cfg.fid_mode == FidMode::full_trace && cfg.backend != Backend::exact)
        throw ConfigError("full_trace FID mode requires the exact backend");

    SimulateResult result;
    result.schedule = poisson_gap_schedule(cfg.grid.n_samples, cfg.budget, cfg.alpha, cfg.schedule_seed);
    const double dt = cfg.grid.dt_s();
    for (int idx : result.schedule.indices) result.times_s.push_back(idx * dt);
    result.initial_states = positive_magnetization_states(sys);
    if (result.initial_states.empty()) throw ConfigError("no positive-magnetization initial states");

    const int n_times = static_cast<int>(result.times_s.size());
    const auto n_states = result.initial_states.size();
    result.populations.assign(static_cast<std::size_t>(n_times), {});
    result.counts.assign(static_cast<std::size_t>(n_times), {});
    result.fid.assign(static_cast<std::size_t>(n_times), 0.0);
    result.depths.assign(static_cast<std::size_t>(n_times), 0);

    const bool needs_hamiltonian = cfg.backend == Backend::exact ||
                                   cfg.compile_mode == CompileMode::adaptive;
    std::optional<HamiltonianMatrix> hamiltonian;
    if (needs_hamiltonian) {
        hamiltonian.emplace(build_hamiltonian(sys));
        hamiltonian->eigenvalues(); // decompose once before the fan-out
    }

    BackendContext ctx{cfg, sys, result.times_s, result.initial_states, nullptr, 0.0, {}, -1};
    if (hamiltonian) ctx.hamiltonian = &*hamiltonian;
    if (cfg.backend != Backend::exact && cfg.compile_mode != CompileMode::adaptive)
        ctx.beta_total = beta_naive(sys).total;

    // Planning pass: per-circuit costs, then the common padding target.
    if (cfg.backend == Backend::trotter_noisy) {
        ctx.planned_costs.assign(static_cast<std::size_t>(n_times), 0);
        if (cfg.compile_mode == CompileMode::adaptive) {
            parallel_for(n_times, cfg.threads, [&](int ti) {
                const double t_eff = folded_time(cfg.trotter, result.times_s[static_cast<std::size_t>(ti)]);
                ctx.planned_costs[static_cast<std::size_t>(ti)] =
                    adaptive_block_cost(sys, *hamiltonian, t_eff, cfg.adaptive);
            });
        } else {
            const std::int64_t step_gates =
                make_trotter_plan(sys, dt > 0 ? dt : 1.0, 1,
                                  cfg.compile_mode == CompileMode::clustered ? TrotterLayout::clustered
                                                                             : TrotterLayout::plain)
                    .gates_per_step;
            for (int ti = 0; ti < n_times; ++ti) {
                const double t_eff = folded_time(cfg.trotter, result.times_s[static_cast<std::size_t>(ti)]);
                ctx.planned_costs[static_cast<std::size_t>(ti)] =
                    auto_steps(cfg.trotter, ctx.beta_total, t_eff) * step_gates;
            }
        }
        if (cfg.padding) {
            std::int64_t target = 0;
            for (auto c : ctx.planned_costs) target = std::max(target, c);
            ctx.pad_target = target;
        }
    }

    const auto record_outputs = [&](int ti, std::vector<PopulationRecord>& records) {
        auto& pops = result.populations[static_cast<std::size_t>(ti)];
        auto& counts = result.counts[static_cast<std::size_t>(ti)];
        pops.resize(n_states);
        if (cfg.shots > 0) counts.resize(n_states);
        for (std::size_t si = 0; si < n_states; ++si) {
            if (cfg.shots > 0) {
                records[si] = sample_counts(records[si], cfg.shots,
                                            task_seed(cfg.master_seed, static_cast<std::uint64_t>(ti), si));
                counts[si] = records[si].counts;
            }
            pops[si] = records[si].probabilities;
        }
        result.fid[static_cast<std::size_t>(ti)] =
            measure_fid_point(sys, result.initial_states, records);
    };

    switch (cfg.backend) {
        case Backend::exact: {
            parallel_for(n_times, cfg.threads, [&](int ti) {
                const double t = result.times_s[static_cast<std::size_t>(ti)];
                std::vector<PopulationRecord> records(n_states);
                for (std::size_t si = 0; si < n_states; ++si) {
                    const Eigen::VectorXcd psi = evolve_exact(
                        *hamiltonian, basis_state_vector(sys.n_spins(), result.initial_states[si]), t);
                    records[si] = populations_from_state(psi);
                }
                record_outputs(ti, records);
            });
            if (cfg.fid_mode == FidMode::full_trace)
                result.fid = fid_exact(sys, result.times_s, FidMode::full_trace).values;
            break;
        }
        case Backend::trotter_noiseless: {
            parallel_for(n_times, cfg.threads, [&](int ti) {
                const double t_eff = folded_time(cfg.trotter, result.times_s[static_cast<std::size_t>(ti)]);
                std::vector<PopulationRecord> records(n_states);
                if (cfg.compile_mode == CompileMode::adaptive) {
                    const Circuit circ = compile_depth_adaptive(sys, *hamiltonian, t_eff, cfg.adaptive);
                    result.depths[static_cast<std::size_t>(ti)] = circ.two_qubit_depth();
                    for (std::size_t si = 0; si < n_states; ++si)
                        records[si] =
                            populations_from_state(run_statevector(circ, result.initial_states[si]));
                } else {
                    const std::int64_t r = auto_steps(cfg.trotter, ctx.beta_total, t_eff);
                    const Circuit step =
                        cfg.compile_mode == CompileMode::clustered
                            ? compile_trotter_clustered(sys, t_eff / static_cast<double>(r), 1)
                            : compile_trotter_plain(sys, t_eff / static_cast<double>(r), 1);
                    const Eigen::MatrixXcd u = matrix_power(circuit_unitary(step), r);
                    result.depths[static_cast<std::size_t>(ti)] = r * step.two_qubit_depth();
                    for (std::size_t si = 0; si < n_states; ++si) {
                        PopulationRecord rec;
                        rec.probabilities =
                            u.col(static_cast<Eigen::Index>(result.initial_states[si])).cwiseAbs2();
                        records[si] = rec;
                    }
                }
                record_outputs(ti, records);
            });
            break;
        }
        case Backend::trotter_noisy: {
            parallel_for(n_times, cfg.threads, [&](int ti) {
                const Circuit circ = build_noisy_circuit(ctx, ti);
                result.depths[static_cast<std::size_t>(ti)] = circ.two_qubit_depth();
                std::vector<PopulationRecord> records(n_states);
                for (std::size_t si = 0; si < n_states; ++si)
                    records[si] = populations_from_density(
                        run_density(circ, result.initial_states[si], cfg.noise));
                record_outputs(ti, records);
            });
            break;
        }
    }
    return result;
}

void write_simulation_outputs(const RunConfig& cfg, const SimulateResult& result) {
    fs::create_directories(cfg.out_dir);
    const std::string base = cfg.out_dir + "/";

    {
        auto out = open_output(base + "fid.csv");
        out << "time_s,fid_value,n_shots,backend\n";
        for (std::size_t i = 0; i < result.times_s.size(); ++i)
            out << format_double(result.times_s[i]) << ',' << format_double(result.fid[i]) << ','
                << cfg.shots << ',' << backend_name(cfg.backend) << "\n";
    }
    {
        auto out = open_output(base + "populations.csv");
        out << "time_s,initial_state,basis_state,probability,count\n";
        for (std::size_t ti = 0; ti < result.times_s.size(); ++ti)
            for (std::size_t si = 0; si < result.initial_states.size(); ++si) {
                const auto& p = result.populations[ti][si];
                for (Eigen::Index b = 0; b < p.size(); ++b) {
                    const std::int64_t count =
                        cfg.shots > 0 ? result.counts[ti][si][static_cast<std::size_t>(b)] : 0;
                    out << format_double(result.times_s[ti]) << ',' << result.initial_states[si]
                        << ',' << b << ',' << format_double(p(b)) << ',' << count << "\n";
                }
            }
    }
    {
        auto out = open_output(base + "schedule.sched");
        write_schedule(out, result.schedule);
    }
    {
        auto out = open_output(base + "depths.csv");
        out << "time_s,two_qubit_depth\n";
        for (std::size_t i = 0; i < result.times_s.size(); ++i)
            out << format_double(result.times_s[i]) << ',' << result.depths[i] << "\n";
    }
    {
        json manifest;
        manifest["artifact"] = "nmrsim";
        manifest["version"] = kArtifactVersion;
        manifest["command"] = "simulate";
        manifest["config"] = json::parse(config_to_json(cfg));
        manifest["outputs"] = {"fid.csv", "populations.csv", "schedule.sched", "depths.csv"};
        auto out = open_output(base + "manifest.json");
        out << manifest.dump(2) << "\n";
    }
}

FidCsv read_fid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open FID file: " + path);
    FidCsv fid;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty FID file: " + path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 4) throw ConfigError("malformed FID row: " + line);
        fid.times_s.push_back(std::stod(fields[0]));
        fid.values.push_back(std::stod(fields[1]));
        fid.shots = std::stoi(fields[2]);
        fid.backend = fields[3];
    }
    if (fid.times_s.empty()) throw ConfigError("FID file has no samples: " + path);
    return fid;
}

std::vector<double> grid_values_from_fid(const FidCsv& fid, const NusSchedule& sched,
                                         const GridSpec& grid) {
    sched.validate();
    grid.validate();
    if (sched.grid_size != grid.n_samples)
        throw ConfigError("schedule grid size does not match the run grid");
    const double dt = grid.dt_s();
    std::vector<double> values(static_cast<std::size_t>(grid.n_samples), 0.0);
    std::vector<char> seen(static_cast<std::size_t>(grid.n_samples), 0);
    for (std::size_t i = 0; i < fid.times_s.size(); ++i) {
        const double idx_f = fid.times_s[i] / dt;
        const auto idx = static_cast<long long>(std::llround(idx_f));
        if (idx < 0 || idx >= grid.n_samples || std::abs(idx_f - static_cast<double>(idx)) > 1e-6)
            throw ConfigError("FID time " + format_double(fid.times_s[i]) + " is off the grid");
        values[static_cast<std::size_t>(idx)] = fid.values[i];
        seen[static_cast<std::size_t>(idx)] = 1;
    }
    for (int idx : sched.indices)
        if (!seen[static_cast<std::size_t>(idx)])
            throw ConfigError("missing FID sample at schedule index " + std::to_string(idx));
    return values;
}

PopulationsCsv read_populations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open populations file: " + path);
    PopulationsCsv out;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty populations file: " + path);

    struct Key {
        double time;
        std::size_t state;
    };
    std::vector<Key> order;
    std::vector<std::vector<double>> probs;
    std::vector<std::vector<double>> counts;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 5) throw ConfigError("malformed populations row: " + line);
        const double t = std::stod(fields[0]);
        const auto state = static_cast<std::size_t>(std::stoull(fields[1]));
        const auto basis = static_cast<std::size_t>(std::stoull(fields[2]));
        if (order.empty() || order.back().time != t || order.back().state != state) {
            order.push_back({t, state});
            probs.emplace_back();
            counts.emplace_back();
        }
        if (basis != probs.back().size()) throw ConfigError("populations rows out of order: " + line);
        probs.back().push_back(std::stod(fields[3]));
        counts.back().push_back(std::stod(fields[4]));
    }
    if (order.empty()) throw ConfigError("populations file has no rows: " + path);

    for (std::size_t i = 0; i < order.size(); ++i) {
        if (out.times_s.empty() || out.times_s.back() != order[i].time) {
            out.times_s.push_back(order[i].time);
            out.populations.emplace_back();
        }
        if (out.times_s.size() == 1) out.initial_states.push_back(order[i].state);
        double count_total = 0.0;
        for (double c : counts[i]) count_total += c;
        Eigen::VectorXd p(static_cast<Eigen::Index>(probs[i].size()));
        for (std::size_t b = 0; b < probs[i].size(); ++b)
            p(static_cast<Eigen::Index>(b)) =
                count_total > 0.0 ? counts[i][b] / count_total : probs[i][b];
        out.populations.back().push_back(std::move(p));
    }
    return out;
}

ReconstructOutputs run_reconstruction(const std::vector<double>& grid_values,
                                      const NusSchedule& sched, double dt_s,
                                      const IstOptions& ist_opts, const PeakFitOptions& fit_opts) {
    ReconstructOutputs out;
    out.zero_padded = zero_padded_spectrum(grid_values, sched, dt_s);
    out.reconstructed = ist_s_reconstruct(grid_values, sched, dt_s, ist_opts);
    out.peaks = fit_lorentzian_peaks(out.reconstructed, fit_opts);
    return out;
}

void write_spectrum_csv(const std::string& path, const Spectrum& s) {
    auto out = open_output(path);
    out << "freq_Hz,re,im,magnitude\n";
    for (std::size_t k = 0; k < s.freq_hz.size(); ++k)
        out << format_double(s.freq_hz[k]) << ',' << format_double(s.amplitudes[k].real()) << ','
            << format_double(s.amplitudes[k].imag()) << ',' << format_double(std::abs(s.amplitudes[k]))
            << "\n";
}

void write_peaks_csv(const std::string& path, const PeakReport& report) {
    auto out = open_output(path);
    out << "f0_Hz,amplitude,hwhm_Hz,uncertainty_Hz,converged\n";
    for (const auto& p : report.peaks)
        out << format_double(p.f0_hz) << ',' << format_double(p.amplitude) << ','
            << format_double(p.hwhm_hz) << ',' << format_double(p.uncertainty_hz) << ','
            << (p.converged ? 1 : 0) << "\n";
}

void write_fidelity_series_csv(const std::string& path, const FidelitySeries& series) {
    auto out = open_output(path);
    out << "time_s,bc_mean,bc_min,bc_max\n";
    for (std::size_t i = 0; i < series.times_s.size(); ++i)
        out << format_double(series.times_s[i]) << ',' << format_double(series.bc_mean[i]) << ','
            << format_double(series.bc_min[i]) << ',' << format_double(series.bc_max[i]) << "\n";
}

void write_design_curve_csv(const std::string& path, const DesignCurve& curve, double depth_opt,
                            double delta_f_opt) {
    auto out = open_output(path);
    out << "# beta_rad2_s2=" << format_double(curve.beta)
        << " gates_per_step=" << format_double(curve.gates_per_step) << " n_spins=" << curve.n_spins
        << " gate_fidelity=" << format_double(curve.gate_fidelity) << "\n";
    out << "# depth_opt=" << format_double(depth_opt)
        << " delta_f_opt_hz=" << format_double(delta_f_opt) << "\n";
    out << "depth,linewidth_Hz,is_optimal\n";
    for (std::size_t i = 0; i < curve.depths.size(); ++i)
        out << format_double(curve.depths[i]) << ',' << format_double(curve.linewidth_hz[i]) << ",0\n";
    if (std::isfinite(depth_opt))
        out << format_double(depth_opt) << ',' << format_double(delta_f_opt) << ",1\n";
}

} // namespace nmrsim
