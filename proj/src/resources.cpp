#include "nmrsim/resources.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Dense |J| matrix in Hz, zero diagonal.
std::vector<std::vector<double>> abs_coupling_matrix(const SpinSystem& sys) {
    const std::size_t n = static_cast<std::size_t>(sys.n_spins());
    std::vector<std::vector<double>> j(n, std::vector<double>(n, 0.0));
    for (const auto& [bond, val] : sys.couplings()) {
        j[static_cast<std::size_t>(bond.first)][static_cast<std::size_t>(bond.second)] = std::abs(val);
        j[static_cast<std::size_t>(bond.second)][static_cast<std::size_t>(bond.first)] = std::abs(val);
    }
    return j;
}

double path_sum(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    const std::size_t n = a.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (a[i][k] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) total += a[i][k] * b[k][j];
        }
    return total;
}

double field_sum(const std::vector<std::vector<double>>& j, const std::vector<double>& h) {
    const std::size_t n = j.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) total += j[i][k] * std::abs(h[i] - h[k]);
    return 0.5 * total;
}

double uniform_pm(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double mag = lo + (hi - lo) * u;
    return (rng() & 1u) ? mag : -mag;
}

} // namespace

BetaBound beta_naive(const SpinSystem& sys) {
    sys.validate();
    const auto j = abs_coupling_matrix(sys);
    const double paths = path_sum(j, j);
    const double conv = kTwoPi * kTwoPi;
    BetaBound b;
    b.variant = BetaVariant::naive;
    b.beta1 = conv * paths;
    b.beta2 = conv * 0.5 * paths;
    b.beta3_tilde = conv * field_sum(j, sys.shifts());
    b.total = b.beta1 + b.beta2 + b.beta3_tilde;
    return b;
}

BetaBound beta_clustered(const SpinSystem& sys) {
    sys.validate();
    if (!sys.clusters()) throw ConfigError("beta_clustered: no cluster partition");
    const std::size_t n = static_cast<std::size_t>(sys.n_spins());

    std::vector<int> cluster_of(n, -1);
    const auto& clusters = *sys.clusters();
    for (std::size_t ci = 0; ci < clusters.size(); ++ci)
        for (int q : clusters[ci]) cluster_of[static_cast<std::size_t>(q)] = static_cast<int>(ci);

    std::vector<std::vector<double>> inter(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> intra(n, std::vector<double>(n, 0.0));
    for (const auto& [bond, val] : sys.couplings()) {
        const auto a = static_cast<std::size_t>(bond.first);
        const auto b = static_cast<std::size_t>(bond.second);
        auto& dest = cluster_of[a] == cluster_of[b] ? intra : inter;
        dest[a][b] = dest[b][a] = std::abs(val);
    }

    const double jv = path_sum(inter, intra);
    const double jj = path_sum(inter, inter);
    const double jh = field_sum(inter, sys.shifts());
    const double conv = kTwoPi * kTwoPi;

    BetaBound b;
    b.variant = BetaVariant::clustered;
    // the cluster-block commutator term rides along with beta1
    b.beta1 = conv * (1.5 * jv + jj);
    b.beta2 = conv * 0.5 * jj;
    b.beta3_tilde = conv * jh;
    b.total = b.beta1 + b.beta2 + b.beta3_tilde;
    return b;
}

double beta3_loose(const SpinSystem& sys) {
    const auto j = abs_coupling_matrix(sys);
    const auto& h = sys.shifts();
    double total = 0.0;
    for (std::size_t i = 0; i < j.size(); ++i)
        for (std::size_t k = 0; k < j.size(); ++k) total += std::abs(h[i]) * j[i][k];
    return kTwoPi * kTwoPi * total;
}

double trotter_fidelity(double beta, double t_s, std::int64_t r) {
    if (r < 1) throw ConfigError("trotter_fidelity: r must be >= 1");
    if (!(t_s >= 0.0) || !(beta >= 0.0)) throw ConfigError("trotter_fidelity: bad arguments");
    return std::exp(-beta * t_s * t_s / (2.0 * static_cast<double>(r)));
}

std::int64_t trotter_steps_precision(double beta, double t_s, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("trotter_steps_precision: eps in (0,1)");
    if (!(beta >= 0.0) || !(t_s >= 0.0)) throw ConfigError("trotter_steps_precision: bad arguments");
    const double r = beta * t_s * t_s / (2.0 * epsilon);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(r)));
}

std::int64_t trotter_steps_nmr(double beta, double t_s, double gamma_rad_s, int n_spins) {
    if (!(gamma_rad_s > 0.0)) throw ConfigError("trotter_steps_nmr: gamma must be positive");
    if (n_spins < 1) throw ConfigError("trotter_steps_nmr: need at least one spin");
    if (!(beta >= 0.0) || !(t_s >= 0.0)) throw ConfigError("trotter_steps_nmr: bad arguments");
    const double r = beta * t_s / (2.0 * gamma_rad_s * static_cast<double>(n_spins));
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(r)));
}

double design_linewidth(double beta, int n_spins, double gates_per_step, double gate_fidelity,
                        double depth) {
    if (!(gate_fidelity > 0.0 && gate_fidelity <= 1.0))
        throw ConfigError("design_linewidth: F must lie in (0,1]");
    if (!(depth > 0.0)) throw ConfigError("design_linewidth: depth must be positive");
    if (!(beta > 0.0) || !(gates_per_step > 0.0) || n_spins < 1)
        throw ConfigError("design_linewidth: bad parameters");
    const double log_inv_f = -std::log(gate_fidelity);
    const double denom = static_cast<double>(n_spins) - depth * log_inv_f;
    if (denom <= 0.0)
        throw ConfigError("design_linewidth: depth at or beyond divergence point N/log(1/F)");
    const double gamma2 = beta * gates_per_step / (2.0 * depth * denom);
    return std::sqrt(gamma2) / kTwoPi;
}

DesignCurve design_curve(double beta, int n_spins, double gates_per_step, double gate_fidelity,
                         const std::vector<double>& depth_grid) {
    if (depth_grid.empty()) throw ConfigError("design_curve: empty depth grid");
    DesignCurve curve;
    curve.beta = beta;
    curve.gates_per_step = gates_per_step;
    curve.n_spins = n_spins;
    curve.gate_fidelity = gate_fidelity;
    for (double d : depth_grid) {
        curve.depths.push_back(d);
        curve.linewidth_hz.push_back(design_linewidth(beta, n_spins, gates_per_step, gate_fidelity, d));
    }
    return curve;
}

double design_curve_minimum(double beta, int n_spins, double gates_per_step, double gate_fidelity) {
    const double log_inv_f = -std::log(gate_fidelity);
    double hi = log_inv_f > 0.0 ? 0.999999 * static_cast<double>(n_spins) / log_inv_f
                                : 1e12; // F = 1: pure 1/sqrt(D), no interior minimum
    double lo = 1e-9 * hi;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    const auto f = [&](double d) {
        return design_linewidth(beta, n_spins, gates_per_step, gate_fidelity, d);
    };
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 300 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    return f(0.5 * (lo + hi));
}

OptimalResolution optimal_resolution(double beta, int n_spins, double gates_per_step,
                                     double gate_fidelity) {
    if (!(gate_fidelity > 0.0 && gate_fidelity <= 1.0))
        throw ConfigError("optimal_resolution: F must lie in (0,1]");
    if (!(beta >= 0.0) || !(gates_per_step >= 0.0) || n_spins < 1)
        throw ConfigError("optimal_resolution: bad parameters");
    const double log_inv_f = -std::log(gate_fidelity);
    OptimalResolution res;
    res.delta_f_opt_hz =
        std::sqrt(2.0 * gates_per_step * beta * log_inv_f) / (kTwoPi * static_cast<double>(n_spins));
    res.depth_opt = log_inv_f > 0.0 ? static_cast<double>(n_spins) / (2.0 * log_inv_f)
                                    : std::numeric_limits<double>::infinity();
    return res;
}

SpinSystem make_two_scale_instance(int spins_per_cluster, double v_hz, double j_hz) {
    if (spins_per_cluster < 2) throw ConfigError("make_two_scale_instance: clusters need >= 2 spins");
    SpinSystem sys;
    const int total = 2 * spins_per_cluster;
    for (int i = 0; i < total; ++i) sys.add_spin("s" + std::to_string(i), 1.0);
    std::vector<std::vector<int>> clusters(2);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < spins_per_cluster; ++i) {
            const int idx = c * spins_per_cluster + i;
            clusters[static_cast<std::size_t>(c)].push_back(idx);
            for (int p = i + 1; p < spins_per_cluster; ++p)
                sys.set_coupling(idx, c * spins_per_cluster + p, v_hz);
        }
    sys.set_coupling(spins_per_cluster - 1, spins_per_cluster, j_hz);
    sys.set_clusters(std::move(clusters));
    return sys;
}

ScalingFit heuristic_scaling_check(ScalingModel model, int n_min, int n_max, double j_hz,
                                   int degree, std::uint64_t seed) {
    if (n_min < 2 || n_max < n_min) throw ConfigError("heuristic_scaling_check: bad size range");
    constexpr int kInstances = 4;
    ScalingFit fit;
    for (int n = n_min; n <= n_max; ++n) {
        double mean_beta = 0.0;
        for (int inst = 0; inst < kInstances; ++inst) {
            std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(n) << 32) ^
                                static_cast<std::uint64_t>(inst));
            SpinSystem sys;
            for (int i = 0; i < n; ++i) sys.add_spin("s" + std::to_string(i), 1.0);
            switch (model) {
                case ScalingModel::all_to_all: {
                    const double scale = j_hz / std::sqrt(static_cast<double>(n));
                    for (int i = 0; i < n; ++i)
                        for (int j = i + 1; j < n; ++j)
                            sys.set_coupling(i, j, uniform_pm(rng, 0.5 * scale, 1.5 * scale));
                    break;
                }
                case ScalingModel::clustered: {
                    for (int i = 0; i < n; ++i)
                        for (int off = 1; off <= degree; ++off) {
                            const int j = (i + off) % n;
                            if (j != i && sys.coupling(i, j) == 0.0)
                                sys.set_coupling(i, j, uniform_pm(rng, 0.5 * j_hz, 1.5 * j_hz));
                        }
                    break;
                }
                case ScalingModel::single_bond:
                    sys.set_coupling(0, 1, j_hz);
                    break;
            }
            mean_beta += beta_naive(sys).total;
        }
        fit.sizes.push_back(n);
        fit.betas.push_back(mean_beta / kInstances);
    }

    // least-squares slope of log beta vs log N
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto count = static_cast<double>(fit.sizes.size());
    for (std::size_t i = 0; i < fit.sizes.size(); ++i) {
        const double x = std::log(static_cast<double>(fit.sizes[i]));
        const double y = std::log(std::max(fit.betas[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.exponent = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    return fit;
}

} // namespace nmrsim
