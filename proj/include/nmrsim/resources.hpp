#pragma once

#include <cstdint>
#include <vector>

#include "nmrsim/spin_system.hpp"

namespace nmrsim {

enum class BetaVariant { naive, clustered };

/// Commutator-norm bound on the first-order product-formula error, split into
/// its three contributions. Units rad^2/s^2 (couplings and shifts enter in Hz
/// and are converted by 2*pi here).
struct BetaBound {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3_tilde = 0.0;
    double total = 0.0; // beta1 + beta2 + beta3_tilde
    BetaVariant variant = BetaVariant::naive;
};

/// beta1 <= sum_{ijk} |J_ik||J_kj|, beta2 <= (1/2) the same path sum, and
/// beta3~ <= (1/2) sum_{ij} |h_i - h_j||J_ij|; triple sums run over all
/// ordered index triples of the symmetric coupling matrix.
BetaBound beta_naive(const SpinSystem& sys);

/// Cluster variant: intra-cluster couplings V drop out of the V.V paths;
/// remaining terms are (3/2)|J.V| + (3/2)|J.J| + (1/2)|J||dh| path sums over
/// the inter-cluster couplings J.
BetaBound beta_clustered(const SpinSystem& sys);

/// Looser field bound beta3 = sum_{ij} |h_i||J_ij| (used for ordering checks).
double beta3_loose(const SpinSystem& sys);

/// F_PF(T) = exp(-beta T^2 / (2 r)).
double trotter_fidelity(double beta, double t_s, std::int64_t r);

/// r_eps = ceil(beta T^2 / (2 eps)), floored at one step.
std::int64_t trotter_steps_precision(double beta, double t_s, double epsilon);

/// r_NMR = ceil(beta T / (2 gamma N)), floored at one step; gamma is the
/// per-spin dephasing rate in rad/s. Compared with r_eps this trades the
/// precision target for the spectral linewidth, an N/eps-fold reduction.
std::int64_t trotter_steps_nmr(double beta, double t_s, double gamma_rad_s, int n_spins);

/// Achievable linewidth vs circuit depth from the hardware/algorithm balance
/// -N_g log F + beta dt^2/2 <= gamma N dt, closed with T = 1/gamma and
/// D = N_g T / dt:  gamma(D)^2 = beta N_g / (2 D (N - D log(1/F))).
struct DesignCurve {
    std::vector<double> depths;
    std::vector<double> linewidth_hz;
    double beta = 0.0;
    double gates_per_step = 0.0;
    int n_spins = 0;
    double gate_fidelity = 1.0;
};

DesignCurve design_curve(double beta, int n_spins, double gates_per_step, double gate_fidelity,
                         const std::vector<double>& depth_grid);

/// Linewidth at a single depth (Hz).
double design_linewidth(double beta, int n_spins, double gates_per_step, double gate_fidelity,
                        double depth);

/// Golden-section minimum of the design curve over continuous depth.
double design_curve_minimum(double beta, int n_spins, double gates_per_step, double gate_fidelity);

struct OptimalResolution {
    double delta_f_opt_hz = 0.0; // (1/(2 pi N)) sqrt(2 N_g beta log(1/F))
    double depth_opt = 0.0;      // N / (2 log(1/F)); infinite for F = 1
};

OptimalResolution optimal_resolution(double beta, int n_spins, double gates_per_step,
                                     double gate_fidelity);

enum class ScalingModel { all_to_all, clustered, single_bond };

struct ScalingFit {
    double exponent = 0.0;
    std::vector<int> sizes;
    std::vector<double> betas; // mean beta over the seeded instances per size
};

/// Generates random instances of the chosen topology (all-to-all couplings
/// Kac-normalized as J/sqrt(N); clustered with fixed neighbor degree) and
/// fits the exponent of beta_naive versus N on a log-log scale.
ScalingFit heuristic_scaling_check(ScalingModel model, int n_min, int n_max, double j_hz,
                                   int degree, std::uint64_t seed);

/// The synthetic two-scale benchmark molecule: two fully coupled clusters
/// with intra-cluster coupling v_hz and a single weak inter-cluster bond j_hz.
SpinSystem make_two_scale_instance(int spins_per_cluster, double v_hz, double j_hz);

} // namespace nmrsim
