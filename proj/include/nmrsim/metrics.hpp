#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nmrsim/cs.hpp"
#include "nmrsim/simulator.hpp"

namespace nmrsim {

/// Bhattacharyya coefficient between two probability distributions. Both the
/// 1 - (1/2) sum (sqrt p - sqrt q)^2 form and sum sqrt(p q) are evaluated and
/// cross-checked to 1e-12 after exact renormalization of the inputs.
double bhattacharyya(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double bhattacharyya(const PopulationRecord& p, const PopulationRecord& q);

/// BC time series averaged over the initial-state set.
struct FidelitySeries {
    std::vector<double> times_s;
    std::vector<double> bc_mean;
    std::vector<double> bc_min;
    std::vector<double> bc_max;

    void validate() const; // all values in [0,1], equal lengths
};

FidelitySeries
bc_series(const std::vector<double>& times_s,
          const std::vector<std::vector<Eigen::VectorXd>>& noisy_populations_per_time,
          const std::vector<std::vector<Eigen::VectorXd>>& ideal_populations_per_time);

/// IST-S spectrum of the mean-removed BC series sampled on the schedule.
Spectrum bc_series_spectrum(const FidelitySeries& series, const NusSchedule& sched, double dt_s,
                            const IstOptions& opts = {});

/// Per-gate fidelity bound (bc^2)^(1/n): the value whose n-fold power
/// reproduces the squared Bhattacharyya coefficient.
double squared_bc_per_gate(double bc, std::int64_t n_two_qubit_gates);

} // namespace nmrsim
