#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nmrsim/circuits.hpp"
#include "nmrsim/spin_system.hpp"

namespace nmrsim {

/// Kraus channel rates. Amplitude and phase damping attach to every qubit a
/// two-qubit gate touches; depolarizing attaches per gate (single- and
/// two-qubit variants) when nonzero.
struct NoiseModel {
    double amp_damping_2q = 0.0;
    double phase_damping_2q = 0.0;
    double depolarizing_1q = 0.0;
    double depolarizing_2q = 0.0;

    void validate() const;
    bool any() const;
};

inline constexpr int kStateVectorQubitLimit = 20;
inline constexpr int kDensityQubitLimit = 7;

class DensityState {
  public:
    DensityState(Eigen::MatrixXcd rho, int n_qubits);
    static DensityState basis_state(int n_qubits, std::size_t index);

    const Eigen::MatrixXcd& matrix() const { return rho_; }
    int n_qubits() const { return n_qubits_; }
    Eigen::VectorXd populations() const;

    /// Trace-one, Hermitian, positive within tolerances; throws NumericError.
    void validate(double eig_tol = 1e-9) const;

  private:
    Eigen::MatrixXcd rho_;
    int n_qubits_ = 0;
};

Eigen::VectorXcd basis_state_vector(int n_qubits, std::size_t index);

/// Applies the circuit to |initial>; norm preserved to 1e-10.
Eigen::VectorXcd run_statevector(const Circuit& c, std::size_t initial_basis_index);

/// Noisy evolution on the density matrix. Per two-qubit gate, amplitude then
/// phase damping on each touched qubit (ascending index), then two-qubit
/// depolarizing; blocks receive their charged cost in noise events,
/// distributed round-robin over the block qubits.
DensityState run_density(const Circuit& c, std::size_t initial_basis_index, const NoiseModel& noise);

/// Circuit unitary built by running all basis columns (small circuits only).
Eigen::MatrixXcd circuit_unitary(const Circuit& c);

/// U^r by repeated squaring.
Eigen::MatrixXcd matrix_power(const Eigen::MatrixXcd& u, std::int64_t r);

struct PopulationRecord {
    Eigen::VectorXd probabilities;
    std::vector<std::int64_t> counts; // empty unless shot-sampled
    std::int64_t shots = 0;

    /// Probabilities actually used downstream: empirical when shots > 0.
    Eigen::VectorXd effective() const;
    void validate() const;
};

PopulationRecord populations_from_state(const Eigen::VectorXcd& state);
PopulationRecord populations_from_density(const DensityState& rho);

/// Draws `shots` basis-state samples by inverse CDF with an explicit
/// deterministic generator, so results depend only on (record, shots, seed).
PopulationRecord sample_counts(const PopulationRecord& exact, std::int64_t shots, std::uint64_t seed);

/// FID(t) = sum over positive-magnetization initial states of
/// m~_n * sum_j p_n(j) m~_j, one PopulationRecord per initial state.
double measure_fid_point(const SpinSystem& sys, const std::vector<std::size_t>& initial_states,
                         const std::vector<PopulationRecord>& outputs);

/// Kraus sets used by the noisy backend; each satisfies sum K'K = I to 1e-12
/// (checked on construction).
std::vector<Eigen::Matrix2cd> amp_damping_kraus(double p);
std::vector<Eigen::Matrix2cd> phase_damping_kraus(double p);

/// Reference Kraus application, sum_k K rho K'; the backend itself uses
/// direct per-block updates that the tests compare against this path.
Eigen::MatrixXcd apply_single_qubit_kraus(const Eigen::MatrixXcd& rho,
                                          const std::vector<Eigen::Matrix2cd>& kraus, int q,
                                          int n_qubits);

/// Direct channel forms exposed for the equivalence tests.
Eigen::MatrixXcd apply_amp_damping(const Eigen::MatrixXcd& rho, double p, int q, int n_qubits);
Eigen::MatrixXcd apply_phase_damping(const Eigen::MatrixXcd& rho, double p, int q, int n_qubits);

} // namespace nmrsim
