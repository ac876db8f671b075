#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nmrsim/spin_system.hpp"

namespace nmrsim {

/// Angle convention: RotA(theta,q) = exp(-i*theta*S_q^a) and
/// IsingAA(theta,qa,qb) = exp(-i*theta*S_qa^a*S_qb^a) with S = sigma/2, so a
/// Trotterized coupling J_ij over a step dt compiles to theta = 2*pi*J_ij*dt.
enum class GateKind { rot_x, rot_y, rot_z, ising_xx, ising_yy, ising_zz, block };

struct Gate {
    GateKind kind = GateKind::rot_x;
    double theta = 0.0;
    int q0 = -1;
    int q1 = -1;
    std::vector<int> block_qubits;
    std::shared_ptr<const Eigen::MatrixXcd> block_unitary;
    // Two-qubit-gate cost charged for a block; -1 selects the generic model.
    std::int64_t block_cost = -1;

    static Gate rotation(GateKind kind, double theta, int q);
    static Gate ising(GateKind kind, double theta, int qa, int qb);
    static Gate block(std::vector<int> qubits, Eigen::MatrixXcd unitary, std::int64_t cost = -1);

    bool is_rotation() const;
    bool is_ising() const;
};

/// Two-qubit-gate count of a generic k-qubit unitary, ceil((4^k - 3k - 1)/4).
std::int64_t block_cost_model(int k);

inline constexpr int kMaxBlockQubits = 7;

class Circuit {
  public:
    explicit Circuit(int n_qubits);

    void append(Gate g);
    const std::vector<Gate>& gates() const { return gates_; }
    int n_qubits() const { return n_qubits_; }

    /// Stored depth; always equals recompute_two_qubit_depth().
    std::int64_t two_qubit_depth() const { return depth_; }
    std::int64_t recompute_two_qubit_depth() const;

  private:
    int n_qubits_ = 0;
    std::int64_t depth_ = 0;
    std::vector<Gate> gates_;
};

std::int64_t depth(const Circuit& c);

enum class TrotterLayout { plain, clustered };

struct TrotterPlan {
    double total_time_s = 0.0;
    int steps = 1;
    TrotterLayout layout = TrotterLayout::plain;
    std::int64_t gates_per_step = 0;
};

TrotterPlan make_trotter_plan(const SpinSystem& sys, double t_s, int steps, TrotterLayout layout);

/// First-order product formula: per step all Ising-XX bonds, then all YY,
/// then all ZZ (bonds in lexicographic order), then the field rotations.
Circuit compile_trotter_plain(const SpinSystem& sys, double t_s, int steps);

/// Cluster variant: per step one exact block exp(-i*H_c*dt) per cluster
/// (intra-cluster couplings and cluster-local fields), then pairwise Ising
/// layers for the inter-cluster bonds.
Circuit compile_trotter_clustered(const SpinSystem& sys, double t_s, int steps);

/// Entanglement entropy of the unitary itself (entropy of the operator's
/// Schmidt decomposition across first `cut_qubits` | rest), the quantity a
/// depth-adaptive synthesizer has to pay for.
double operator_entanglement(const Eigen::MatrixXcd& u, int cut_qubits, int n_qubits);

/// Emulates depth-adaptive circuit synthesis: a single exact block for U(t)
/// whose charged two-qubit cost follows what a recurrence-aware compiler
/// would pay. When the spectrum is commensurate the evolution revives with a
/// fixed period and the cost grows quadratically with the distance to the
/// nearest revival (the Trotter step count for that distance), peaking at
/// cost_cap; without recurrences the cost grows monotonically with t up to
/// the generic-unitary bound. Costs are rounded to even gate counts so
/// padding can equalize depths exactly.
struct AdaptiveDepthOptions {
    int cost_base = 2;
    int cost_cap = 40;           // deepest charged circuit, matching hardware-scale synthesis
    double synth_epsilon = 0.01; // step budget for the aperiodic branch
};

Circuit compile_depth_adaptive(const SpinSystem& sys, const HamiltonianMatrix& h, double t_s,
                               const AdaptiveDepthOptions& opts = {});

/// Cost the adaptive compile would charge at time t (cheap; no circuit built).
std::int64_t adaptive_block_cost(const SpinSystem& sys, const HamiltonianMatrix& h, double t_s,
                                 const AdaptiveDepthOptions& opts = {});

/// Whole-system exact block with an explicit charged cost.
Circuit make_exact_block_circuit(const SpinSystem& sys, const HamiltonianMatrix& h, double t_s,
                                 std::int64_t cost);

/// Appends identity-composing IsingXX pairs cycling over adjacent qubit
/// pairs until the depth reaches target_depth (target_depth + 1 when parity
/// requires). The noiseless unitary is unchanged; only the charged noise
/// exposure grows.
Circuit pad_circuit(const Circuit& c, std::int64_t target_depth);

Eigen::Matrix2cd gate_matrix_1q(GateKind kind, double theta);
Eigen::Matrix4cd gate_matrix_2q(GateKind kind, double theta);

/// One gate per line: name, angle, qubits; blocks carry a content hash.
std::string circuit_to_text(const Circuit& c);

} // namespace nmrsim
