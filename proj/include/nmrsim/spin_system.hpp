#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nmrsim {

/// Axis carrying the chemical-shift term h_i. Liquid-state conventions differ
/// on whether the local field sits on S^x or S^z; both are supported.
enum class ShiftAxis { x, z };

struct Spin {
    std::string label;
    double gamma = 1.0; // gyromagnetic ratio relative to the proton
};

/// A molecule as a set of spin-1/2 nuclei with Heisenberg J-couplings (Hz),
/// per-spin chemical shifts (Hz) and an optional cluster partition.
/// Immutable once built; safe to share across threads.
class SpinSystem {
  public:
    int add_spin(std::string label, double gamma);
    void set_coupling(int i, int j, double j_hz);
    void set_shift(int i, double h_hz);
    void set_clusters(std::vector<std::vector<int>> clusters);
    void set_shift_axis(ShiftAxis axis) { shift_axis_ = axis; }

    int n_spins() const { return static_cast<int>(spins_.size()); }
    std::size_t dim() const { return std::size_t{1} << n_spins(); }
    const std::vector<Spin>& spins() const { return spins_; }
    /// Bond map keyed by (min,max) index pairs; each bond stored once.
    const std::map<std::pair<int, int>, double>& couplings() const { return couplings_; }
    double coupling(int i, int j) const;
    const std::vector<double>& shifts() const { return shifts_; }
    const std::optional<std::vector<std::vector<int>>>& clusters() const { return clusters_; }
    ShiftAxis shift_axis() const { return shift_axis_; }

    /// Throws ConfigError if any structural invariant is violated.
    void validate() const;

  private:
    std::vector<Spin> spins_;
    std::map<std::pair<int, int>, double> couplings_;
    std::vector<double> shifts_;
    std::optional<std::vector<std::vector<int>>> clusters_;
    ShiftAxis shift_axis_ = ShiftAxis::x;
};

/// Molecule description file: "spin <label> <gamma>", "coupling <i> <j> <Hz>",
/// "shift <i> <Hz>", "cluster <i> <j> ...", '#' comments. Indices are 0-based.
SpinSystem load_molecule(const std::string& path);
SpinSystem parse_molecule(std::istream& in, const std::string& origin);

/// Dense Hamiltonian in angular-frequency units (rad/s); |0> = spin up,
/// qubit 0 is the leftmost tensor factor. Copies share one lazily computed
/// eigendecomposition.
class HamiltonianMatrix {
  public:
    HamiltonianMatrix(Eigen::MatrixXcd mat, int n_spins);

    const Eigen::MatrixXcd& matrix() const { return mat_; }
    int n_spins() const { return n_spins_; }
    std::size_t dim() const { return static_cast<std::size_t>(mat_.rows()); }

    const Eigen::VectorXd& eigenvalues() const;
    const Eigen::MatrixXcd& eigenvectors() const;

  private:
    struct EigCache {
        std::once_flag flag;
        Eigen::VectorXd values;
        Eigen::MatrixXcd vectors;
    };
    void ensure_eig() const;

    Eigen::MatrixXcd mat_;
    int n_spins_ = 0;
    std::shared_ptr<EigCache> cache_;
};

inline constexpr int kDefaultDenseLimit = 12;

/// H = sum_{i<j} 2*pi*J_ij S_i.S_j + sum_i 2*pi*h_i S_i^a, a per shift axis.
HamiltonianMatrix build_hamiltonian(const SpinSystem& sys, int dense_limit = kDefaultDenseLimit);

/// Diagonal of the weighted magnetization operator sum_i gamma_i S_i^z in the
/// computational basis.
Eigen::VectorXd magnetization_operator(const SpinSystem& sys);

struct MagnetizationState {
    std::size_t basis_index = 0;
    double m_tilde = 0.0;
};

/// All 2^N computational basis states with their weighted magnetizations.
std::vector<MagnetizationState> magnetization_basis(const SpinSystem& sys);

/// Basis indices with m_tilde > 0, ascending.
std::vector<std::size_t> positive_magnetization_states(const SpinSystem& sys);

/// U(t)|state>, computed through the cached eigendecomposition.
Eigen::VectorXcd evolve_exact(const HamiltonianMatrix& h, const Eigen::VectorXcd& state, double t_s);

Eigen::MatrixXcd evolution_unitary(const HamiltonianMatrix& h, double t_s);

enum class FidMode { full_trace, positive_only };

struct FidTrace {
    std::vector<double> times_s;
    std::vector<double> values;
};

/// Free induction decay of the weighted magnetization. full_trace evaluates
/// Tr[U' Sz~ U Sz~]; positive_only sums m~ <m~(t)|Sz~|m~(t)> over the
/// positive-magnetization basis states.
FidTrace fid_exact(const SpinSystem& sys, const std::vector<double>& times_s, FidMode mode);

/// Von Neumann entropy (bits) of the reduced state on `subsystem`.
double entanglement_entropy(const Eigen::VectorXcd& state, const std::vector<int>& subsystem,
                            int n_spins);

/// Smallest time after which U(t) repeats up to a global phase, i.e. 2*pi
/// over the gcd of the eigenvalue gaps; empty when the gaps are not
/// commensurate within the tolerance.
std::optional<double> recurrence_period(const HamiltonianMatrix& h, double rel_tol = 1e-9);

} // namespace nmrsim
