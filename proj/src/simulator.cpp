#include "nmrsim/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <random>

#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

using cd = std::complex<double>;

inline std::size_t insert_zero_bit(std::size_t i, int pos) {
    const std::size_t low = i & ((std::size_t{1} << pos) - 1);
    return ((i >> pos) << (pos + 1)) | low;
}

// Applies a 2x2 operator at qubit q to one column; qubit 0 is the leftmost
// tensor factor, so its bit position is n-1-q.
void apply_1q(cd* col, std::size_t dim, const Eigen::Matrix2cd& u, int q, int n) {
    const int pos = n - 1 - q;
    const std::size_t stride = std::size_t{1} << pos;
    for (std::size_t i = 0; i < dim / 2; ++i) {
        const std::size_t i0 = insert_zero_bit(i, pos);
        const std::size_t i1 = i0 | stride;
        const cd a0 = col[i0], a1 = col[i1];
        col[i0] = u(0, 0) * a0 + u(0, 1) * a1;
        col[i1] = u(1, 0) * a0 + u(1, 1) * a1;
    }
}

// Local two-bit index is 2*bit(qa) + bit(qb), matching gate_matrix_2q.
void apply_2q(cd* col, std::size_t dim, const Eigen::Matrix4cd& u, int qa, int qb, int n) {
    const int pa = n - 1 - qa;
    const int pb = n - 1 - qb;
    const int lo = std::min(pa, pb);
    const int hi = std::max(pa, pb);
    const std::size_t sa = std::size_t{1} << pa;
    const std::size_t sb = std::size_t{1} << pb;
    for (std::size_t i = 0; i < dim / 4; ++i) {
        std::size_t base = insert_zero_bit(i, lo);
        base = insert_zero_bit(base, hi);
        const std::size_t idx[4] = {base, base | sb, base | sa, base | sa | sb};
        cd a[4];
        for (int k = 0; k < 4; ++k) a[k] = col[idx[k]];
        for (int r = 0; r < 4; ++r) {
            cd acc(0, 0);
            for (int k = 0; k < 4; ++k) acc += u(r, k) * a[k];
            col[idx[r]] = acc;
        }
    }
}

// Dense k-qubit block; block_qubits[0] is the highest local bit.
void apply_kq(cd* col, std::size_t dim, const Eigen::MatrixXcd& u, const std::vector<int>& qs, int n) {
    const int k = static_cast<int>(qs.size());
    const std::size_t dk = std::size_t{1} << k;
    std::vector<int> positions;
    positions.reserve(qs.size());
    for (int q : qs) positions.push_back(n - 1 - q);
    std::vector<int> sorted = positions;
    std::sort(sorted.begin(), sorted.end());

    std::vector<std::size_t> offsets(dk);
    for (std::size_t local = 0; local < dk; ++local) {
        std::size_t off = 0;
        for (int b = 0; b < k; ++b)
            if ((local >> (k - 1 - b)) & 1u) off |= std::size_t{1} << positions[static_cast<std::size_t>(b)];
        offsets[local] = off;
    }

    std::vector<cd> in(dk), out(dk);
    for (std::size_t i = 0; i < dim >> k; ++i) {
        std::size_t base = i;
        for (int p : sorted) base = insert_zero_bit(base, p);
        for (std::size_t l = 0; l < dk; ++l) in[l] = col[base | offsets[l]];
        for (std::size_t r = 0; r < dk; ++r) {
            cd acc(0, 0);
            for (std::size_t l = 0; l < dk; ++l) acc += u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(l)) * in[l];
            out[r] = acc;
        }
        for (std::size_t l = 0; l < dk; ++l) col[base | offsets[l]] = out[l];
    }
}

void apply_gate_to_column(cd* col, std::size_t dim, const Gate& g, int n) {
    if (g.kind == GateKind::block) {
        apply_kq(col, dim, *g.block_unitary, g.block_qubits, n);
    } else if (g.is_ising()) {
        apply_2q(col, dim, gate_matrix_2q(g.kind, g.theta), g.q0, g.q1, n);
    } else {
        apply_1q(col, dim, gate_matrix_1q(g.kind, g.theta), g.q0, n);
    }
}

// rho -> G rho G' through two column passes: (G (G rho)')' = G rho G'.
template <typename ApplyCols>
void conjugate_inplace(Eigen::MatrixXcd& rho, const ApplyCols& apply_cols) {
    apply_cols(rho);
    Eigen::MatrixXcd tmp = rho.adjoint();
    apply_cols(tmp);
    rho = tmp.adjoint();
}

void apply_columns_1q(Eigen::MatrixXcd& m, const Eigen::Matrix2cd& u, int q, int n) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        apply_1q(m.col(c).data(), static_cast<std::size_t>(m.rows()), u, q, n);
}

void check_kraus(const std::vector<Eigen::Matrix2cd>& ks) {
    Eigen::Matrix2cd acc = Eigen::Matrix2cd::Zero();
    for (const auto& k : ks) acc += k.adjoint() * k;
    const double dev = (acc - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
    if (dev > 1e-12) throw NumericError("Kraus set not trace preserving, deviation " + std::to_string(dev));
}

void apply_kraus_1q(Eigen::MatrixXcd& rho, const std::vector<Eigen::Matrix2cd>& ks, int q, int n) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(rho.rows(), rho.cols());
    for (const auto& k : ks) {
        Eigen::MatrixXcd term = rho;
        conjugate_inplace(term, [&](Eigen::MatrixXcd& m) { apply_columns_1q(m, k, q, n); });
        acc += term;
    }
    rho = std::move(acc);
}

const Eigen::Matrix2cd& pauli(int i) {
    static const std::array<Eigen::Matrix2cd, 4> p = [] {
        std::array<Eigen::Matrix2cd, 4> a;
        a[0] = Eigen::Matrix2cd::Identity();
        a[1] << cd(0, 0), cd(1, 0), cd(1, 0), cd(0, 0);
        a[2] << cd(0, 0), cd(0, -1), cd(0, 1), cd(0, 0);
        a[3] << cd(1, 0), cd(0, 0), cd(0, 0), cd(-1, 0);
        return a;
    }();
    return p[static_cast<std::size_t>(i)];
}

void apply_depolarizing_1q(Eigen::MatrixXcd& rho, double p, int q, int n) {
    Eigen::MatrixXcd acc = (1.0 - p) * rho;
    for (int i = 1; i < 4; ++i) {
        Eigen::MatrixXcd term = rho;
        conjugate_inplace(term, [&](Eigen::MatrixXcd& m) { apply_columns_1q(m, pauli(i), q, n); });
        acc += (p / 3.0) * term;
    }
    rho = std::move(acc);
}

// Direct per-block forms of the damping channels; equivalent to the Kraus
// sums (cross-checked in the tests) and much cheaper on a density matrix.
void amp_damp_inplace(Eigen::MatrixXcd& rho, double p, int q, int n) {
    const int pos = n - 1 - q;
    const std::size_t stride = std::size_t{1} << pos;
    const std::size_t half = static_cast<std::size_t>(rho.rows()) / 2;
    const double keep = 1.0 - p;
    const double s = std::sqrt(keep);
    for (std::size_t rr = 0; rr < half; ++rr) {
        const std::size_t r0 = insert_zero_bit(rr, pos);
        const std::size_t r1 = r0 | stride;
        for (std::size_t cc = 0; cc < half; ++cc) {
            const std::size_t c0 = insert_zero_bit(cc, pos);
            const std::size_t c1 = c0 | stride;
            auto& e00 = rho(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0));
            auto& e01 = rho(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c1));
            auto& e10 = rho(static_cast<Eigen::Index>(r1), static_cast<Eigen::Index>(c0));
            auto& e11 = rho(static_cast<Eigen::Index>(r1), static_cast<Eigen::Index>(c1));
            e00 += p * e11;
            e11 *= keep;
            e01 *= s;
            e10 *= s;
        }
    }
}

void phase_damp_inplace(Eigen::MatrixXcd& rho, double p, int q, int n) {
    const int pos = n - 1 - q;
    const std::size_t stride = std::size_t{1} << pos;
    const std::size_t half = static_cast<std::size_t>(rho.rows()) / 2;
    const double s = std::sqrt(1.0 - p);
    for (std::size_t rr = 0; rr < half; ++rr) {
        const std::size_t r0 = insert_zero_bit(rr, pos);
        const std::size_t r1 = r0 | stride;
        for (std::size_t cc = 0; cc < half; ++cc) {
            const std::size_t c0 = insert_zero_bit(cc, pos);
            const std::size_t c1 = c0 | stride;
            rho(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c1)) *= s;
            rho(static_cast<Eigen::Index>(r1), static_cast<Eigen::Index>(c0)) *= s;
        }
    }
}

void apply_depolarizing_2q(Eigen::MatrixXcd& rho, double p, int qa, int qb, int n) {
    Eigen::MatrixXcd acc = (1.0 - p) * rho;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (i == 0 && j == 0) continue;
            Eigen::MatrixXcd term = rho;
            conjugate_inplace(term, [&](Eigen::MatrixXcd& m) {
                apply_columns_1q(m, pauli(i), qa, n);
                apply_columns_1q(m, pauli(j), qb, n);
            });
            acc += (p / 15.0) * term;
        }
    rho = std::move(acc);
}

// Damping on both qubits of one noise event, amplitude before phase.
void apply_two_qubit_gate_noise(Eigen::MatrixXcd& rho, const NoiseModel& noise, int qa, int qb, int n) {
    const int lo = std::min(qa, qb);
    const int hi = std::max(qa, qb);
    for (int q : {lo, hi}) {
        if (noise.amp_damping_2q > 0.0) amp_damp_inplace(rho, noise.amp_damping_2q, q, n);
        if (noise.phase_damping_2q > 0.0) phase_damp_inplace(rho, noise.phase_damping_2q, q, n);
        if (qa == qb) break; // single-qubit block event
    }
    if (noise.depolarizing_2q > 0.0 && qa != qb)
        apply_depolarizing_2q(rho, noise.depolarizing_2q, lo, hi, n);
}

} // namespace

void NoiseModel::validate() const {
    for (double p : {amp_damping_2q, phase_damping_2q, depolarizing_1q, depolarizing_2q})
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("noise probabilities must lie in [0,1]");
}

bool NoiseModel::any() const {
    return amp_damping_2q > 0.0 || phase_damping_2q > 0.0 || depolarizing_1q > 0.0 ||
           depolarizing_2q > 0.0;
}

std::vector<Eigen::Matrix2cd> amp_damping_kraus(double p) {
    Eigen::Matrix2cd k0 = Eigen::Matrix2cd::Zero(), k1 = Eigen::Matrix2cd::Zero();
    k0(0, 0) = 1.0;
    k0(1, 1) = std::sqrt(1.0 - p);
    k1(0, 1) = std::sqrt(p);
    std::vector<Eigen::Matrix2cd> ks{k0, k1};
    check_kraus(ks);
    return ks;
}

std::vector<Eigen::Matrix2cd> phase_damping_kraus(double p) {
    Eigen::Matrix2cd k0 = Eigen::Matrix2cd::Zero(), k1 = Eigen::Matrix2cd::Zero();
    k0(0, 0) = 1.0;
    k0(1, 1) = std::sqrt(1.0 - p);
    k1(1, 1) = std::sqrt(p);
    std::vector<Eigen::Matrix2cd> ks{k0, k1};
    check_kraus(ks);
    return ks;
}

DensityState::DensityState(Eigen::MatrixXcd rho, int n_qubits) : rho_(std::move(rho)), n_qubits_(n_qubits) {
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
    if (rho_.rows() != d || rho_.cols() != d) throw DimensionError("DensityState: dimension mismatch");
}

DensityState DensityState::basis_state(int n_qubits, std::size_t index) {
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
    if (index >= static_cast<std::size_t>(d)) throw ConfigError("DensityState: basis index out of range");
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    rho(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
    return DensityState(std::move(rho), n_qubits);
}

Eigen::VectorXd DensityState::populations() const { return rho_.diagonal().real(); }

void DensityState::validate(double eig_tol) const {
    if (std::abs(rho_.trace().real() - 1.0) > 1e-9 || std::abs(rho_.trace().imag()) > 1e-9)
        throw NumericError("DensityState: trace deviates from one");
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw NumericError("DensityState: not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho_);
    if (solver.eigenvalues().minCoeff() < -eig_tol)
        throw NumericError("DensityState: negative eigenvalue " +
                           std::to_string(solver.eigenvalues().minCoeff()));
}

Eigen::VectorXcd basis_state_vector(int n_qubits, std::size_t index) {
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
    if (index >= static_cast<std::size_t>(d)) throw ConfigError("basis index out of range");
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d);
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return v;
}

Eigen::VectorXcd run_statevector(const Circuit& c, std::size_t initial_basis_index) {
    if (c.n_qubits() > kStateVectorQubitLimit)
        throw DimensionError("statevector backend limited to " +
                             std::to_string(kStateVectorQubitLimit) + " qubits");
    Eigen::VectorXcd state = basis_state_vector(c.n_qubits(), initial_basis_index);
    const std::size_t dim = static_cast<std::size_t>(state.size());
    for (const auto& g : c.gates()) apply_gate_to_column(state.data(), dim, g, c.n_qubits());
    if (std::abs(state.norm() - 1.0) > 1e-10) throw NumericError("run_statevector: norm drift");
    return state;
}

DensityState run_density(const Circuit& c, std::size_t initial_basis_index, const NoiseModel& noise) {
    noise.validate();
    if (c.n_qubits() > kDensityQubitLimit)
        throw DimensionError("density backend limited to " + std::to_string(kDensityQubitLimit) +
                             " qubits");
    const int n = c.n_qubits();
    DensityState state = DensityState::basis_state(n, initial_basis_index);
    Eigen::MatrixXcd rho = state.matrix();
    const std::size_t dim = static_cast<std::size_t>(rho.rows());

    for (const auto& g : c.gates()) {
        conjugate_inplace(rho, [&](Eigen::MatrixXcd& m) {
            for (Eigen::Index col = 0; col < m.cols(); ++col)
                apply_gate_to_column(m.col(col).data(), dim, g, n);
        });
        if (g.is_ising()) {
            apply_two_qubit_gate_noise(rho, noise, g.q0, g.q1, n);
        } else if (g.is_rotation()) {
            if (noise.depolarizing_1q > 0.0) apply_depolarizing_1q(rho, noise.depolarizing_1q, g.q0, n);
        } else {
            const int k = static_cast<int>(g.block_qubits.size());
            const std::int64_t events = g.block_cost >= 0 ? g.block_cost : block_cost_model(k);
            for (std::int64_t e = 0; e < events; ++e) {
                if (k >= 2) {
                    const int qa = g.block_qubits[static_cast<std::size_t>(e % k)];
                    const int qb = g.block_qubits[static_cast<std::size_t>((e + 1) % k)];
                    apply_two_qubit_gate_noise(rho, noise, qa, qb, n);
                } else {
                    // single-qubit block: damp the lone qubit per event
                    apply_two_qubit_gate_noise(rho, noise, g.block_qubits[0], g.block_qubits[0], n);
                }
            }
        }
        // cheap sanity after each gate+channel application
        const double tr_dev = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
        if (tr_dev > 1e-9) throw NumericError("run_density: trace drift " + std::to_string(tr_dev));
    }
    return DensityState(std::move(rho), n);
}

Eigen::MatrixXcd circuit_unitary(const Circuit& c) {
    if (c.n_qubits() > 12) throw DimensionError("circuit_unitary: too many qubits for dense form");
    const std::size_t dim = std::size_t{1} << c.n_qubits();
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(dim),
                                                    static_cast<Eigen::Index>(dim));
    for (const auto& g : c.gates())
        for (Eigen::Index col = 0; col < u.cols(); ++col)
            apply_gate_to_column(u.col(col).data(), dim, g, c.n_qubits());
    return u;
}

Eigen::MatrixXcd matrix_power(const Eigen::MatrixXcd& u, std::int64_t r) {
    if (r < 0) throw ConfigError("matrix_power: negative exponent");
    Eigen::MatrixXcd result = Eigen::MatrixXcd::Identity(u.rows(), u.cols());
    Eigen::MatrixXcd base = u;
    std::int64_t e = r;
    while (e > 0) {
        if (e & 1) result = result * base;
        base = base * base;
        e >>= 1;
    }
    return result;
}

Eigen::VectorXd PopulationRecord::effective() const {
    if (shots > 0) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(counts.size()));
        for (std::size_t i = 0; i < counts.size(); ++i)
            p(static_cast<Eigen::Index>(i)) =
                static_cast<double>(counts[i]) / static_cast<double>(shots);
        return p;
    }
    return probabilities;
}

void PopulationRecord::validate() const {
    if (std::abs(probabilities.sum() - 1.0) > 1e-9)
        throw NumericError("PopulationRecord: probabilities sum to " + std::to_string(probabilities.sum()));
    if (probabilities.minCoeff() < -1e-9) throw NumericError("PopulationRecord: negative probability");
    if (shots > 0) {
        std::int64_t total = 0;
        for (auto c : counts) total += c;
        if (total != shots) throw NumericError("PopulationRecord: counts do not sum to shots");
    }
}

PopulationRecord populations_from_state(const Eigen::VectorXcd& state) {
    PopulationRecord rec;
    rec.probabilities = state.cwiseAbs2();
    return rec;
}

PopulationRecord populations_from_density(const DensityState& rho) {
    PopulationRecord rec;
    rec.probabilities = rho.populations();
    return rec;
}

PopulationRecord sample_counts(const PopulationRecord& exact, std::int64_t shots, std::uint64_t seed) {
    if (shots < 1) throw ConfigError("sample_counts: shots must be >= 1");
    exact.validate();
    const Eigen::Index d = exact.probabilities.size();
    std::vector<double> cdf(static_cast<std::size_t>(d));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        acc += std::max(0.0, exact.probabilities(i));
        cdf[static_cast<std::size_t>(i)] = acc;
    }
    std::mt19937_64 rng(seed);
    PopulationRecord out;
    out.probabilities = exact.probabilities;
    out.counts.assign(static_cast<std::size_t>(d), 0);
    out.shots = shots;
    for (std::int64_t s = 0; s < shots; ++s) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx = std::min(static_cast<std::size_t>(it - cdf.begin()),
                                         static_cast<std::size_t>(d - 1));
        ++out.counts[idx];
    }
    return out;
}

Eigen::MatrixXcd apply_single_qubit_kraus(const Eigen::MatrixXcd& rho,
                                          const std::vector<Eigen::Matrix2cd>& kraus, int q,
                                          int n_qubits) {
    check_kraus(kraus);
    Eigen::MatrixXcd out = rho;
    apply_kraus_1q(out, kraus, q, n_qubits);
    return out;
}

Eigen::MatrixXcd apply_amp_damping(const Eigen::MatrixXcd& rho, double p, int q, int n_qubits) {
    Eigen::MatrixXcd out = rho;
    amp_damp_inplace(out, p, q, n_qubits);
    return out;
}

Eigen::MatrixXcd apply_phase_damping(const Eigen::MatrixXcd& rho, double p, int q, int n_qubits) {
    Eigen::MatrixXcd out = rho;
    phase_damp_inplace(out, p, q, n_qubits);
    return out;
}

double measure_fid_point(const SpinSystem& sys, const std::vector<std::size_t>& initial_states,
                         const std::vector<PopulationRecord>& outputs) {
    if (outputs.size() != initial_states.size())
        throw ConfigError("measure_fid_point: need one output per initial state");
    const Eigen::VectorXd mz = magnetization_operator(sys);
    double fid = 0.0;
    for (std::size_t s = 0; s < initial_states.size(); ++s) {
        const Eigen::VectorXd p = outputs[s].effective();
        if (p.size() != mz.size()) throw DimensionError("measure_fid_point: population dimension mismatch");
        fid += mz(static_cast<Eigen::Index>(initial_states[s])) * p.dot(mz);
    }
    return fid;
}

} // namespace nmrsim
