#include "nmrsim/spin_system.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <set>
#include <sstream>

#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Bit of qubit q in basis index n; qubit 0 is the leftmost tensor factor.
inline int qubit_bit(std::size_t n, int q, int n_spins) {
    return static_cast<int>((n >> (n_spins - 1 - q)) & 1u);
}

// |0> = spin up = +1/2.
inline double sz_value(std::size_t n, int q, int n_spins) {
    return qubit_bit(n, q, n_spins) == 0 ? 0.5 : -0.5;
}

} // namespace

int SpinSystem::add_spin(std::string label, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ConfigError("spin '" + label + "': gamma must be positive and finite");
    spins_.push_back({std::move(label), gamma});
    shifts_.push_back(0.0);
    return n_spins() - 1;
}

void SpinSystem::set_coupling(int i, int j, double j_hz) {
    if (i == j) throw ConfigError("self-coupling on spin " + std::to_string(i));
    if (i < 0 || j < 0 || i >= n_spins() || j >= n_spins())
        throw ConfigError("coupling index out of range");
    if (!std::isfinite(j_hz)) throw ConfigError("non-finite J coupling");
    couplings_[{std::min(i, j), std::max(i, j)}] = j_hz;
}

void SpinSystem::set_shift(int i, double h_hz) {
    if (i < 0 || i >= n_spins()) throw ConfigError("shift index out of range");
    if (!std::isfinite(h_hz)) throw ConfigError("non-finite chemical shift");
    shifts_[static_cast<std::size_t>(i)] = h_hz;
}

void SpinSystem::set_clusters(std::vector<std::vector<int>> clusters) {
    clusters_ = std::move(clusters);
    validate();
}

double SpinSystem::coupling(int i, int j) const {
    auto it = couplings_.find({std::min(i, j), std::max(i, j)});
    return it == couplings_.end() ? 0.0 : it->second;
}

void SpinSystem::validate() const {
    if (spins_.empty()) throw ConfigError("spin system has no spins");
    for (const auto& s : spins_)
        if (!(s.gamma > 0.0) || !std::isfinite(s.gamma))
            throw ConfigError("invalid gamma for spin '" + s.label + "'");
    for (const auto& [key, j] : couplings_) {
        if (key.first == key.second) throw ConfigError("self-coupling present");
        if (key.first < 0 || key.second >= n_spins()) throw ConfigError("coupling out of range");
        if (!std::isfinite(j)) throw ConfigError("non-finite coupling");
    }
    if (clusters_) {
        std::vector<int> seen(spins_.size(), 0);
        for (const auto& c : *clusters_) {
            if (c.empty()) throw ConfigError("empty cluster in partition");
            for (int idx : c) {
                if (idx < 0 || idx >= n_spins()) throw ConfigError("cluster index out of range");
                if (seen[static_cast<std::size_t>(idx)]++)
                    throw ConfigError("cluster partition repeats spin " + std::to_string(idx));
            }
        }
        for (int i = 0; i < n_spins(); ++i)
            if (!seen[static_cast<std::size_t>(i)])
                throw ConfigError("cluster partition misses spin " + std::to_string(i));
    }
}

SpinSystem parse_molecule(std::istream& in, const std::string& origin) {
    SpinSystem sys;
    std::vector<std::vector<int>> clusters;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (kind == "spin") {
            std::string label;
            double gamma = 0.0;
            if (!(ls >> label >> gamma)) throw ConfigError(where + ": expected 'spin <label> <gamma>'");
            sys.add_spin(label, gamma);
        } else if (kind == "coupling") {
            int i = 0, j = 0;
            double j_hz = 0.0;
            if (!(ls >> i >> j >> j_hz))
                throw ConfigError(where + ": expected 'coupling <i> <j> <Hz>'");
            sys.set_coupling(i, j, j_hz);
        } else if (kind == "shift") {
            int i = 0;
            double h = 0.0;
            if (!(ls >> i >> h)) throw ConfigError(where + ": expected 'shift <i> <Hz>'");
            sys.set_shift(i, h);
        } else if (kind == "cluster") {
            std::vector<int> c;
            int idx = 0;
            while (ls >> idx) c.push_back(idx);
            if (c.empty()) throw ConfigError(where + ": empty cluster line");
            clusters.push_back(std::move(c));
        } else if (kind == "shift_axis") {
            std::string axis;
            if (!(ls >> axis) || (axis != "x" && axis != "z"))
                throw ConfigError(where + ": shift_axis must be 'x' or 'z'");
            sys.set_shift_axis(axis == "x" ? ShiftAxis::x : ShiftAxis::z);
        } else {
            throw ConfigError(where + ": unknown directive '" + kind + "'");
        }
    }
    if (!clusters.empty()) sys.set_clusters(std::move(clusters));
    sys.validate();
    return sys;
}

SpinSystem load_molecule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open molecule file: " + path);
    return parse_molecule(in, path);
}

HamiltonianMatrix::HamiltonianMatrix(Eigen::MatrixXcd mat, int n_spins)
    : mat_(std::move(mat)), n_spins_(n_spins), cache_(std::make_shared<EigCache>()) {
    const auto d = std::size_t{1} << n_spins_;
    if (static_cast<std::size_t>(mat_.rows()) != d || static_cast<std::size_t>(mat_.cols()) != d)
        throw DimensionError("Hamiltonian dimension does not match 2^N");
    const double herm = (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12) throw NumericError("Hamiltonian not Hermitian, max deviation " + std::to_string(herm));
}

void HamiltonianMatrix::ensure_eig() const {
    std::call_once(cache_->flag, [this] {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(mat_);
        if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
        cache_->values = solver.eigenvalues();
        cache_->vectors = solver.eigenvectors();
    });
}

const Eigen::VectorXd& HamiltonianMatrix::eigenvalues() const {
    ensure_eig();
    return cache_->values;
}

const Eigen::MatrixXcd& HamiltonianMatrix::eigenvectors() const {
    ensure_eig();
    return cache_->vectors;
}

HamiltonianMatrix build_hamiltonian(const SpinSystem& sys, int dense_limit) {
    sys.validate();
    const int n = sys.n_spins();
    if (n > dense_limit)
        throw DimensionError("dense Hamiltonian limited to " + std::to_string(dense_limit) +
                             " spins, got " + std::to_string(n));
    const std::size_t d = sys.dim();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));

    // S_i.S_j = (S+S- + S-S+)/2 + SzSz: flip-flop off-diagonal 1/2, diagonal +-1/4.
    for (const auto& [bond, j_hz] : sys.couplings()) {
        const auto [i, j] = bond;
        const double w = kTwoPi * j_hz;
        for (std::size_t nidx = 0; nidx < d; ++nidx) {
            const double szi = sz_value(nidx, i, n);
            const double szj = sz_value(nidx, j, n);
            h(static_cast<Eigen::Index>(nidx), static_cast<Eigen::Index>(nidx)) += w * szi * szj;
            if (qubit_bit(nidx, i, n) != qubit_bit(nidx, j, n)) {
                const std::size_t flipped =
                    nidx ^ ((std::size_t{1} << (n - 1 - i)) | (std::size_t{1} << (n - 1 - j)));
                h(static_cast<Eigen::Index>(flipped), static_cast<Eigen::Index>(nidx)) += 0.5 * w;
            }
        }
    }

    for (int i = 0; i < n; ++i) {
        const double h_hz = sys.shifts()[static_cast<std::size_t>(i)];
        if (h_hz == 0.0) continue;
        const double w = kTwoPi * h_hz;
        for (std::size_t nidx = 0; nidx < d; ++nidx) {
            if (sys.shift_axis() == ShiftAxis::z) {
                h(static_cast<Eigen::Index>(nidx), static_cast<Eigen::Index>(nidx)) +=
                    w * sz_value(nidx, i, n);
            } else {
                const std::size_t flipped = nidx ^ (std::size_t{1} << (n - 1 - i));
                h(static_cast<Eigen::Index>(flipped), static_cast<Eigen::Index>(nidx)) += 0.5 * w;
            }
        }
    }

    return HamiltonianMatrix(std::move(h), n);
}

Eigen::VectorXd magnetization_operator(const SpinSystem& sys) {
    const int n = sys.n_spins();
    const std::size_t d = sys.dim();
    Eigen::VectorXd m(static_cast<Eigen::Index>(d));
    for (std::size_t nidx = 0; nidx < d; ++nidx) {
        double v = 0.0;
        for (int q = 0; q < n; ++q)
            v += sys.spins()[static_cast<std::size_t>(q)].gamma * sz_value(nidx, q, n);
        m(static_cast<Eigen::Index>(nidx)) = v;
    }
    return m;
}

std::vector<MagnetizationState> magnetization_basis(const SpinSystem& sys) {
    const Eigen::VectorXd m = magnetization_operator(sys);
    std::vector<MagnetizationState> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        out[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i), m(i)};
    return out;
}

std::vector<std::size_t> positive_magnetization_states(const SpinSystem& sys) {
    const Eigen::VectorXd m = magnetization_operator(sys);
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m(i) > 0.0) out.push_back(static_cast<std::size_t>(i));
    return out;
}

Eigen::VectorXcd evolve_exact(const HamiltonianMatrix& h, const Eigen::VectorXcd& state, double t_s) {
    if (!std::isfinite(t_s)) throw NumericError("evolve_exact: non-finite time");
    if (std::abs(state.norm() - 1.0) > 1e-9) throw NumericError("evolve_exact: state not normalized");
    const auto& vals = h.eigenvalues();
    const auto& vecs = h.eigenvectors();
    Eigen::VectorXcd amps = vecs.adjoint() * state;
    for (Eigen::Index k = 0; k < amps.size(); ++k)
        amps(k) *= std::polar(1.0, -vals(k) * t_s);
    Eigen::VectorXcd out = vecs * amps;
    if (std::abs(out.norm() - 1.0) > 1e-10) throw NumericError("evolve_exact: norm drift");
    return out;
}

Eigen::MatrixXcd evolution_unitary(const HamiltonianMatrix& h, double t_s) {
    if (!std::isfinite(t_s)) throw NumericError("evolution_unitary: non-finite time");
    const auto& vals = h.eigenvalues();
    const auto& vecs = h.eigenvectors();
    Eigen::VectorXcd phases(vals.size());
    for (Eigen::Index k = 0; k < vals.size(); ++k) phases(k) = std::polar(1.0, -vals(k) * t_s);
    return vecs * phases.asDiagonal() * vecs.adjoint();
}

FidTrace fid_exact(const SpinSystem& sys, const std::vector<double>& times_s, FidMode mode) {
    for (double t : times_s)
        if (!std::isfinite(t)) throw NumericError("fid_exact: non-finite time");
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const auto& vals = h.eigenvalues();
    const auto& vecs = h.eigenvectors();
    const Eigen::VectorXd mz = magnetization_operator(sys);
    const Eigen::Index d = static_cast<Eigen::Index>(sys.dim());

    FidTrace out;
    out.times_s = times_s;
    out.values.resize(times_s.size());

    if (mode == FidMode::full_trace) {
        // Tr[U' Sz~ U Sz~] = sum_pq |M_pq|^2 m-weighted phases, M = V' Sz~ V.
        const Eigen::MatrixXcd m_eig = vecs.adjoint() * mz.asDiagonal() * vecs;
        for (std::size_t ti = 0; ti < times_s.size(); ++ti) {
            const double t = times_s[ti];
            std::complex<double> acc(0.0, 0.0);
            for (Eigen::Index p = 0; p < d; ++p)
                for (Eigen::Index q = 0; q < d; ++q) {
                    const double mag2 = std::norm(m_eig(p, q));
                    if (mag2 == 0.0) continue;
                    acc += mag2 * std::polar(1.0, (vals(p) - vals(q)) * t);
                }
            if (std::abs(acc.imag()) > 1e-9)
                throw NumericError("fid_exact: imaginary residue " + std::to_string(acc.imag()));
            out.values[ti] = acc.real();
        }
        return out;
    }

    const auto initial = positive_magnetization_states(sys);
    // Amplitudes of each initial basis state in the eigenbasis.
    Eigen::MatrixXcd amps(d, static_cast<Eigen::Index>(initial.size()));
    for (std::size_t s = 0; s < initial.size(); ++s)
        amps.col(static_cast<Eigen::Index>(s)) =
            vecs.row(static_cast<Eigen::Index>(initial[s])).adjoint();
    for (std::size_t ti = 0; ti < times_s.size(); ++ti) {
        const double t = times_s[ti];
        Eigen::VectorXcd phases(d);
        for (Eigen::Index k = 0; k < d; ++k) phases(k) = std::polar(1.0, -vals(k) * t);
        double fid = 0.0;
        for (std::size_t s = 0; s < initial.size(); ++s) {
            const Eigen::VectorXcd psi = vecs * phases.cwiseProduct(amps.col(static_cast<Eigen::Index>(s)));
            double expect = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) expect += mz(k) * std::norm(psi(k));
            fid += mz(static_cast<Eigen::Index>(initial[s])) * expect;
        }
        out.values[ti] = fid;
    }
    return out;
}

std::optional<double> recurrence_period(const HamiltonianMatrix& h, double rel_tol) {
    const auto& vals = h.eigenvalues();
    const double scale = std::max(vals.cwiseAbs().maxCoeff(), 1.0);
    const double tol = rel_tol * scale;

    std::vector<double> gaps;
    for (Eigen::Index i = 0; i < vals.size(); ++i)
        for (Eigen::Index j = i + 1; j < vals.size(); ++j) {
            const double d = std::abs(vals(j) - vals(i));
            if (d > tol) gaps.push_back(d);
        }
    if (gaps.empty()) return std::nullopt; // constant phase; no dynamics

    // real-valued Euclid with tolerance
    double g = gaps.front();
    for (double d : gaps) {
        double a = std::max(d, g), b = std::min(d, g);
        while (b > tol) {
            double r = std::fmod(a, b);
            if (r > b - tol) r = 0.0;
            if (r < tol) r = 0.0;
            a = b;
            b = r;
        }
        g = a;
        if (g < 16.0 * tol) return std::nullopt;
    }
    for (double d : gaps)
        if (std::abs(d - std::round(d / g) * g) > 16.0 * tol) return std::nullopt;
    return 2.0 * 3.14159265358979323846 / g;
}

double entanglement_entropy(const Eigen::VectorXcd& state, const std::vector<int>& subsystem,
                            int n_spins) {
    if (subsystem.empty() || static_cast<int>(subsystem.size()) >= n_spins)
        throw ConfigError("entanglement_entropy: subsystem must be a proper nonempty subset");
    std::set<int> sub(subsystem.begin(), subsystem.end());
    if (sub.size() != subsystem.size()) throw ConfigError("entanglement_entropy: repeated index");
    for (int q : sub)
        if (q < 0 || q >= n_spins) throw ConfigError("entanglement_entropy: index out of range");
    if (std::abs(state.norm() - 1.0) > 1e-9)
        throw NumericError("entanglement_entropy: state not normalized");

    const int k = static_cast<int>(sub.size());
    const std::size_t da = std::size_t{1} << k;
    const std::size_t db = std::size_t{1} << (n_spins - k);

    std::vector<int> a_bits(sub.begin(), sub.end());
    std::vector<int> b_bits;
    for (int q = 0; q < n_spins; ++q)
        if (!sub.count(q)) b_bits.push_back(q);

    // rho_A[a,a'] = sum_b psi[a,b] conj(psi[a',b])
    Eigen::MatrixXcd grouped(static_cast<Eigen::Index>(da), static_cast<Eigen::Index>(db));
    for (std::size_t idx = 0; idx < static_cast<std::size_t>(state.size()); ++idx) {
        std::size_t a = 0, b = 0;
        for (std::size_t p = 0; p < a_bits.size(); ++p)
            a |= static_cast<std::size_t>(qubit_bit(idx, a_bits[p], n_spins)) << (a_bits.size() - 1 - p);
        for (std::size_t p = 0; p < b_bits.size(); ++p)
            b |= static_cast<std::size_t>(qubit_bit(idx, b_bits[p], n_spins)) << (b_bits.size() - 1 - p);
        grouped(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = state(static_cast<Eigen::Index>(idx));
    }
    const Eigen::MatrixXcd rho = grouped * grouped.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho);
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const double lambda = solver.eigenvalues()(i);
        if (lambda > 1e-12) entropy -= lambda * std::log2(lambda);
    }
    return entropy;
}

} // namespace nmrsim
