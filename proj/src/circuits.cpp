#include "nmrsim/circuits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

const char* gate_name(GateKind k) {
    switch (k) {
        case GateKind::rot_x: return "rotx";
        case GateKind::rot_y: return "roty";
        case GateKind::rot_z: return "rotz";
        case GateKind::ising_xx: return "isingxx";
        case GateKind::ising_yy: return "isingyy";
        case GateKind::ising_zz: return "isingzz";
        case GateKind::block: return "block";
    }
    return "?";
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

SpinSystem subsystem_of(const SpinSystem& sys, const std::vector<int>& members) {
    SpinSystem sub;
    for (int idx : members) {
        const auto& s = sys.spins()[static_cast<std::size_t>(idx)];
        sub.add_spin(s.label, s.gamma);
    }
    sub.set_shift_axis(sys.shift_axis());
    for (std::size_t a = 0; a < members.size(); ++a) {
        sub.set_shift(static_cast<int>(a), sys.shifts()[static_cast<std::size_t>(members[a])]);
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            const double j = sys.coupling(members[a], members[b]);
            if (j != 0.0) sub.set_coupling(static_cast<int>(a), static_cast<int>(b), j);
        }
    }
    return sub;
}

void append_field_rotations(Circuit& circ, const SpinSystem& sys, double dt_s) {
    const GateKind axis = sys.shift_axis() == ShiftAxis::x ? GateKind::rot_x : GateKind::rot_z;
    for (int i = 0; i < sys.n_spins(); ++i) {
        const double h = sys.shifts()[static_cast<std::size_t>(i)];
        if (h == 0.0) continue;
        circ.append(Gate::rotation(axis, kTwoPi * h * dt_s, i));
    }
}

} // namespace

Gate Gate::rotation(GateKind kind, double theta, int q) {
    if (kind != GateKind::rot_x && kind != GateKind::rot_y && kind != GateKind::rot_z)
        throw ConfigError("Gate::rotation: not a rotation kind");
    if (q < 0) throw ConfigError("Gate::rotation: negative qubit");
    Gate g;
    g.kind = kind;
    g.theta = theta;
    g.q0 = q;
    return g;
}

Gate Gate::ising(GateKind kind, double theta, int qa, int qb) {
    if (kind != GateKind::ising_xx && kind != GateKind::ising_yy && kind != GateKind::ising_zz)
        throw ConfigError("Gate::ising: not an Ising kind");
    if (qa < 0 || qb < 0 || qa == qb) throw ConfigError("Gate::ising: invalid qubit pair");
    Gate g;
    g.kind = kind;
    g.theta = theta;
    g.q0 = qa;
    g.q1 = qb;
    return g;
}

Gate Gate::block(std::vector<int> qubits, Eigen::MatrixXcd unitary, std::int64_t cost) {
    if (qubits.empty() || qubits.size() > kMaxBlockQubits)
        throw ConfigError("Gate::block: block size must be 1.." + std::to_string(kMaxBlockQubits));
    std::vector<int> sorted = qubits;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.front() < 0)
        throw ConfigError("Gate::block: qubit indices must be distinct and nonnegative");
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << qubits.size());
    if (unitary.rows() != d || unitary.cols() != d)
        throw DimensionError("Gate::block: unitary dimension mismatch");
    const double dev = (unitary.adjoint() * unitary - Eigen::MatrixXcd::Identity(d, d))
                           .cwiseAbs()
                           .maxCoeff();
    if (dev > 1e-10) throw NumericError("Gate::block: matrix not unitary, deviation " + std::to_string(dev));
    Gate g;
    g.kind = GateKind::block;
    g.block_qubits = std::move(qubits);
    g.block_unitary = std::make_shared<const Eigen::MatrixXcd>(std::move(unitary));
    g.block_cost = cost;
    return g;
}

bool Gate::is_rotation() const {
    return kind == GateKind::rot_x || kind == GateKind::rot_y || kind == GateKind::rot_z;
}

bool Gate::is_ising() const {
    return kind == GateKind::ising_xx || kind == GateKind::ising_yy || kind == GateKind::ising_zz;
}

std::int64_t block_cost_model(int k) {
    if (k < 1) throw ConfigError("block_cost_model: k must be >= 1");
    const std::int64_t four_k = std::int64_t{1} << (2 * k);
    const std::int64_t num = four_k - 3 * k - 1;
    return (num + 3) / 4; // ceil(num/4), num >= 0
}

Circuit::Circuit(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1) throw ConfigError("Circuit: need at least one qubit");
}

void Circuit::append(Gate g) {
    const auto check = [this](int q) {
        if (q < 0 || q >= n_qubits_) throw ConfigError("Circuit::append: qubit out of range");
    };
    if (g.kind == GateKind::block) {
        for (int q : g.block_qubits) check(q);
        depth_ += g.block_cost >= 0 ? g.block_cost
                                    : block_cost_model(static_cast<int>(g.block_qubits.size()));
    } else {
        check(g.q0);
        if (g.is_ising()) {
            check(g.q1);
            depth_ += 1;
        }
    }
    gates_.push_back(std::move(g));
}

std::int64_t Circuit::recompute_two_qubit_depth() const {
    std::int64_t d = 0;
    for (const auto& g : gates_) {
        if (g.is_ising())
            d += 1;
        else if (g.kind == GateKind::block)
            d += g.block_cost >= 0 ? g.block_cost
                                   : block_cost_model(static_cast<int>(g.block_qubits.size()));
    }
    return d;
}

std::int64_t depth(const Circuit& c) { return c.two_qubit_depth(); }

Circuit compile_trotter_plain(const SpinSystem& sys, double t_s, int steps) {
    if (steps < 1) throw ConfigError("compile_trotter_plain: steps must be >= 1");
    if (!std::isfinite(t_s) || t_s < 0.0) throw ConfigError("compile_trotter_plain: bad time");
    sys.validate();
    const double dt = t_s / steps;
    Circuit circ(sys.n_spins());
    for (int step = 0; step < steps; ++step) {
        for (GateKind kind : {GateKind::ising_xx, GateKind::ising_yy, GateKind::ising_zz})
            for (const auto& [bond, j_hz] : sys.couplings())
                circ.append(Gate::ising(kind, kTwoPi * j_hz * dt, bond.first, bond.second));
        append_field_rotations(circ, sys, dt);
    }
    return circ;
}

Circuit compile_trotter_clustered(const SpinSystem& sys, double t_s, int steps) {
    if (steps < 1) throw ConfigError("compile_trotter_clustered: steps must be >= 1");
    if (!std::isfinite(t_s) || t_s < 0.0) throw ConfigError("compile_trotter_clustered: bad time");
    sys.validate();
    if (!sys.clusters()) throw ConfigError("compile_trotter_clustered: no cluster partition");
    const auto& clusters = *sys.clusters();
    for (const auto& c : clusters)
        if (c.size() > kMaxBlockQubits)
            throw DimensionError("cluster of " + std::to_string(c.size()) +
                                 " spins exceeds exact-exponential block limit");

    const double dt = t_s / steps;

    // Per-cluster step unitaries, computed once.
    std::vector<std::vector<int>> members;
    std::vector<Eigen::MatrixXcd> blocks;
    for (const auto& c : clusters) {
        std::vector<int> m = c;
        std::sort(m.begin(), m.end());
        const SpinSystem sub = subsystem_of(sys, m);
        const HamiltonianMatrix hc = build_hamiltonian(sub);
        blocks.push_back(evolution_unitary(hc, dt));
        members.push_back(std::move(m));
    }

    // Inter-cluster bonds: those whose endpoints live in different clusters.
    std::vector<int> cluster_of(static_cast<std::size_t>(sys.n_spins()), -1);
    for (std::size_t ci = 0; ci < members.size(); ++ci)
        for (int q : members[ci]) cluster_of[static_cast<std::size_t>(q)] = static_cast<int>(ci);
    std::vector<std::pair<std::pair<int, int>, double>> inter;
    for (const auto& [bond, j_hz] : sys.couplings())
        if (cluster_of[static_cast<std::size_t>(bond.first)] !=
            cluster_of[static_cast<std::size_t>(bond.second)])
            inter.push_back({bond, j_hz});

    Circuit circ(sys.n_spins());
    for (int step = 0; step < steps; ++step) {
        for (std::size_t ci = 0; ci < members.size(); ++ci)
            circ.append(Gate::block(members[ci], blocks[ci]));
        for (GateKind kind : {GateKind::ising_xx, GateKind::ising_yy, GateKind::ising_zz})
            for (const auto& [bond, j_hz] : inter)
                circ.append(Gate::ising(kind, kTwoPi * j_hz * dt, bond.first, bond.second));
    }
    return circ;
}

double operator_entanglement(const Eigen::MatrixXcd& u, int cut_qubits, int n_qubits) {
    if (cut_qubits < 1 || cut_qubits >= n_qubits)
        throw ConfigError("operator_entanglement: cut must be a proper prefix");
    const auto da = Eigen::Index{1} << cut_qubits;
    const auto db = Eigen::Index{1} << (n_qubits - cut_qubits);
    if (u.rows() != da * db || u.cols() != da * db)
        throw DimensionError("operator_entanglement: dimension mismatch");
    Eigen::MatrixXcd m(da * da, db * db);
    for (Eigen::Index a = 0; a < da; ++a)
        for (Eigen::Index ap = 0; ap < da; ++ap)
            for (Eigen::Index b = 0; b < db; ++b)
                for (Eigen::Index bp = 0; bp < db; ++bp)
                    m(a * da + ap, b * db + bp) = u(a * db + b, ap * db + bp);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues();
    const double total = sv.squaredNorm();
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        const double p = sv(i) * sv(i) / total;
        if (p > 1e-14) entropy -= p * std::log2(p);
    }
    return entropy;
}

std::int64_t adaptive_block_cost(const SpinSystem& sys, const HamiltonianMatrix& h, double t_s,
                                 const AdaptiveDepthOptions& opts) {
    if (!std::isfinite(t_s) || t_s < 0.0) throw ConfigError("adaptive_block_cost: bad time");
    if (h.n_spins() != sys.n_spins()) throw DimensionError("adaptive_block_cost: spin count mismatch");
    if (opts.cost_cap < opts.cost_base) throw ConfigError("adaptive_block_cost: cap below base");

    const auto even_span = [&](double frac) {
        const double span = static_cast<double>(opts.cost_cap - opts.cost_base) / 2.0;
        return opts.cost_base + 2 * static_cast<std::int64_t>(std::llround(span * frac / 1.0));
    };

    if (const auto period = recurrence_period(h)) {
        double delta = std::fmod(t_s, *period);
        delta = std::min(delta, *period - delta);
        const double x = delta / (0.5 * *period); // 0 at a revival, 1 farthest away
        return even_span(x * x);
    }

    // no recurrences: charge the plain product-formula cost, saturating at the
    // generic-unitary bound
    double paths = 0.0;
    for (const auto& [bond_a, ja] : sys.couplings())
        for (const auto& [bond_b, jb] : sys.couplings()) {
            const bool share = bond_a.first == bond_b.first || bond_a.first == bond_b.second ||
                               bond_a.second == bond_b.first || bond_a.second == bond_b.second;
            if (share) paths += std::abs(ja) * std::abs(jb);
        }
    constexpr double two_pi = 6.28318530717958647692;
    const double beta = two_pi * two_pi * 3.0 * paths; // coarse first-order bound
    const auto steps = static_cast<std::int64_t>(
        std::ceil(beta * t_s * t_s / (2.0 * opts.synth_epsilon)));
    const std::int64_t gates_per_step = 3 * static_cast<std::int64_t>(sys.couplings().size());
    const std::int64_t cost =
        opts.cost_base +
        2 * ((std::max<std::int64_t>(1, steps) * std::max<std::int64_t>(1, gates_per_step)) / 2);
    return std::min(cost, std::max<std::int64_t>(opts.cost_cap,
                                                 block_cost_model(sys.n_spins())));
}

Circuit make_exact_block_circuit(const SpinSystem& sys, const HamiltonianMatrix& h, double t_s,
                                 std::int64_t cost) {
    std::vector<int> qubits(static_cast<std::size_t>(sys.n_spins()));
    for (int q = 0; q < sys.n_spins(); ++q) qubits[static_cast<std::size_t>(q)] = q;
    Circuit circ(sys.n_spins());
    circ.append(Gate::block(qubits, evolution_unitary(h, t_s), cost));
    return circ;
}

Circuit compile_depth_adaptive(const SpinSystem& sys, const HamiltonianMatrix& h, double t_s,
                               const AdaptiveDepthOptions& opts) {
    return make_exact_block_circuit(sys, h, t_s, adaptive_block_cost(sys, h, t_s, opts));
}

Circuit pad_circuit(const Circuit& c, std::int64_t target_depth) {
    const std::int64_t current = c.two_qubit_depth();
    if (target_depth < current)
        throw ConfigError("pad_circuit: target depth below current depth");
    if (target_depth == current) return c;
    if (c.n_qubits() < 2) throw ConfigError("pad_circuit: need at least two qubits");
    Circuit out = c;
    const std::int64_t pairs = (target_depth - current + 1) / 2;
    // Zero-angle pairs: a nonzero pad rotation sandwiched between damping
    // events changes the effective channel and imprints the pad count onto
    // the signal, defeating the purpose of padding. The pairs cycle over
    // adjacent qubit pairs, continuing where the existing gate count leaves
    // off, so the padded noise exposure is distributed uniformly.
    constexpr double theta0 = 0.0;
    const int n = c.n_qubits();
    for (std::int64_t p = 0; p < pairs; ++p) {
        const int qa = static_cast<int>((current + 2 * p) % n);
        const int qb = (qa + 1) % n;
        out.append(Gate::ising(GateKind::ising_xx, theta0, qa, qb));
        out.append(Gate::ising(GateKind::ising_xx, -theta0, qa, qb));
    }
    return out;
}

TrotterPlan make_trotter_plan(const SpinSystem& sys, double t_s, int steps, TrotterLayout layout) {
    if (steps < 1) throw ConfigError("make_trotter_plan: steps must be >= 1");
    TrotterPlan plan;
    plan.total_time_s = t_s;
    plan.steps = steps;
    plan.layout = layout;
    const Circuit one_step = layout == TrotterLayout::plain
                                 ? compile_trotter_plain(sys, t_s / steps, 1)
                                 : compile_trotter_clustered(sys, t_s / steps, 1);
    plan.gates_per_step = one_step.two_qubit_depth();
    return plan;
}

Eigen::Matrix2cd gate_matrix_1q(GateKind kind, double theta) {
    using cd = std::complex<double>;
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    Eigen::Matrix2cd m;
    switch (kind) {
        case GateKind::rot_x:
            m << cd(c, 0), cd(0, -s), cd(0, -s), cd(c, 0);
            return m;
        case GateKind::rot_y:
            m << cd(c, 0), cd(-s, 0), cd(s, 0), cd(c, 0);
            return m;
        case GateKind::rot_z:
            m << std::polar(1.0, -theta / 2.0), cd(0, 0), cd(0, 0), std::polar(1.0, theta / 2.0);
            return m;
        default:
            throw ConfigError("gate_matrix_1q: not a single-qubit rotation");
    }
}

Eigen::Matrix4cd gate_matrix_2q(GateKind kind, double theta) {
    using cd = std::complex<double>;
    const double c = std::cos(theta / 4.0);
    const double s = std::sin(theta / 4.0);
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    switch (kind) {
        case GateKind::ising_xx:
            m(0, 0) = m(1, 1) = m(2, 2) = m(3, 3) = cd(c, 0);
            m(0, 3) = m(1, 2) = m(2, 1) = m(3, 0) = cd(0, -s);
            return m;
        case GateKind::ising_yy:
            m(0, 0) = m(1, 1) = m(2, 2) = m(3, 3) = cd(c, 0);
            m(0, 3) = m(3, 0) = cd(0, s);
            m(1, 2) = m(2, 1) = cd(0, -s);
            return m;
        case GateKind::ising_zz:
            m(0, 0) = m(3, 3) = std::polar(1.0, -theta / 4.0);
            m(1, 1) = m(2, 2) = std::polar(1.0, theta / 4.0);
            return m;
        default:
            throw ConfigError("gate_matrix_2q: not a two-qubit Ising gate");
    }
}

std::string circuit_to_text(const Circuit& c) {
    std::ostringstream out;
    out << "qubits " << c.n_qubits() << "\n";
    char buf[64];
    for (const auto& g : c.gates()) {
        if (g.kind == GateKind::block) {
            out << "block";
            for (int q : g.block_qubits) out << ' ' << q;
            std::string payload;
            const auto& u = *g.block_unitary;
            for (Eigen::Index r = 0; r < u.rows(); ++r)
                for (Eigen::Index col = 0; col < u.cols(); ++col) {
                    std::snprintf(buf, sizeof buf, "%.12e,%.12e;", u(r, col).real(), u(r, col).imag());
                    payload += buf;
                }
            std::snprintf(buf, sizeof buf, " cost=%lld hash=%016llx",
                          static_cast<long long>(g.block_cost >= 0
                                                     ? g.block_cost
                                                     : block_cost_model(static_cast<int>(g.block_qubits.size()))),
                          static_cast<unsigned long long>(fnv1a(payload)));
            out << buf << "\n";
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", g.theta);
            out << gate_name(g.kind) << ' ' << buf << ' ' << g.q0;
            if (g.is_ising()) out << ' ' << g.q1;
            out << "\n";
        }
    }
    return out.str();
}

} // namespace nmrsim
