#include <doctest.h>

#include <cmath>
#include <random>

#include "nmrsim/circuits.hpp"
#include "nmrsim/errors.hpp"
#include "nmrsim/resources.hpp"
#include "nmrsim/simulator.hpp"
#include "test_helpers.hpp"

using namespace nmrsim;
using testutil::fit_slope;
using testutil::random_system;
using testutil::spectral_norm;

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

SpinSystem acetonitrile() {
    return load_molecule(std::string(NMRSIM_DATA_DIR) + "/acetonitrile.mol");
}

SpinSystem two_spin(double j_hz) {
    SpinSystem sys;
    sys.add_spin("a", 1.0);
    sys.add_spin("b", 1.0);
    sys.set_coupling(0, 1, j_hz);
    return sys;
}

} // namespace

TEST_SUITE("circuits") {

TEST_CASE("single bond, single step: three Ising gates at 2*pi*J*dt") {
    const Circuit circ = compile_trotter_plain(two_spin(1.0), 0.1, 1);
    REQUIRE(circ.gates().size() == 3);
    CHECK(circ.two_qubit_depth() == 3);
    for (const auto& g : circ.gates()) {
        CHECK(g.is_ising());
        CHECK(g.theta == doctest::Approx(kTwoPi * 0.1).epsilon(1e-14));
    }
    CHECK(circ.gates()[0].kind == GateKind::ising_xx);
    CHECK(circ.gates()[1].kind == GateKind::ising_yy);
    CHECK(circ.gates()[2].kind == GateKind::ising_zz);
}

TEST_CASE("zero-time compile is the identity") {
    std::mt19937_64 rng(5);
    const SpinSystem sys = random_system(rng, 3, 4.0, 1.0);
    const Circuit circ = compile_trotter_plain(sys, 0.0, 3);
    const Eigen::MatrixXcd u = circuit_unitary(circ);
    CHECK((u - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("first-order convergence in 1/r") {
    std::mt19937_64 rng(6);
    const SpinSystem sys = random_system(rng, 3, 1.0, 0.4);
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const double t = 0.35;
    const Eigen::MatrixXcd exact = evolution_unitary(h, t);

    std::vector<double> log_r, log_err;
    for (int r : {8, 16, 32, 64, 128}) {
        const Eigen::MatrixXcd approx = circuit_unitary(compile_trotter_plain(sys, t, r));
        log_r.push_back(std::log(static_cast<double>(r)));
        log_err.push_back(std::log(spectral_norm(exact - approx)));
    }
    CHECK(fit_slope(log_r, log_err) == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("measured step error sits below the commutator bound") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const SpinSystem sys = random_system(rng, 3 + trial % 2, 1.0, 0.5);
        const HamiltonianMatrix h = build_hamiltonian(sys);
        const double beta = beta_naive(sys).total;
        for (double dt : {1e-3, 1e-2}) {
            const double err = spectral_norm(evolution_unitary(h, dt) -
                                             circuit_unitary(compile_trotter_plain(sys, dt, 1)));
            CHECK(err <= beta * dt * dt / 2.0 + 1e-12);
        }
    }
}

TEST_CASE("acetonitrile circuit reaches 0.99 fidelity at t = 0.07 s") {
    const SpinSystem sys = acetonitrile();
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const double t = 0.07;
    // the operator-norm budget 0.1 guarantees state fidelity (1 - 0.005)^2
    const std::int64_t r = trotter_steps_precision(beta_naive(sys).total, t, 0.1);
    const Circuit step = compile_trotter_plain(sys, t / static_cast<double>(r), 1);
    const Eigen::MatrixXcd u = matrix_power(circuit_unitary(step), r);
    const Eigen::VectorXcd exact = evolve_exact(h, basis_state_vector(4, 0), t);
    CHECK(std::norm(exact.dot(u.col(0))) >= 0.99);
}

TEST_CASE("whole-molecule cluster compiles to the exact propagator") {
    SpinSystem sys = acetonitrile();
    sys.set_clusters({{0, 1, 2, 3}});
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const double t = 0.37;
    const Circuit circ = compile_trotter_clustered(sys, t, 1);
    REQUIRE(circ.gates().size() == 1);
    CHECK(spectral_norm(circuit_unitary(circ) - evolution_unitary(h, t)) < 1e-9);
}

TEST_CASE("clustered step beats the plain step on a two-cluster molecule") {
    SpinSystem sys;
    for (int i = 0; i < 4; ++i) sys.add_spin("s" + std::to_string(i), 1.0);
    sys.set_coupling(0, 1, 50.0); // strong intra
    sys.set_coupling(2, 3, 50.0);
    sys.set_coupling(1, 2, 1.0); // weak inter
    sys.set_clusters({{0, 1}, {2, 3}});
    const HamiltonianMatrix h = build_hamiltonian(sys);

    const double t = 1.0;
    const int r = 64;
    const Eigen::MatrixXcd exact = evolution_unitary(h, t);
    const double plain_err =
        spectral_norm(exact - circuit_unitary(compile_trotter_plain(sys, t, r)));
    const double clustered_err =
        spectral_norm(exact - circuit_unitary(compile_trotter_clustered(sys, t, r)));
    CHECK(clustered_err <= plain_err);
}

TEST_CASE("clustered compile requires a partition and small clusters") {
    std::mt19937_64 rng(8);
    const SpinSystem sys = random_system(rng, 3, 5.0, 0.0);
    CHECK_THROWS_AS(compile_trotter_clustered(sys, 1.0, 4), ConfigError);

    SpinSystem big;
    for (int i = 0; i < 8; ++i) big.add_spin("s" + std::to_string(i), 1.0);
    big.set_coupling(0, 1, 1.0);
    std::vector<int> everyone;
    for (int i = 0; i < 8; ++i) everyone.push_back(i);
    big.set_clusters({everyone});
    CHECK_THROWS_AS(compile_trotter_clustered(big, 1.0, 1), DimensionError);
}

TEST_CASE("padding reaches the target and leaves the unitary unchanged") {
    const SpinSystem sys = two_spin(3.0);
    Circuit circ = compile_trotter_plain(sys, 0.02, 2); // depth 6
    for (int i = 0; i < 4; ++i)
        circ.append(Gate::ising(GateKind::ising_zz, 0.3, 0, 1)); // depth 10
    REQUIRE(circ.two_qubit_depth() == 10);

    const Circuit padded = pad_circuit(circ, 40);
    CHECK(padded.two_qubit_depth() == 40);
    CHECK(spectral_norm(circuit_unitary(padded) - circuit_unitary(circ)) < 1e-10);

    const Circuit odd = pad_circuit(circ, 13); // parity forces 14
    CHECK(odd.two_qubit_depth() == 14);

    CHECK(pad_circuit(circ, 10).two_qubit_depth() == 10);
    CHECK_THROWS_AS(pad_circuit(circ, 9), ConfigError);
}

TEST_CASE("depth accounting") {
    Circuit circ(3);
    for (int i = 0; i < 5; ++i) circ.append(Gate::ising(GateKind::ising_xx, 0.1, 0, 1));
    for (int i = 0; i < 3; ++i) circ.append(Gate::rotation(GateKind::rot_z, 0.2, 2));
    CHECK(circ.two_qubit_depth() == 5);
    CHECK(circ.recompute_two_qubit_depth() == circ.two_qubit_depth());

    CHECK(Circuit(2).two_qubit_depth() == 0);

    CHECK(block_cost_model(1) == 0);
    CHECK(block_cost_model(2) == 3);
    CHECK(block_cost_model(3) == 14);
    CHECK(block_cost_model(4) == 61); // ceil((4^4 - 3*4 - 1)/4)

    std::mt19937_64 rng(9);
    Circuit with_block(4);
    with_block.append(Gate::block({0, 1, 2, 3}, testutil::random_unitary(rng, 16)));
    CHECK(with_block.two_qubit_depth() == 61);
    Circuit with_override(4);
    with_override.append(Gate::block({0, 1, 2, 3}, testutil::random_unitary(rng, 16), 7));
    CHECK(with_override.two_qubit_depth() == 7);
}

TEST_CASE("gate validation") {
    std::mt19937_64 rng(10);
    CHECK_THROWS_AS(Gate::ising(GateKind::ising_xx, 0.1, 2, 2), ConfigError);
    CHECK_THROWS_AS(Gate::rotation(GateKind::ising_xx, 0.1, 0), ConfigError);
    CHECK_THROWS_AS(Gate::block({0, 1}, Eigen::MatrixXcd::Identity(3, 3)), DimensionError);
    CHECK_THROWS_AS(Gate::block({0, 0}, Eigen::MatrixXcd::Identity(4, 4)), ConfigError);
    CHECK_THROWS_AS(Gate::block({0, 1, 2, 3, 4, 5, 6, 7},
                                testutil::random_unitary(rng, 256)),
                    ConfigError);
    Eigen::MatrixXcd not_unitary = Eigen::MatrixXcd::Identity(4, 4) * 1.5;
    CHECK_THROWS_AS(Gate::block({0, 1}, not_unitary), NumericError);
}

TEST_CASE("gate matrices are unitary and match small cases") {
    for (GateKind kind : {GateKind::rot_x, GateKind::rot_y, GateKind::rot_z}) {
        const Eigen::Matrix2cd u = gate_matrix_1q(kind, 0.7);
        CHECK((u.adjoint() * u - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    }
    for (GateKind kind : {GateKind::ising_xx, GateKind::ising_yy, GateKind::ising_zz}) {
        const Eigen::Matrix4cd u = gate_matrix_2q(kind, 1.3);
        CHECK((u.adjoint() * u - Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    }
    // IsingZZ is diagonal with phase theta/4
    const Eigen::Matrix4cd zz = gate_matrix_2q(GateKind::ising_zz, 0.8);
    CHECK(std::arg(zz(0, 0)) == doctest::Approx(-0.2));
    CHECK(std::arg(zz(1, 1)) == doctest::Approx(0.2));
}

TEST_CASE("circuit serialization is deterministic") {
    const SpinSystem sys = acetonitrile();
    const Circuit a = compile_trotter_plain(sys, 0.05, 2);
    const Circuit b = compile_trotter_plain(sys, 0.05, 2);
    const std::string text = circuit_to_text(a);
    CHECK(text == circuit_to_text(b));
    CHECK(text.rfind("qubits 4\n", 0) == 0);
    CHECK(text.find("isingxx") != std::string::npos);

    SpinSystem one_cluster = acetonitrile();
    one_cluster.set_clusters({{0, 1, 2, 3}});
    const std::string with_block = circuit_to_text(compile_trotter_clustered(one_cluster, 0.01, 1));
    CHECK(with_block.find("block 0 1 2 3") != std::string::npos);
    CHECK(with_block.find("hash=") != std::string::npos);
}

TEST_CASE("trotter plan records the per-step gate count") {
    const SpinSystem sys = acetonitrile();
    const TrotterPlan plan = make_trotter_plan(sys, 0.5, 10, TrotterLayout::plain);
    CHECK(plan.steps == 10);
    CHECK(plan.gates_per_step == 9); // three bonds, three axes
    CHECK_THROWS_AS(make_trotter_plan(sys, 0.5, 0, TrotterLayout::plain), ConfigError);
}

TEST_CASE("adaptive cost follows the distance to the nearest revival") {
    const SpinSystem sys = acetonitrile();
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const double period = 2.0 / 136.2;
    const AdaptiveDepthOptions opts;

    CHECK(adaptive_block_cost(sys, h, 0.0, opts) == opts.cost_base);
    CHECK(adaptive_block_cost(sys, h, period, opts) == opts.cost_base);
    CHECK(adaptive_block_cost(sys, h, 0.5 * period, opts) == opts.cost_cap);

    // even, monotone away from the revival, symmetric around the midpoint
    std::int64_t prev = -1;
    for (int i = 0; i <= 12; ++i) {
        const double t = 0.5 * period * i / 12.0;
        const std::int64_t cost = adaptive_block_cost(sys, h, t, opts);
        CHECK(cost % 2 == 0);
        CHECK(cost >= prev);
        CHECK(cost == adaptive_block_cost(sys, h, period - t, opts));
        prev = cost;
    }

    // the charged depth correlates with how entangling the unitary is
    std::vector<double> costs, entanglements;
    for (int i = 1; i < 24; ++i) {
        const double t = period * i / 24.0;
        costs.push_back(static_cast<double>(adaptive_block_cost(sys, h, t, opts)));
        entanglements.push_back(operator_entanglement(evolution_unitary(h, t), 2, 4));
    }
    double mc = 0, me = 0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        mc += costs[i] / costs.size();
        me += entanglements[i] / entanglements.size();
    }
    double num = 0, dc = 0, de = 0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        num += (costs[i] - mc) * (entanglements[i] - me);
        dc += (costs[i] - mc) * (costs[i] - mc);
        de += (entanglements[i] - me) * (entanglements[i] - me);
    }
    CHECK(num / std::sqrt(dc * de) > 0.5);
}

TEST_CASE("adaptive cost grows monotonically without recurrences") {
    std::mt19937_64 rng(13);
    const SpinSystem sys = random_system(rng, 3, 9.0, 2.0);
    const HamiltonianMatrix h = build_hamiltonian(sys);
    REQUIRE(!recurrence_period(h).has_value());
    const AdaptiveDepthOptions opts;
    std::int64_t prev = -1;
    for (double t : {0.0, 1e-4, 3e-4, 1e-3, 3e-3}) {
        const std::int64_t cost = adaptive_block_cost(sys, h, t, opts);
        CHECK(cost >= prev);
        prev = cost;
    }
    CHECK(prev <= std::max<std::int64_t>(opts.cost_cap, block_cost_model(3)));
}

TEST_CASE("depth-adaptive circuit is the exact evolution") {
    const SpinSystem sys = acetonitrile();
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const Circuit circ = compile_depth_adaptive(sys, h, 0.004);
    REQUIRE(circ.gates().size() == 1);
    CHECK(spectral_norm(circuit_unitary(circ) - evolution_unitary(h, 0.004)) < 1e-10);
}

} // TEST_SUITE
