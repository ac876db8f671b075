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
using testutil::spin_op;

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Literal triple-sum oracle over the symmetric |J| matrix.
BetaBound beta_oracle(const SpinSystem& sys) {
    const int n = sys.n_spins();
    std::vector<std::vector<double>> j(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (const auto& [bond, v] : sys.couplings())
        j[static_cast<std::size_t>(bond.first)][static_cast<std::size_t>(bond.second)] =
            j[static_cast<std::size_t>(bond.second)][static_cast<std::size_t>(bond.first)] =
                std::abs(v);
    double paths = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int k = 0; k < n; ++k)
                paths += j[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] *
                         j[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)];
    double fields = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            fields += std::abs(sys.shifts()[static_cast<std::size_t>(a)] -
                               sys.shifts()[static_cast<std::size_t>(b)]) *
                      j[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    BetaBound out;
    out.beta1 = kTwoPi * kTwoPi * paths;
    out.beta2 = 0.5 * out.beta1;
    out.beta3_tilde = kTwoPi * kTwoPi * 0.5 * fields;
    out.total = out.beta1 + out.beta2 + out.beta3_tilde;
    return out;
}

// Product-formula terms in compile order: XX bonds, YY bonds, ZZ bonds, then
// the field layer as one global term.
std::vector<Eigen::MatrixXcd> layered_terms(const SpinSystem& sys) {
    const int n = sys.n_spins();
    std::vector<Eigen::MatrixXcd> terms;
    for (char axis : {'x', 'y', 'z'})
        for (const auto& [bond, j_hz] : sys.couplings())
            terms.push_back(kTwoPi * j_hz * spin_op(axis, bond.first, n) *
                            spin_op(axis, bond.second, n));
    Eigen::MatrixXcd field =
        Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(sys.dim()),
                               static_cast<Eigen::Index>(sys.dim()));
    bool any = false;
    for (int i = 0; i < n; ++i) {
        const double h = sys.shifts()[static_cast<std::size_t>(i)];
        if (h == 0.0) continue;
        any = true;
        field += kTwoPi * h * spin_op(sys.shift_axis() == ShiftAxis::x ? 'x' : 'z', i, n);
    }
    if (any) terms.push_back(field);
    return terms;
}

double true_commutator_sum(const SpinSystem& sys) {
    const auto terms = layered_terms(sys);
    double total = 0.0;
    for (std::size_t mu = 0; mu < terms.size(); ++mu) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(terms[mu].rows(), terms[mu].cols());
        for (std::size_t nu = mu + 1; nu < terms.size(); ++nu)
            acc += terms[nu] * terms[mu] - terms[mu] * terms[nu];
        total += spectral_norm(acc);
    }
    return total;
}

} // namespace

TEST_SUITE("resources") {

TEST_CASE("beta_naive equals the literal triple-sum oracle") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 8; ++trial) {
        SpinSystem sys = random_system(rng, 2 + trial % 4, 7.0, 3.0);
        const BetaBound got = beta_naive(sys);
        const BetaBound want = beta_oracle(sys);
        CHECK(got.beta1 == doctest::Approx(want.beta1).epsilon(1e-12));
        CHECK(got.beta2 == doctest::Approx(want.beta2).epsilon(1e-12));
        CHECK(got.beta3_tilde == doctest::Approx(want.beta3_tilde).epsilon(1e-12));
        CHECK(got.total == doctest::Approx(got.beta1 + got.beta2 + got.beta3_tilde));
    }
}

TEST_CASE("single bond: paths run only through the bond's endpoints") {
    SpinSystem sys;
    sys.add_spin("a", 1.0);
    sys.add_spin("b", 1.0);
    sys.set_coupling(0, 1, 4.0);
    const BetaBound b = beta_naive(sys);
    CHECK(b.beta1 == doctest::Approx(kTwoPi * kTwoPi * 2.0 * 16.0).epsilon(1e-12));
    CHECK(b.total == doctest::Approx(kTwoPi * kTwoPi * 1.5 * 2.0 * 16.0).epsilon(1e-12));
    CHECK(b.beta3_tilde == 0.0);
}

TEST_CASE("equal shifts zero out the field bound") {
    std::mt19937_64 rng(72);
    SpinSystem sys = random_system(rng, 3, 5.0, 0.0);
    for (int i = 0; i < 3; ++i) sys.set_shift(i, 2.5);
    CHECK(beta_naive(sys).beta3_tilde == 0.0);
}

TEST_CASE("the bound dominates the true nested-commutator sum") {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 10; ++trial) {
        const SpinSystem sys = random_system(rng, 3, 2.0, 1.0);
        CHECK(beta_naive(sys).total >= true_commutator_sum(sys) - 1e-9);
    }
}

TEST_CASE("the loose field bound dominates the tight one") {
    std::mt19937_64 rng(74);
    for (int trial = 0; trial < 10; ++trial) {
        const SpinSystem sys = random_system(rng, 4, 3.0, 5.0);
        CHECK(beta_naive(sys).beta3_tilde <= beta3_loose(sys) + 1e-12);
    }
}

TEST_CASE("acetonitrile step error obeys beta for millisecond steps") {
    const SpinSystem sys =
        load_molecule(std::string(NMRSIM_DATA_DIR) + "/acetonitrile.mol");
    const HamiltonianMatrix h = build_hamiltonian(sys);
    const double beta = beta_naive(sys).total;
    for (double dt : {1e-3, 2e-3, 5e-3}) {
        const double err = spectral_norm(evolution_unitary(h, dt) -
                                         circuit_unitary(compile_trotter_plain(sys, dt, 1)));
        CHECK(err <= beta * dt * dt / 2.0 + 1e-12);
    }
}

TEST_CASE("clustered bound: edge cases and the two-scale advantage") {
    // whole system in one cluster: nothing left to Trotterize
    SpinSystem whole = load_molecule(std::string(NMRSIM_DATA_DIR) + "/acetonitrile.mol");
    whole.set_clusters({{0, 1, 2, 3}});
    CHECK(beta_clustered(whole).total == 0.0);

    // no intra-cluster couplings: clustered equals naive
    SpinSystem spread;
    for (int i = 0; i < 4; ++i) spread.add_spin("s" + std::to_string(i), 1.0);
    spread.set_coupling(0, 2, 3.0);
    spread.set_coupling(1, 3, 2.0);
    spread.set_coupling(0, 3, 1.0);
    spread.set_shift(0, 4.0);
    spread.set_clusters({{0, 1}, {2, 3}});
    CHECK(beta_clustered(spread).total == doctest::Approx(beta_naive(spread).total).epsilon(1e-12));

    // strong-intra / weak-inter: at least a tenfold r_NMR reduction
    const SpinSystem two_scale = make_two_scale_instance(3, 100.0, 1.0);
    const double naive = beta_naive(two_scale).total;
    const double clustered = beta_clustered(two_scale).total;
    CHECK(clustered * 10.0 <= naive);
    const double gamma = 2.0 * M_PI * 0.1;
    const auto r_naive = trotter_steps_nmr(naive, 6.0, gamma, two_scale.n_spins());
    const auto r_clustered = trotter_steps_nmr(clustered, 6.0, gamma, two_scale.n_spins());
    CHECK(r_clustered * 10 <= r_naive);

    std::mt19937_64 rng(75);
    CHECK_THROWS_AS(beta_clustered(random_system(rng, 3, 1.0, 0.0)), ConfigError);
}

TEST_CASE("clustered never exceeds naive when a partition exists") {
    std::mt19937_64 rng(76);
    for (int trial = 0; trial < 8; ++trial) {
        SpinSystem sys = random_system(rng, 4, 6.0, 2.0, 0.9);
        sys.set_clusters({{0, 1}, {2, 3}});
        CHECK(beta_clustered(sys).total <= beta_naive(sys).total + 1e-12);
    }
}

TEST_CASE("trotter fidelity formula") {
    CHECK(trotter_fidelity(5.0, 0.0, 3) == doctest::Approx(1.0));
    CHECK(trotter_fidelity(2.0, 1.0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(trotter_fidelity(2.0, 1.0, 1000000) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK_THROWS_AS(trotter_fidelity(1.0, 1.0, 0), ConfigError);
}

TEST_CASE("precision step count") {
    CHECK(trotter_steps_precision(1.0, 1.0, 0.5) == 1);
    const double beta = 4.0 * M_PI * M_PI * 100.0;
    CHECK(trotter_steps_precision(beta, 6.0, 0.01) ==
          static_cast<std::int64_t>(std::ceil(beta * 36.0 / 0.02)));
    CHECK(trotter_steps_precision(1.0, 1.0, 0.999) ==
          static_cast<std::int64_t>(std::ceil(1.0 / (2 * 0.999))));
    CHECK_THROWS_AS(trotter_steps_precision(1.0, 1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(trotter_steps_precision(1.0, 1.0, 1.0), ConfigError);
}

TEST_CASE("NMR step count and its relation to the precision count") {
    CHECK(trotter_steps_nmr(1.0, 1.0, 0.1, 10) == 1); // ceil(0.5)
    CHECK(trotter_steps_nmr(1.0, 1.0, 1e9, 4) == 1);  // floors at one step
    // N = 1 and gamma = eps/T collapse the two formulas onto each other
    const double beta = 7.3, t = 2.0, eps = 0.2;
    CHECK(trotter_steps_nmr(beta, t, eps / t, 1) == trotter_steps_precision(beta, t, eps));
    CHECK_THROWS_AS(trotter_steps_nmr(1.0, 1.0, 0.0, 3), ConfigError);
}

TEST_CASE("perfect gates give the pure 1/sqrt(D) curve") {
    std::vector<double> depths, lw;
    for (double d = 10.0; d < 1e6; d *= 2.0) depths.push_back(d);
    const DesignCurve curve = design_curve(100.0, 12, 40.0, 1.0, depths);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < curve.depths.size(); ++i) {
        lx.push_back(std::log(curve.depths[i]));
        ly.push_back(std::log(curve.linewidth_hz[i]));
    }
    CHECK(fit_slope(lx, ly) == doctest::Approx(-0.5).epsilon(1e-9));
    // closed form at a point
    CHECK(design_linewidth(100.0, 12, 40.0, 1.0, 64.0) ==
          doctest::Approx(std::sqrt(100.0 * 40.0 / (2.0 * 64.0 * 12.0)) / kTwoPi).epsilon(1e-12));
}

TEST_CASE("the curve diverges at D = N/log(1/F)") {
    const double f = 0.999;
    const double pole = 12.0 / (-std::log(f));
    CHECK_NOTHROW(design_linewidth(50.0, 12, 30.0, f, 0.9 * pole));
    CHECK_THROWS_AS(design_linewidth(50.0, 12, 30.0, f, pole), ConfigError);
    CHECK_THROWS_AS(design_linewidth(50.0, 12, 30.0, f, 1.5 * pole), ConfigError);
}

TEST_CASE("curve minimum coincides with the closed-form optimum") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const double beta = testutil::uniform(rng, 1.0, 1e7);
        const int n = 4 + static_cast<int>(rng() % 60u);
        const double n_g = testutil::uniform(rng, 3.0, 500.0);
        const double f = 1.0 - std::pow(10.0, testutil::uniform(rng, -5.0, -1.5));
        const double numeric = design_curve_minimum(beta, n, n_g, f);
        const OptimalResolution opt = optimal_resolution(beta, n, n_g, f);
        CHECK(numeric == doctest::Approx(opt.delta_f_opt_hz).epsilon(1e-6));
    }
}

TEST_CASE("optimal resolution scalings") {
    const OptimalResolution base = optimal_resolution(1000.0, 10, 40.0, 0.999);
    const OptimalResolution doubled = optimal_resolution(1000.0, 10, 80.0, 0.999);
    CHECK(doubled.delta_f_opt_hz ==
          doctest::Approx(std::sqrt(2.0) * base.delta_f_opt_hz).epsilon(1e-12));

    // delta_f ~ sqrt(log(1/F))
    std::vector<double> lx, ly;
    for (double f : {0.99, 0.999, 0.9999}) {
        lx.push_back(std::log(-std::log(f)));
        ly.push_back(std::log(optimal_resolution(1000.0, 10, 40.0, f).delta_f_opt_hz));
    }
    CHECK(fit_slope(lx, ly) == doctest::Approx(0.5).epsilon(0.02));

    // perfect hardware: zero width, unbounded optimal depth
    const OptimalResolution perfect = optimal_resolution(1000.0, 10, 40.0, 1.0);
    CHECK(perfect.delta_f_opt_hz == 0.0);
    CHECK(std::isinf(perfect.depth_opt));

    // depth_opt ~ 1/log(1/F)
    CHECK(optimal_resolution(1000.0, 10, 40.0, 0.999).depth_opt ==
          doctest::Approx(10.0 / (2.0 * -std::log(0.999))).epsilon(1e-12));
}

TEST_CASE("heuristic scaling exponents") {
    // all-to-all carries a (N-1)^2 finite-size factor, so fit past N ~ 16
    const ScalingFit all = heuristic_scaling_check(ScalingModel::all_to_all, 16, 40, 1.0, 0, 5);
    CHECK(all.exponent == doctest::Approx(2.0).epsilon(0.1));

    const ScalingFit local = heuristic_scaling_check(ScalingModel::clustered, 8, 20, 1.0, 3, 5);
    CHECK(local.exponent == doctest::Approx(1.0).epsilon(0.2));

    const ScalingFit bond = heuristic_scaling_check(ScalingModel::single_bond, 4, 12, 1.0, 0, 5);
    CHECK(std::abs(bond.exponent) < 1e-9);
}

} // TEST_SUITE
