#include <doctest.h>

#include <cmath>
#include <random>

#include "nmrsim/errors.hpp"
#include "nmrsim/metrics.hpp"
#include "test_helpers.hpp"

using namespace nmrsim;

namespace {

Eigen::VectorXd random_distribution(std::mt19937_64& rng, int dim) {
    Eigen::VectorXd p(dim);
    double total = 0;
    for (int i = 0; i < dim; ++i) {
        p(i) = -std::log(std::max(1e-12, testutil::uniform(rng, 0, 1)));
        total += p(i);
    }
    return p / total;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("identical distributions give BC = 1, disjoint give 0") {
    Eigen::VectorXd p(4), q(4);
    p << 0.1, 0.2, 0.3, 0.4;
    CHECK(bhattacharyya(p, p) == doctest::Approx(1.0).epsilon(1e-14));

    p.setZero();
    q.setZero();
    p(0) = 1.0;
    q(1) = 1.0;
    CHECK(bhattacharyya(p, q) == doctest::Approx(0.0));
}

TEST_CASE("uniform vs delta on 16 states gives 1/4") {
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(16, 1.0 / 16.0);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(16);
    delta(0) = 1.0;
    // closed form: 1 - (1/2)(2 - 2*sqrt(1/16)) = 1/4
    CHECK(bhattacharyya(uniform, delta) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("BC is symmetric and bounded on random pairs") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 10000; ++trial) {
        const int dim = 2 + static_cast<int>(rng() % 15u);
        const Eigen::VectorXd p = random_distribution(rng, dim);
        const Eigen::VectorXd q = random_distribution(rng, dim);
        const double pq = bhattacharyya(p, q);
        CHECK(pq == bhattacharyya(q, p)); // exact symmetry
        CHECK(pq >= 0.0);
        CHECK(pq <= 1.0);
    }
}

TEST_CASE("BC input validation") {
    Eigen::VectorXd p(3), q(4);
    p << 0.2, 0.3, 0.5;
    q << 0.25, 0.25, 0.25, 0.25;
    CHECK_THROWS_AS(bhattacharyya(p, q), DimensionError);
    Eigen::VectorXd not_normalized(3);
    not_normalized << 0.5, 0.5, 0.5;
    CHECK_THROWS_AS(bhattacharyya(p, not_normalized), NumericError);
}

TEST_CASE("BC against a progressively depolarized copy never recovers") {
    std::mt19937_64 rng(62);
    const Eigen::VectorXd p = random_distribution(rng, 16);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(16, 1.0 / 16.0);
    double prev = 2.0;
    for (double lambda : {0.0, 0.1, 0.3, 0.6, 0.9, 1.0}) {
        const Eigen::VectorXd mixed = (1.0 - lambda) * p + lambda * uniform;
        const double bc = bhattacharyya(p, mixed);
        CHECK(bc <= prev + 1e-12);
        prev = bc;
    }
}

TEST_CASE("per-gate fidelity bound") {
    CHECK(squared_bc_per_gate(1.0, 17) == doctest::Approx(1.0));
    // bc^2 = 0.8 over 20 gates
    CHECK(squared_bc_per_gate(std::sqrt(0.8), 20) ==
          doctest::Approx(std::pow(0.8, 1.0 / 20.0)).epsilon(1e-12));
    CHECK(squared_bc_per_gate(std::sqrt(0.8), 20) == doctest::Approx(0.98895).epsilon(1e-4));
    CHECK_THROWS_AS(squared_bc_per_gate(0.9, 0), ConfigError);
    CHECK_THROWS_AS(squared_bc_per_gate(0.0, 5), ConfigError);
    CHECK_THROWS_AS(squared_bc_per_gate(1.1, 5), ConfigError);
}

TEST_CASE("bc_series aggregates per-state coefficients") {
    std::vector<double> times{0.0, 0.1};
    Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.25);
    Eigen::VectorXd b(4);
    b << 1.0, 0.0, 0.0, 0.0;
    std::vector<std::vector<Eigen::VectorXd>> noisy{{a, a}, {a, b}};
    std::vector<std::vector<Eigen::VectorXd>> ideal{{a, a}, {a, a}};
    const FidelitySeries series = bc_series(times, noisy, ideal);
    CHECK(series.bc_mean[0] == doctest::Approx(1.0));
    CHECK(series.bc_min[1] == doctest::Approx(0.5)); // BC(uniform4, delta) = sqrt(1/4)
    CHECK(series.bc_mean[1] == doctest::Approx(0.75));
    CHECK(series.bc_max[1] == doctest::Approx(1.0));

    std::vector<std::vector<Eigen::VectorXd>> short_set{{a}};
    CHECK_THROWS_AS(bc_series(times, short_set, ideal), ConfigError);
}

TEST_CASE("constant BC series has no spectral peaks after DC removal") {
    const int n = 512;
    const NusSchedule sched = poisson_gap_schedule(n, 64, 0.5, 41);
    FidelitySeries series;
    for (int idx : sched.indices) {
        series.times_s.push_back(idx * 0.01);
        series.bc_mean.push_back(0.9731);
        series.bc_min.push_back(0.9731);
        series.bc_max.push_back(0.9731);
    }
    const Spectrum spec = bc_series_spectrum(series, sched, 0.01);
    CHECK(fit_lorentzian_peaks(spec, 4).peaks.empty());
}

TEST_CASE("bc_series_spectrum insists the series lives on the schedule") {
    const NusSchedule sched = poisson_gap_schedule(256, 32, 0.5, 42);
    FidelitySeries series;
    series.times_s = {0.0};
    series.bc_mean = {1.0};
    series.bc_min = {1.0};
    series.bc_max = {1.0};
    CHECK_THROWS_AS(bc_series_spectrum(series, sched, 0.01), ConfigError);
}

TEST_CASE("FidelitySeries validation catches out-of-range values") {
    FidelitySeries series;
    series.times_s = {0.0};
    series.bc_mean = {1.2};
    series.bc_min = {0.9};
    series.bc_max = {1.2};
    CHECK_THROWS_AS(series.validate(), NumericError);
}

} // TEST_SUITE
