#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nmrsim/cs.hpp"
#include "nmrsim/errors.hpp"
#include "nmrsim/fft.hpp"
#include "test_helpers.hpp"

using namespace nmrsim;

namespace {

NusSchedule full_schedule(int n) {
    NusSchedule s;
    s.grid_size = n;
    for (int i = 0; i < n; ++i) s.indices.push_back(i);
    return s;
}

double mean_gap(const NusSchedule& s, std::size_t from, std::size_t to) {
    double acc = 0;
    for (std::size_t i = from + 1; i < to; ++i) acc += s.indices[i] - s.indices[i - 1];
    return acc / static_cast<double>(to - from - 1);
}

std::vector<cdouble> naive_dft(const std::vector<cdouble>& x) {
    const std::size_t n = x.size();
    std::vector<cdouble> out(n, {0, 0});
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            out[k] += x[j] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * j) / n);
    return out;
}

} // namespace

TEST_SUITE("cs") {

TEST_CASE("fft: known transforms, Parseval, non-power-of-two sizes") {
    // impulse -> flat
    std::vector<cdouble> impulse(8, {0, 0});
    impulse[0] = 1.0;
    for (const auto& v : fft(impulse)) CHECK(std::abs(v - cdouble(1, 0)) < 1e-14);

    std::mt19937_64 rng(3);
    for (std::size_t n : {16u, 12u, 100u, 256u}) {
        std::vector<cdouble> x(n);
        for (auto& v : x) v = cdouble(testutil::uniform(rng, -1, 1), testutil::uniform(rng, -1, 1));
        const auto spec = fft(x);
        const auto ref = naive_dft(x);
        double max_dev = 0;
        for (std::size_t k = 0; k < n; ++k) max_dev = std::max(max_dev, std::abs(spec[k] - ref[k]));
        CHECK(max_dev < 1e-9);

        double time_energy = 0, freq_energy = 0;
        for (const auto& v : x) time_energy += std::norm(v);
        for (const auto& v : spec) freq_energy += std::norm(v);
        CHECK(freq_energy / n == doctest::Approx(time_energy).epsilon(1e-10));

        const auto back = ifft(spec);
        double round_dev = 0;
        for (std::size_t k = 0; k < n; ++k) round_dev = std::max(round_dev, std::abs(back[k] - x[k]));
        CHECK(round_dev < 1e-10);
    }
}

TEST_CASE("poisson gap schedules hit the budget exactly and deterministically") {
    for (std::uint64_t seed : {1ull, 2ull, 99ull, 12345ull}) {
        const NusSchedule s = poisson_gap_schedule(4096, 102, 0.5, seed);
        CHECK(s.budget() == 102);
        CHECK(s.indices.front() == 0);
        CHECK_NOTHROW(s.validate());
        const NusSchedule again = poisson_gap_schedule(4096, 102, 0.5, seed);
        CHECK(s.indices == again.indices);
    }
    CHECK(poisson_gap_schedule(4096, 102, 0.5, 1).indices !=
          poisson_gap_schedule(4096, 102, 0.5, 2).indices);

    const NusSchedule identity = poisson_gap_schedule(64, 64, 0.5, 9);
    CHECK(identity.indices == full_schedule(64).indices);

    CHECK_THROWS_AS(poisson_gap_schedule(64, 65, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(poisson_gap_schedule(64, 0, 0.5, 1), ConfigError);
}

TEST_CASE("alpha shapes the gap profile") {
    // alpha = 0.5: dense early, sparse late
    const NusSchedule half = poisson_gap_schedule(4096, 102, 0.5, 7);
    const std::size_t n = half.indices.size();
    CHECK(mean_gap(half, 0, n / 5) < mean_gap(half, 4 * n / 5, n));

    // alpha = 1: dense at both ends, sparse in the middle
    const NusSchedule one = poisson_gap_schedule(4096, 102, 1.0, 7);
    const double middle = mean_gap(one, 2 * n / 5, 3 * n / 5);
    CHECK(mean_gap(one, 0, n / 5) < middle);
    CHECK(mean_gap(one, 4 * n / 5, n) < middle);
}

TEST_CASE("schedule files round trip") {
    const NusSchedule s = poisson_gap_schedule(512, 40, 0.5, 31);
    std::stringstream buf;
    write_schedule(buf, s);
    const NusSchedule back = read_schedule(buf);
    CHECK(back.grid_size == s.grid_size);
    CHECK(back.indices == s.indices);
    CHECK(back.alpha == doctest::Approx(s.alpha));
    CHECK(back.seed == s.seed);
}

TEST_CASE("zero-padded spectrum of an on-grid cosine is two bins") {
    const int n = 256;
    const double dt = 0.01;
    // cosine at bin 10, plus a constant that the DC removal must strip
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = 2.5 + std::cos(2 * M_PI * 10.0 * i / n);
    const Spectrum s = zero_padded_spectrum(x, full_schedule(n), dt);
    CHECK(s.kind == SpectrumKind::zero_padded);
    CHECK(s.df_hz() == doctest::Approx(1.0 / (n * dt)));
    const auto mags = s.magnitudes();
    for (int k = 0; k < n; ++k) {
        if (k == 10 || k == n - 10)
            CHECK(mags[static_cast<std::size_t>(k)] == doctest::Approx(n / 2.0).epsilon(1e-9));
        else
            CHECK(mags[static_cast<std::size_t>(k)] < 1e-9); // DC removed exactly
    }
}

TEST_CASE("zero-padded spectrum rejects bad input") {
    std::vector<double> wrong_len(100, 0.0);
    CHECK_THROWS_AS(zero_padded_spectrum(wrong_len, full_schedule(128), 0.01), ConfigError);
    std::vector<double> with_nan(128, 0.0);
    with_nan[3] = std::nan("");
    CHECK_THROWS_AS(zero_padded_spectrum(with_nan, full_schedule(128), 0.01), NumericError);
}

TEST_CASE("all-zero trace gives an all-zero spectrum") {
    const std::vector<double> zeros(128, 0.0);
    const NusSchedule sched = poisson_gap_schedule(128, 16, 0.5, 5);
    for (const auto& v : zero_padded_spectrum(zeros, sched, 0.01).amplitudes)
        CHECK(std::abs(v) == 0.0);
    for (const auto& v : ist_s_reconstruct(zeros, sched, 0.01).amplitudes)
        CHECK(std::abs(v) == 0.0);
}

TEST_CASE("fully sampled IST-S equals the zero-padded spectrum") {
    const int n = 256;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] =
            1.7 + std::sin(2 * M_PI * 13.4 * i / n) + 0.4 * std::cos(2 * M_PI * 41.0 * i / n);
    const NusSchedule sched = full_schedule(n);
    IstOptions opts;
    opts.iters = 50;
    const Spectrum zp = zero_padded_spectrum(x, sched, 0.01);
    const Spectrum rec = ist_s_reconstruct(x, sched, 0.01, opts);
    CHECK(rec.kind == SpectrumKind::reconstructed);
    double dev = 0;
    for (std::size_t k = 0; k < rec.amplitudes.size(); ++k)
        dev = std::max(dev, std::abs(rec.amplitudes[k] - zp.amplitudes[k]));
    CHECK(dev < 1e-8);
}

TEST_CASE("three undersampled Lorentzians are recovered within a bin") {
    const int n = 2048;
    const double dt = 1.0 / 1024.0; // 1 Hz bins up to 512 Hz
    const double centers[3] = {55.3, 180.9, 333.4};
    const double amps[3] = {1.0, 0.7, 0.5};
    const double widths[3] = {4.0, 6.0, 3.0}; // Lorentzian FWHM in Hz -> exp decay
    std::vector<double> x(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double t = i * dt;
        for (int p = 0; p < 3; ++p)
            x[static_cast<std::size_t>(i)] +=
                amps[p] * std::exp(-M_PI * widths[p] * t) * std::cos(2 * M_PI * centers[p] * t);
    }
    const NusSchedule sched = poisson_gap_schedule(n, 102, 0.5, 17); // 5% sampling
    const Spectrum rec = ist_s_reconstruct(x, sched, dt);
    const PeakReport report = fit_lorentzian_peaks(rec, 5);
    REQUIRE(report.peaks.size() == 3);
    for (int p = 0; p < 3; ++p)
        CHECK(std::abs(report.peaks[static_cast<std::size_t>(p)].f0_hz - centers[p]) <=
              rec.df_hz());
}

TEST_CASE("IST-S output stays data consistent at the sampled points") {
    const int n = 512;
    const double dt = 0.005;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] = 3.0 + std::cos(2 * M_PI * 37.7 * i * dt);
    const NusSchedule sched = poisson_gap_schedule(n, 64, 0.5, 23);
    const Spectrum rec = ist_s_reconstruct(x, sched, dt);

    // invert the reported spectrum and compare at the sampled indices
    const auto time_signal = ifft(rec.amplitudes);
    double mean = 0;
    for (int idx : sched.indices) mean += x[static_cast<std::size_t>(idx)];
    mean /= sched.budget();
    double worst = 0;
    for (int idx : sched.indices) {
        const double measured = x[static_cast<std::size_t>(idx)] - mean;
        const double got = time_signal[static_cast<std::size_t>(idx)].real();
        worst = std::max(worst, std::abs(got - measured) / std::max(1.0, std::abs(measured)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("divergence guard aborts when the threshold grows") {
    const int n = 256;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = std::cos(2 * M_PI * 20.0 * i / n);
    const NusSchedule sched = poisson_gap_schedule(n, 32, 0.5, 3);
    IstOptions opts;
    opts.threshold_decay = 1.2; // growing threshold: the model can never form
    CHECK_THROWS_AS(ist_s_reconstruct(x, sched, 0.01, opts), NumericError);
}

TEST_CASE("IST option validation") {
    const std::vector<double> x(64, 1.0);
    const NusSchedule sched = full_schedule(64);
    IstOptions opts;
    opts.step = 2.5;
    CHECK_THROWS_AS(ist_s_reconstruct(x, sched, 0.01, opts), ConfigError);
    opts = IstOptions{};
    opts.iters = 0;
    CHECK_THROWS_AS(ist_s_reconstruct(x, sched, 0.01, opts), ConfigError);
    opts = IstOptions{};
    opts.oversample = 0;
    CHECK_THROWS_AS(ist_s_reconstruct(x, sched, 0.01, opts), ConfigError);
}

TEST_CASE("an ideal mid-bin Lorentzian is located to a tenth of a bin") {
    const int n = 1024;
    const double dt = 0.001; // ~0.98 Hz bins
    const double df = 1.0 / (n * dt);
    const double f0 = 200.4 * df; // 0.4 bins off grid
    Spectrum s;
    s.kind = SpectrumKind::reconstructed;
    s.freq_hz.resize(n);
    s.amplitudes.resize(n);
    for (int k = 0; k < n; ++k) {
        s.freq_hz[static_cast<std::size_t>(k)] = k * df;
        const double hw = 3.0 * df / 2.0;
        const double f = k * df;
        s.amplitudes[static_cast<std::size_t>(k)] =
            5.0 * hw * hw / ((f - f0) * (f - f0) + hw * hw) + 0.01;
    }
    const PeakReport report = fit_lorentzian_peaks(s, 3);
    REQUIRE(report.peaks.size() == 1);
    CHECK(std::abs(report.peaks[0].f0_hz - f0) < 0.1 * df);
    CHECK(report.peaks[0].uncertainty_hz >= 0.5 * df);
    CHECK(report.peaks[0].converged);
}

TEST_CASE("flat spectra yield an empty report") {
    Spectrum s;
    s.kind = SpectrumKind::zero_padded;
    const int n = 256;
    s.freq_hz.resize(n);
    s.amplitudes.assign(n, cdouble(0.3, 0.0));
    for (int k = 0; k < n; ++k) s.freq_hz[static_cast<std::size_t>(k)] = k * 0.5;
    CHECK(fit_lorentzian_peaks(s, 4).peaks.empty());

    s.amplitudes.assign(n, cdouble(0.0, 0.0));
    CHECK(fit_lorentzian_peaks(s, 4).peaks.empty());
}

TEST_CASE("noise floor helper skips excluded windows") {
    Spectrum s;
    const int n = 128;
    s.freq_hz.resize(n);
    s.amplitudes.assign(n, cdouble(0.1, 0.0));
    for (int k = 0; k < n; ++k) s.freq_hz[static_cast<std::size_t>(k)] = k * 1.0;
    s.amplitudes[30] = cdouble(9.0, 0.0);
    s.amplitudes[50] = cdouble(5.0, 0.0);
    CHECK(noise_floor(s, {30.0, 50.0}, 3.0, 2.0) == doctest::Approx(0.1));
    CHECK(noise_floor(s, {30.0}, 3.0, 2.0) == doctest::Approx(5.0));
}

} // TEST_SUITE
