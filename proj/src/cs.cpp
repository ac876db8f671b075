#include "nmrsim/cs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct UniformSource {
    std::mt19937_64 rng;
    explicit UniformSource(std::uint64_t seed) : rng(seed) {}
    double next() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
};

// Knuth's product-of-uniforms sampler. The product underflows for large
// means, so big rates are drawn as sums of independent small-rate pieces,
// which is still exactly Poisson.
int poisson_draw_small(UniformSource& u, double mean) {
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= u.next();
    } while (p > limit);
    return k - 1;
}

int poisson_draw(UniformSource& u, double mean) {
    if (mean <= 0.0) return 0;
    int total = 0;
    while (mean > 30.0) {
        total += poisson_draw_small(u, 30.0);
        mean -= 30.0;
    }
    return total + poisson_draw_small(u, mean);
}

// Draws a schedule for a fixed rate; returns indices (possibly wrong count).
std::vector<int> draw_schedule(int n_s, double alpha, double lambda, std::uint64_t stream_seed) {
    UniformSource u(stream_seed);
    std::vector<int> idx;
    long long m = 0;
    while (m < n_s) {
        idx.push_back(static_cast<int>(m));
        const double mean = lambda * std::sin(alpha * kPi * static_cast<double>(m) / n_s);
        m += 1 + poisson_draw(u, mean);
    }
    return idx;
}

std::vector<cdouble> soft_threshold(const std::vector<cdouble>& spec, double tau) {
    std::vector<cdouble> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double mag = std::abs(spec[i]);
        out[i] = mag > tau ? spec[i] * ((mag - tau) / mag) : cdouble(0.0, 0.0);
    }
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Simplex4 {
    // Nelder-Mead over 4 parameters. Returns (params, converged).
    static std::pair<std::array<double, 4>, bool> minimize(
        const std::function<double(const std::array<double, 4>&)>& f,
        std::array<double, 4> start, const std::array<double, 4>& scale, int max_iters) {
        constexpr int n = 4;
        std::array<std::array<double, 4>, n + 1> pts;
        std::array<double, n + 1> vals;
        pts[0] = start;
        for (int i = 0; i < n; ++i) {
            pts[static_cast<std::size_t>(i) + 1] = start;
            pts[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(i)] += scale[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i <= n; ++i) vals[static_cast<std::size_t>(i)] = f(pts[static_cast<std::size_t>(i)]);

        const auto order = [&] {
            std::array<int, n + 1> perm{};
            for (int i = 0; i <= n; ++i) perm[static_cast<std::size_t>(i)] = i;
            std::sort(perm.begin(), perm.end(),
                      [&](int a, int b) { return vals[static_cast<std::size_t>(a)] < vals[static_cast<std::size_t>(b)]; });
            std::array<std::array<double, 4>, n + 1> p2;
            std::array<double, n + 1> v2;
            for (int i = 0; i <= n; ++i) {
                p2[static_cast<std::size_t>(i)] = pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
                v2[static_cast<std::size_t>(i)] = vals[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
            }
            pts = p2;
            vals = v2;
        };

        bool converged = false;
        for (int iter = 0; iter < max_iters; ++iter) {
            order();
            if (std::abs(vals[n] - vals[0]) <= 1e-12 * (1.0 + std::abs(vals[0]))) {
                converged = true;
                break;
            }
            std::array<double, 4> centroid{};
            for (int i = 0; i < n; ++i)
                for (int d = 0; d < 4; ++d)
                    centroid[static_cast<std::size_t>(d)] += pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] / n;

            const auto blend = [&](double coef) {
                std::array<double, 4> p;
                for (int d = 0; d < 4; ++d)
                    p[static_cast<std::size_t>(d)] = centroid[static_cast<std::size_t>(d)] +
                                                     coef * (centroid[static_cast<std::size_t>(d)] -
                                                             pts[n][static_cast<std::size_t>(d)]);
                return p;
            };

            const auto refl = blend(1.0);
            const double frefl = f(refl);
            if (frefl < vals[0]) {
                const auto expd = blend(2.0);
                const double fexp = f(expd);
                if (fexp < frefl) {
                    pts[n] = expd;
                    vals[n] = fexp;
                } else {
                    pts[n] = refl;
                    vals[n] = frefl;
                }
            } else if (frefl < vals[n - 1]) {
                pts[n] = refl;
                vals[n] = frefl;
            } else {
                const auto contr = blend(-0.5);
                const double fcon = f(contr);
                if (fcon < vals[n]) {
                    pts[n] = contr;
                    vals[n] = fcon;
                } else {
                    for (int i = 1; i <= n; ++i) {
                        for (int d = 0; d < 4; ++d)
                            pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] =
                                0.5 * (pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] +
                                       pts[0][static_cast<std::size_t>(d)]);
                        vals[static_cast<std::size_t>(i)] = f(pts[static_cast<std::size_t>(i)]);
                    }
                }
            }
        }
        order();
        return {pts[0], converged};
    }
};

} // namespace

void NusSchedule::validate() const {
    if (grid_size < 1) throw ConfigError("schedule: empty grid");
    if (indices.empty()) throw ConfigError("schedule: no samples");
    if (indices.front() != 0) throw ConfigError("schedule: index 0 missing");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= grid_size) throw ConfigError("schedule: index out of range");
        if (i > 0 && indices[i] <= indices[i - 1]) throw ConfigError("schedule: indices not increasing");
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("schedule: bad alpha");
}

NusSchedule poisson_gap_schedule(int n_s, int budget, double alpha, std::uint64_t seed) {
    if (n_s < 1) throw ConfigError("poisson_gap_schedule: grid size must be positive");
    if (budget < 1 || budget > n_s)
        throw ConfigError("poisson_gap_schedule: budget must satisfy 0 < budget <= N_s");

    NusSchedule sched;
    sched.grid_size = n_s;
    sched.alpha = alpha;
    sched.seed = seed;

    if (budget == n_s) {
        sched.indices.resize(static_cast<std::size_t>(n_s));
        for (int i = 0; i < n_s; ++i) sched.indices[static_cast<std::size_t>(i)] = i;
        return sched;
    }

    constexpr int kMaxAttempts = 256;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const std::uint64_t stream =
            splitmix64(seed ^ (0xA5A5A5A5A5A5A5A5ull + static_cast<std::uint64_t>(attempt)));

        const auto count_at = [&](double lambda) {
            return static_cast<int>(draw_schedule(n_s, alpha, lambda, stream).size());
        };

        // grow hi until the draw undershoots the budget
        double lo = 0.0;
        double hi = 2.0 * (static_cast<double>(n_s) / budget);
        bool bracketed = false;
        for (int g = 0; g < 64; ++g) {
            const int c = count_at(hi);
            if (c == budget) {
                sched.indices = draw_schedule(n_s, alpha, hi, stream);
                return sched;
            }
            if (c < budget) {
                bracketed = true;
                break;
            }
            hi *= 2.0;
        }
        if (!bracketed) continue;

        for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            const int c = count_at(mid);
            if (c == budget) {
                sched.indices = draw_schedule(n_s, alpha, mid, stream);
                return sched;
            }
            (c > budget ? lo : hi) = mid;
        }
    }
    throw NumericError("poisson_gap_schedule: could not match budget exactly");
}

void write_schedule(std::ostream& out, const NusSchedule& sched) {
    out << "# nmrsim schedule\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "# n_s=%d budget=%d alpha=%.17g seed=%llu\n", sched.grid_size,
                  sched.budget(), sched.alpha, static_cast<unsigned long long>(sched.seed));
    out << buf;
    for (int idx : sched.indices) out << idx << "\n";
}

NusSchedule read_schedule(std::istream& in) {
    NusSchedule sched;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto grab = [&](const std::string& key) -> std::string {
                const auto pos = line.find(key + "=");
                if (pos == std::string::npos) return {};
                const auto start = pos + key.size() + 1;
                auto end = line.find(' ', start);
                if (end == std::string::npos) end = line.size();
                return line.substr(start, end - start);
            };
            if (auto v = grab("n_s"); !v.empty()) sched.grid_size = std::stoi(v);
            if (auto v = grab("alpha"); !v.empty()) sched.alpha = std::stod(v);
            if (auto v = grab("seed"); !v.empty()) sched.seed = std::stoull(v);
            continue;
        }
        sched.indices.push_back(std::stoi(line));
    }
    sched.validate();
    return sched;
}

NusSchedule load_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schedule file: " + path);
    return read_schedule(in);
}

double Spectrum::df_hz() const {
    if (freq_hz.size() < 2) throw NumericError("Spectrum: grid too small");
    return freq_hz[1] - freq_hz[0];
}

std::vector<double> Spectrum::magnitudes() const {
    std::vector<double> m(amplitudes.size());
    for (std::size_t i = 0; i < amplitudes.size(); ++i) m[i] = std::abs(amplitudes[i]);
    return m;
}

namespace {

Spectrum make_spectrum(std::vector<cdouble> amps, double dt_s, SpectrumKind kind) {
    Spectrum s;
    const std::size_t n = amps.size();
    s.amplitudes = std::move(amps);
    s.kind = kind;
    s.freq_hz.resize(n);
    const double df = 1.0 / (static_cast<double>(n) * dt_s);
    for (std::size_t k = 0; k < n; ++k) s.freq_hz[k] = static_cast<double>(k) * df;
    return s;
}

// Sample-mean-removed, zero-filled time signal.
std::vector<double> masked_signal(const std::vector<double>& grid_values, const NusSchedule& sched) {
    sched.validate();
    if (grid_values.size() != static_cast<std::size_t>(sched.grid_size))
        throw ConfigError("trace length does not match schedule grid");
    double mean = 0.0;
    double scale = 0.0;
    for (int idx : sched.indices) {
        const double v = grid_values[static_cast<std::size_t>(idx)];
        if (!std::isfinite(v)) throw NumericError("trace value not finite at index " + std::to_string(idx));
        mean += v;
        scale = std::max(scale, std::abs(v));
    }
    mean /= static_cast<double>(sched.indices.size());
    std::vector<double> x(grid_values.size(), 0.0);
    double residual = 0.0;
    for (int idx : sched.indices) {
        const double v = grid_values[static_cast<std::size_t>(idx)] - mean;
        x[static_cast<std::size_t>(idx)] = v;
        residual = std::max(residual, std::abs(v));
    }
    // a constant trace leaves only rounding noise behind; treat it as zero
    if (residual <= 1e-12 * scale)
        std::fill(x.begin(), x.end(), 0.0);
    return x;
}

} // namespace

Spectrum zero_padded_spectrum(const std::vector<double>& grid_values, const NusSchedule& sched,
                              double dt_s) {
    if (!(dt_s > 0.0)) throw ConfigError("zero_padded_spectrum: dt must be positive");
    return make_spectrum(fft_real(masked_signal(grid_values, sched)), dt_s, SpectrumKind::zero_padded);
}

Spectrum ist_s_reconstruct(const std::vector<double>& grid_values, const NusSchedule& sched,
                           double dt_s, const IstOptions& opts) {
    if (!(dt_s > 0.0)) throw ConfigError("ist_s_reconstruct: dt must be positive");
    if (opts.iters < 1) throw ConfigError("ist_s_reconstruct: iters must be >= 1");
    if (!(opts.threshold_decay > 0.0)) throw ConfigError("ist_s_reconstruct: bad threshold decay");

    if (!(opts.step > 0.0 && opts.step < 2.0))
        throw ConfigError("ist_s_reconstruct: step must lie in (0,2)");
    if (opts.oversample < 1 || opts.oversample > 16)
        throw ConfigError("ist_s_reconstruct: oversample must lie in 1..16");

    const std::vector<double> x0 = masked_signal(grid_values, sched);
    const std::size_t n = x0.size();
    const std::size_t nm = n * static_cast<std::size_t>(opts.oversample);

    double measured_norm2 = 0.0;
    for (int idx : sched.indices)
        measured_norm2 += x0[static_cast<std::size_t>(idx)] * x0[static_cast<std::size_t>(idx)];
    const double measured_norm = std::sqrt(measured_norm2);
    if (measured_norm == 0.0)
        return make_spectrum(fft_real(x0), dt_s, SpectrumKind::reconstructed);

    // transform of the first n time samples against the oversampled dictionary
    std::vector<cdouble> pad(nm, cdouble(0.0, 0.0));
    const auto fine_transform = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < nm; ++i) pad[i] = i < n ? cdouble(v[i], 0.0) : cdouble(0.0, 0.0);
        return fft(pad);
    };

    // model: retained components on the fine grid; x: measured residual,
    // which lives only on the sampled indices (unsampled points stay zero, so
    // the total estimate model + residual always carries the measured values)
    std::vector<cdouble> model(nm, cdouble(0.0, 0.0));
    std::vector<double> x = x0;

    double tau0 = 0.0;
    for (const auto& c : fine_transform(x0)) tau0 = std::max(tau0, std::abs(c));

    double prev_residual = std::numeric_limits<double>::infinity();
    int growing = 0;
    for (int k = 0; k < opts.iters && tau0 > 0.0; ++k) {
        const double tau =
            tau0 * std::max(std::pow(opts.threshold_decay, k), opts.tau_floor_frac);

        // accumulate the residual transform into the model, then re-threshold
        // the whole model so spurious components must be re-earned each pass
        const std::vector<cdouble> grad = fine_transform(x);
        for (std::size_t i = 0; i < nm; ++i) model[i] += opts.step * grad[i];
        model = soft_threshold(model, tau);

        // restore measured values: residual = data - model at sampled points
        const std::vector<cdouble> y = ifft(model);
        double res2 = 0.0;
        for (int idx : sched.indices) {
            auto& v = x[static_cast<std::size_t>(idx)];
            v = x0[static_cast<std::size_t>(idx)] - y[static_cast<std::size_t>(idx)].real();
            res2 += v * v;
        }
        const double residual = std::sqrt(res2) / measured_norm;

        // Divergence guard: strict growth always counts; a stall with the
        // residual still at O(1) counts too (nothing is being extracted).
        const bool grew = residual > prev_residual * (1.0 + 1e-12);
        const bool stalled_high = residual >= prev_residual * (1.0 - 1e-12) && residual > 0.5;
        if ((grew && residual > 1e-6) || stalled_high) {
            if (++growing >= 10)
                throw NumericError("ist_s_reconstruct: residual stopped improving for 10 "
                                   "consecutive iterations (" +
                                   std::to_string(residual) + " after " + std::to_string(k) +
                                   " iterations); reconstruction diverged");
        } else {
            growing = 0;
        }
        prev_residual = residual;
        if (residual < opts.residual_tol) break;
    }

    // Reconstructed time signal over the original grid: model-filled, with
    // the measured values restored at the sampled indices, so the output is
    // exactly data-consistent and reduces to the zero-padded spectrum under
    // full sampling.
    const std::vector<cdouble> filled = ifft(model);
    std::vector<double> recon(n);
    for (std::size_t i = 0; i < n; ++i) recon[i] = filled[i].real();
    for (int idx : sched.indices) recon[static_cast<std::size_t>(idx)] = x0[static_cast<std::size_t>(idx)];
    return make_spectrum(fft_real(recon), dt_s, SpectrumKind::reconstructed);
}

PeakReport fit_lorentzian_peaks(const Spectrum& s, int max_peaks) {
    PeakFitOptions opts;
    opts.max_peaks = max_peaks;
    return fit_lorentzian_peaks(s, opts);
}

PeakReport fit_lorentzian_peaks(const Spectrum& s, const PeakFitOptions& opts) {
    const std::vector<double> mags = s.magnitudes();
    for (double m : mags)
        if (!std::isfinite(m)) throw NumericError("fit_lorentzian_peaks: non-finite spectrum");
    const std::size_t n = mags.size();
    const std::size_t half = n / 2;
    const double df = s.df_hz();
    const std::size_t lo = static_cast<std::size_t>(std::max(opts.dc_exclude_bins, 1));

    PeakReport report;
    if (half <= lo + 1) return report;

    std::vector<double> window(mags.begin() + static_cast<std::ptrdiff_t>(lo),
                               mags.begin() + static_cast<std::ptrdiff_t>(half));
    const double med = median_of(window);
    const double top = *std::max_element(window.begin(), window.end());
    const double threshold = std::max(opts.median_mult * med, opts.max_frac * top);
    if (top <= threshold) return report;

    std::vector<std::size_t> candidates;
    for (std::size_t k = lo + 1; k + 1 < half; ++k)
        if (mags[k] > threshold && mags[k] > mags[k - 1] && mags[k] > mags[k + 1])
            candidates.push_back(k);
    std::sort(candidates.begin(), candidates.end(),
              [&](std::size_t a, std::size_t b) { return mags[a] > mags[b]; });

    std::vector<std::size_t> accepted;
    for (std::size_t k : candidates) {
        bool shadowed = false;
        for (std::size_t a : accepted)
            if (std::llabs(static_cast<long long>(k) - static_cast<long long>(a)) <=
                opts.fit_halfwidth_bins) {
                shadowed = true;
                break;
            }
        if (!shadowed) accepted.push_back(k);
        if (static_cast<int>(accepted.size()) >= opts.max_peaks) break;
    }

    for (std::size_t k : accepted) {
        const std::size_t w_lo = k > lo + static_cast<std::size_t>(opts.fit_halfwidth_bins)
                                     ? k - static_cast<std::size_t>(opts.fit_halfwidth_bins)
                                     : lo;
        const std::size_t w_hi = std::min(half - 1, k + static_cast<std::size_t>(opts.fit_halfwidth_bins));

        double base = mags[w_lo];
        for (std::size_t i = w_lo; i <= w_hi; ++i) base = std::min(base, mags[i]);

        // params: f0, amplitude, fwhm, baseline
        const auto objective = [&](const std::array<double, 4>& p) {
            const double f0 = p[0], amp = p[1], fwhm = p[2], b = p[3];
            if (fwhm <= 0.0 || amp < 0.0) return std::numeric_limits<double>::max();
            const double hw = 0.5 * fwhm;
            double l1 = 0.0;
            for (std::size_t i = w_lo; i <= w_hi; ++i) {
                const double f = s.freq_hz[i];
                const double model = amp * hw * hw / ((f - f0) * (f - f0) + hw * hw) + b;
                l1 += std::abs(model - mags[i]);
            }
            return l1;
        };

        const std::array<double, 4> start{s.freq_hz[k], mags[k] - base, 2.0 * df, base};
        const std::array<double, 4> scale{0.5 * df, 0.2 * std::max(mags[k] - base, 1e-300), df,
                                          0.1 * std::max(base, 1e-300) + 1e-12 * mags[k]};
        const auto [params, converged] = Simplex4::minimize(objective, start, scale, opts.max_simplex_iters);

        Peak peak;
        peak.f0_hz = params[0];
        peak.amplitude = params[1];
        peak.hwhm_hz = 0.5 * std::abs(params[2]);
        peak.uncertainty_hz = std::max(peak.hwhm_hz, 0.5 * df);
        peak.converged = converged;
        report.peaks.push_back(peak);
    }

    std::sort(report.peaks.begin(), report.peaks.end(),
              [](const Peak& a, const Peak& b) { return a.f0_hz < b.f0_hz; });
    return report;
}

double noise_floor(const Spectrum& s, const std::vector<double>& peak_freqs_hz,
                   double exclusion_hz, double min_freq_hz) {
    const std::vector<double> mags = s.magnitudes();
    const std::size_t half = mags.size() / 2;
    double floor = 0.0;
    for (std::size_t k = 0; k <= half; ++k) {
        const double f = s.freq_hz[k];
        if (f < min_freq_hz) continue;
        bool near_peak = false;
        for (double pf : peak_freqs_hz)
            if (std::abs(f - pf) < exclusion_hz) {
                near_peak = true;
                break;
            }
        if (!near_peak) floor = std::max(floor, mags[k]);
    }
    return floor;
}

} // namespace nmrsim
