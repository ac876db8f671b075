#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmrsim/fft.hpp"

namespace nmrsim {

/// Non-uniform sampling schedule on a uniform grid of N_s points.
struct NusSchedule {
    int grid_size = 0;
    std::vector<int> indices; // strictly increasing, starts at 0
    double alpha = 0.5;
    std::uint64_t seed = 0;

    int budget() const { return static_cast<int>(indices.size()); }
    void validate() const;
};

/// Sine-weighted Poisson gap schedule: the gap after index m is drawn from a
/// Poisson distribution with mean lambda*sin(alpha*pi*m/N_s). lambda is tuned
/// by bisection until the realized count equals `budget` exactly, re-drawing
/// with an incremented sub-seed when the bisection cannot hit it.
/// Deterministic in (seed, n_s, budget, alpha).
NusSchedule poisson_gap_schedule(int n_s, int budget, double alpha, std::uint64_t seed);

void write_schedule(std::ostream& out, const NusSchedule& sched);
NusSchedule read_schedule(std::istream& in);
NusSchedule load_schedule(const std::string& path);

enum class SpectrumKind { zero_padded, reconstructed };

struct Spectrum {
    std::vector<double> freq_hz; // k/(N_s*dt), k = 0..N_s-1
    std::vector<cdouble> amplitudes;
    SpectrumKind kind = SpectrumKind::zero_padded;

    double df_hz() const;
    std::vector<double> magnitudes() const;
};

/// DFT of the trace with unsampled points zeroed; the mean over the sampled
/// values is removed first. Convention: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N).
Spectrum zero_padded_spectrum(const std::vector<double>& grid_values, const NusSchedule& sched,
                              double dt_s);

struct IstOptions {
    int iters = 2000;
    double threshold_decay = 0.995;
    double residual_tol = 1e-8; // relative, at sampled points
    double step = 1.3;          // gradient step; must stay below 2
    // The threshold stops decaying at tau_floor_frac * max|initial spectrum|
    // and the remaining iterations run stationary there, which lets
    // components the data does not support shrink back out of the model.
    double tau_floor_frac = 1e-4;
    // The working dictionary is an `oversample`-times finer frequency grid;
    // lines rarely sit on exact grid bins and the finer atoms keep their
    // representation compressible. The returned spectrum is always on the
    // N_s grid.
    int oversample = 4;
};

/// Iterative soft thresholding, retain-and-subtract variant: each pass
/// transforms the current time-domain estimate against an oversampled
/// frequency dictionary, accumulates the retained components into the
/// spectral model, soft-thresholds the model at
/// tau_k = decay^k * max|initial spectrum|, inverse-transforms it and
/// restores the measured values at the sampled indices (the residual keeps
/// support there only). The returned spectrum is the N_s-grid transform of
/// the final model-filled time signal with the measured values restored, so
/// it is exactly data-consistent at every sampled index and reduces to the
/// zero-padded spectrum under full sampling. A residual that grows for 10
/// consecutive iterations aborts with a diagnostic.
Spectrum ist_s_reconstruct(const std::vector<double>& grid_values, const NusSchedule& sched,
                           double dt_s, const IstOptions& opts = {});

struct Peak {
    double f0_hz = 0.0;
    double amplitude = 0.0;
    double hwhm_hz = 0.0;
    double uncertainty_hz = 0.0;
    bool converged = true;
};

struct PeakReport {
    std::vector<Peak> peaks; // ascending in f0
};

struct PeakFitOptions {
    int max_peaks = 8;
    double median_mult = 5.0; // detection threshold: max of median_mult*median
    double max_frac = 0.02;   // and max_frac * spectrum max
    int fit_halfwidth_bins = 20;
    int dc_exclude_bins = 12;
    int max_simplex_iters = 600;
};

/// Local maxima of |S| over (DC zone, Nyquist], each fitted by a Lorentzian
/// A*(w/2)^2/((f-f0)^2+(w/2)^2)+b minimizing the l1 residual with a
/// Nelder-Mead simplex in a +-fit_halfwidth_bins window. Uncertainty is
/// max(fitted half-width, half the grid spacing).
PeakReport fit_lorentzian_peaks(const Spectrum& s, int max_peaks);
PeakReport fit_lorentzian_peaks(const Spectrum& s, const PeakFitOptions& opts);

/// Largest magnitude in [min_freq_hz, Nyquist] at least exclusion_hz away
/// from every frequency in `peak_freqs_hz`.
double noise_floor(const Spectrum& s, const std::vector<double>& peak_freqs_hz,
                   double exclusion_hz, double min_freq_hz);

} // namespace nmrsim
