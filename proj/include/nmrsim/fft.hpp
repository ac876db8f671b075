#pragma once

#include <complex>
#include <vector>

namespace nmrsim {

using cdouble = std::complex<double>;

/// In-house DFT, fully deterministic across runs and thread counts.
///
/// Convention: forward  X[k] = sum_n x[n] exp(-2*pi*i*k*n/N)  (no scaling),
///             inverse  x[n] = (1/N) sum_k X[k] exp(+2*pi*i*k*n/N).
/// Power-of-two lengths use iterative radix-2 Cooley-Tukey; other lengths go
/// through Bluestein's chirp-z transform.
std::vector<cdouble> fft(const std::vector<cdouble>& x);
std::vector<cdouble> ifft(const std::vector<cdouble>& x);

std::vector<cdouble> fft_real(const std::vector<double>& x);

} // namespace nmrsim
