#include "nmrsim/fft.hpp"

#include <cmath>
#include <cstddef>

#include "nmrsim/errors.hpp"

namespace nmrsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2, in place. sign = -1 forward, +1 inverse (unscaled).
void fft_pow2(std::vector<cdouble>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * kPi / static_cast<double>(len);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cdouble u = a[i + k];
                const cdouble v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein: arbitrary-length DFT via a power-of-two convolution.
std::vector<cdouble> bluestein(const std::vector<cdouble>& x, int sign) {
    const std::size_t n = x.size();
    std::size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;

    std::vector<cdouble> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small for large k
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cdouble(std::cos(ang), std::sin(ang));
    }

    std::vector<cdouble> a(m, cdouble(0, 0)), b(m, cdouble(0, 0));
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

    fft_pow2(a, -1);
    fft_pow2(b, -1);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_pow2(a, +1);

    std::vector<cdouble> out(n);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
    return out;
}

std::vector<cdouble> transform(const std::vector<cdouble>& x, int sign) {
    if (x.empty()) throw NumericError("fft: empty input");
    if (is_pow2(x.size())) {
        std::vector<cdouble> a = x;
        fft_pow2(a, sign);
        return a;
    }
    return bluestein(x, sign);
}

} // namespace

std::vector<cdouble> fft(const std::vector<cdouble>& x) { return transform(x, -1); }

std::vector<cdouble> ifft(const std::vector<cdouble>& x) {
    std::vector<cdouble> out = transform(x, +1);
    const double scale = 1.0 / static_cast<double>(x.size());
    for (auto& v : out) v *= scale;
    return out;
}

std::vector<cdouble> fft_real(const std::vector<double>& x) {
    std::vector<cdouble> tmp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = cdouble(x[i], 0.0);
    return fft(tmp);
}

} // namespace nmrsim
