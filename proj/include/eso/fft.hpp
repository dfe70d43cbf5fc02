#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace eso {

/**
 * Iterative radix-2 complex FFT with precomputed twiddles.
 *
 * Forward convention:  X_k = sum_n x_n e^{-2*pi*i*k*n/N}
 * Inverse convention:  x_n = (1/N) sum_k X_k e^{+2*pi*i*k*n/N}
 *
 * N must be a power of two. Twiddles come from std::polar per index, keeping
 * round-trip error near machine epsilon for the grid sizes used here.
 */
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::invalid_argument("Fft: size must be a power of two >= 2");
        rev_.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            rev_[i] = r;
        }
        tw_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k)
            tw_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                         static_cast<double>(n));
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& a) const { transform(a, false); }

    void inverse(std::vector<std::complex<double>>& a) const {
        transform(a, true);
        const double scale = 1.0 / static_cast<double>(n_);
        for (auto& v : a) v *= scale;
    }

private:
    void transform(std::vector<std::complex<double>>& a, bool conj) const {
        if (a.size() != n_) throw std::invalid_argument("Fft: buffer size mismatch");
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t stride = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t j = 0; j < len / 2; ++j) {
                    std::complex<double> w = tw_[j * stride];
                    if (conj) w = std::conj(w);
                    const std::complex<double> u = a[i + j];
                    const std::complex<double> v = a[i + j + len / 2] * w;
                    a[i + j] = u + v;
                    a[i + j + len / 2] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<std::complex<double>> tw_;
};

}  // namespace eso
