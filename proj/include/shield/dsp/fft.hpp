#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "shield/common.hpp"

namespace shield::dsp {

using cplx = std::complex<double>;

// Iterative radix-2 FFT with precomputed twiddles and bit-reversal table.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddle_(n / 2), rev_(n) {
    require(n >= 2 && (n & (n - 1)) == 0, "FFT size must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k)
      twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  // In place. inverse=true computes the unnormalized e^{+i...} transform.
  void transform(std::span<cplx> a, bool inverse = false) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          cplx w = twiddle_[j * step];
          if (inverse) w = std::conj(w);
          const cplx u = a[start + j];
          const cplx v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<cplx> twiddle_;
  std::vector<std::size_t> rev_;
};

}  // namespace shield::dsp
