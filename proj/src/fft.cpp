#include "koda/fft.hpp"

#include <cmath>

#include "koda/common.hpp"

namespace koda::fft {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey; twiddles from std::polar per index to keep
// error near machine precision for the small lengths used here.
void fft_pow2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const std::size_t half = len >> 1;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cdouble w = std::polar(1.0, ang * static_cast<double>(k));
        const cdouble u = a[i + k];
        const cdouble v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Bluestein chirp-z transform for arbitrary lengths; reduces to a circular
// convolution carried out with power-of-two FFTs.
void fft_bluestein(std::vector<cdouble>& x, bool inverse) {
  const std::size_t n = x.size();
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<cdouble> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle small and the twiddle accurate.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = (inverse ? kTwoPi : -kTwoPi) * 0.5 * static_cast<double>(k2) /
                       static_cast<double>(n);
    chirp[k] = std::polar(1.0, ang);
  }
  std::vector<cdouble> a(m, cdouble{0.0, 0.0});
  std::vector<cdouble> b(m, cdouble{0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_pow2(a, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * inv_m * chirp[k];
}

}  // namespace

void fft_inplace(std::vector<cdouble>& a) {
  if (a.empty()) throw ValueError("fft: empty signal");
  if (a.size() == 1) return;
  if (is_pow2(a.size())) {
    fft_pow2(a, false);
  } else {
    fft_bluestein(a, false);
  }
}

void ifft_inplace(std::vector<cdouble>& a) {
  if (a.empty()) throw ValueError("ifft: empty signal");
  const std::size_t n = a.size();
  if (n == 1) return;
  if (is_pow2(n)) {
    fft_pow2(a, true);
  } else {
    fft_bluestein(a, true);
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : a) v *= inv;
}

std::vector<cdouble> fft(std::vector<cdouble> a) {
  fft_inplace(a);
  return a;
}

std::vector<cdouble> ifft(std::vector<cdouble> a) {
  ifft_inplace(a);
  return a;
}

std::vector<cdouble> fft_real(const double* x, std::size_t n) {
  std::vector<cdouble> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = cdouble{x[i], 0.0};
  fft_inplace(a);
  return a;
}

}  // namespace koda::fft
