#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace koda::fft {

using cdouble = std::complex<double>;

// In-place forward DFT, any length >= 1 (radix-2 when the length is a power
// of two, Bluestein chirp-z otherwise).
void fft_inplace(std::vector<cdouble>& a);

// Inverse DFT with the 1/N convention, so ifft(fft(x)) == x.
void ifft_inplace(std::vector<cdouble>& a);

std::vector<cdouble> fft(std::vector<cdouble> a);
std::vector<cdouble> ifft(std::vector<cdouble> a);

// Spectrum of a real signal (full length-n complex output).
std::vector<cdouble> fft_real(const double* x, std::size_t n);

}  // namespace koda::fft
