#pragma once

// Test-only oracles, independent of the library's fast paths: a naive DFT and
// a central finite-difference gradient checker.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "koda/array.hpp"

namespace koda::testing {

inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>{std::cos(ang), std::sin(ang)};
    }
    out[k] = acc;
  }
  return out;
}

// f evaluates a scalar from a set of input arrays (no tape involved).
using ScalarFn = std::function<double(const std::vector<Array>&)>;

inline std::vector<Array> finite_diff_grads(const ScalarFn& f, std::vector<Array> inputs,
                                            double eps = 1e-5) {
  std::vector<Array> grads;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Array g = Array::zeros(inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k].mut()[i] = orig + eps;
      const double hi = f(inputs);
      inputs[k].mut()[i] = orig - eps;
      const double lo = f(inputs);
      inputs[k].mut()[i] = orig;
      g.mut()[i] = (hi - lo) / (2.0 * eps);
    }
    grads.push_back(g);
  }
  return grads;
}

// Relative error with the absolute floor the gradient suite uses.
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
}

inline double max_rel_err(const Array& analytic, const Array& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, rel_err(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace koda::testing
