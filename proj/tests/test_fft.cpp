#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "koda/fft.hpp"
#include "koda/rng.hpp"
#include "support/oracles.hpp"

using namespace koda;
using fft::cdouble;

TEST_CASE("unit impulse has a flat spectrum") {
  std::vector<cdouble> x = {{1, 0}, {0, 0}, {0, 0}, {0, 0}};
  auto y = fft::fft(x);
  for (const auto& v : y) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("constant signal is DC only") {
  const double c = 2.5;
  const std::size_t n = 12;
  std::vector<cdouble> x(n, cdouble{c, 0});
  auto y = fft::fft(x);
  CHECK(std::abs(y[0] - cdouble{c * n, 0}) < 1e-10);
  for (std::size_t k = 1; k < n; ++k) CHECK(std::abs(y[k]) < 1e-10);
}

TEST_CASE("fft matches the naive DFT oracle") {
  Rng rng(7);
  for (std::size_t n : {2u, 3u, 5u, 8u, 17u, 24u, 48u, 96u}) {
    std::vector<cdouble> x(n);
    for (auto& v : x) v = cdouble{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto fast = fft::fft(x);
    auto slow = koda::testing::naive_dft(x);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
    }
  }
}

TEST_CASE("ifft inverts fft") {
  Rng rng(9);
  for (std::size_t n : {1u, 2u, 3u, 24u, 48u, 96u, 101u}) {
    std::vector<cdouble> x(n);
    for (auto& v : x) v = cdouble{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto back = fft::ifft(fft::fft(x));
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(back[k] - x[k]) < 1e-10);
    }
  }
}

TEST_CASE("empty signal is rejected") {
  std::vector<cdouble> x;
  CHECK_THROWS_AS(fft::fft_inplace(x), ValueError);
}
