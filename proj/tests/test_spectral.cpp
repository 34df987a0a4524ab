#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "koda/rng.hpp"
#include "koda/spectral.hpp"
#include "support/oracles.hpp"

using namespace koda;

namespace {

Series sine_series(std::size_t T, double cycles_per_tau, std::size_t tau, double amp = 1.0,
                   double phase = 0.0) {
  Array v = Array::zeros({T, 1});
  for (std::size_t t = 0; t < T; ++t) {
    v.mut()[t] = amp * std::sin(2.0 * M_PI * cycles_per_tau * static_cast<double>(t) /
                                    static_cast<double>(tau) +
                                phase);
  }
  Series s;
  s.values = std::move(v);
  s.channel_names = {"ch0"};
  return s;
}

SpectralFilter manual_filter(std::size_t tau, std::vector<std::uint8_t> mask) {
  SpectralFilter f;
  f.tau = tau;
  f.channels = 1;
  f.shared = true;
  f.masks = {std::move(mask)};
  return f;
}

double rel_split_err(const DisentangledWindow& d) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.source.size(); ++i) {
    const double r = d.dominant[i] + d.residual[i] - d.source[i];
    num += r * r;
    den += d.source[i] * d.source[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-30);
}

}  // namespace

TEST_CASE("constant series keeps only DC mass") {
  Series s;
  s.values = Array::full({64, 1}, 3.0);
  s.channel_names = {"c"};
  auto f = fit_filter(s, 16, 0.2);
  CHECK(f.masks[0][0] == 1);  // DC kept
  Array window = Array::full({16, 1}, 3.0);
  auto d = disentangle(window, f);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(d.dominant[i] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(d.residual[i]) < 1e-12);
  }
}

TEST_CASE("pure sinusoid at bin 3 dominates the mask") {
  const std::size_t tau = 32;
  Series s = sine_series(320, 3.0, tau);
  auto f = fit_filter(s, tau, 2.0 / static_cast<double>(tau / 2 + 1) + 1e-9);
  CHECK(f.masks[0][0] == 1);
  CHECK(f.masks[0][3] == 1);
}

TEST_CASE("white noise mask bin count follows the ranking rule") {
  const std::size_t tau = 64;  // 33 one-sided bins
  Rng rng(5);
  Array v = Array::random_normal({1024, 1}, 1.0, rng);
  Series s;
  s.values = v;
  s.channel_names = {"n"};
  auto f = fit_filter(s, tau, 0.25);
  std::size_t kept = 0;
  for (auto m : f.masks[0]) kept += m;
  CHECK(kept == 9);  // ceil(0.25 * 33), DC included in the count
  CHECK(f.masks[0][0] == 1);
}

TEST_CASE("all-pass and all-stop masks") {
  Rng rng(6);
  Array window = Array::random_uniform({24, 2}, -1, 1, rng);
  auto full = manual_filter(24, std::vector<std::uint8_t>(13, 1));
  auto d1 = disentangle(window, full);
  for (std::size_t i = 0; i < window.size(); ++i) {
    CHECK(d1.dominant[i] == doctest::Approx(window[i]).epsilon(1e-12));
    CHECK(std::abs(d1.residual[i]) < 1e-12);
  }
  auto empty = manual_filter(24, std::vector<std::uint8_t>(13, 0));
  auto d2 = disentangle(window, empty);
  for (std::size_t i = 0; i < window.size(); ++i) {
    CHECK(std::abs(d2.dominant[i]) < 1e-12);
    CHECK(d2.residual[i] == doctest::Approx(window[i]).epsilon(1e-12));
  }
}

TEST_CASE("two-sinusoid separation matches analytic components") {
  const std::size_t tau = 48;
  Array bin3 = Array::zeros({tau, 1});
  Array bin9 = Array::zeros({tau, 1});
  for (std::size_t t = 0; t < tau; ++t) {
    const double x = static_cast<double>(t) / static_cast<double>(tau);
    bin3.mut()[t] = 0.8 * std::cos(2.0 * M_PI * 3.0 * x + 0.3);
    bin9.mut()[t] = 1.3 * std::sin(2.0 * M_PI * 9.0 * x - 0.8);
  }
  Array window = Array::zeros({tau, 1});
  for (std::size_t t = 0; t < tau; ++t) window.mut()[t] = bin3[t] + bin9[t];
  std::vector<std::uint8_t> mask(tau / 2 + 1, 0);
  mask[0] = mask[3] = 1;
  auto d = disentangle(window, manual_filter(tau, mask));
  for (std::size_t t = 0; t < tau; ++t) {
    CHECK(std::abs(d.dominant[t] - bin3[t]) < 1e-6);
    CHECK(std::abs(d.residual[t] - bin9[t]) < 1e-6);
  }
}

TEST_CASE("exact additive split over random windows and filters") {
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t tau = (rep % 3 == 0) ? 24 : (rep % 3 == 1 ? 48 : 96);
    const std::size_t C = (rep % 2) ? 1 : 7;
    std::vector<std::uint8_t> mask(tau / 2 + 1);
    for (auto& m : mask) m = rng.uniform() < 0.4 ? 1 : 0;
    SpectralFilter f;
    f.tau = tau;
    f.channels = C;
    f.shared = true;
    f.masks = {mask};
    Array window = Array::random_uniform({tau, C}, -3, 3, rng);
    auto d = disentangle(window, f);
    CHECK(rel_split_err(d) < 1e-9);
  }
}

TEST_CASE("idempotence of the dominant projection") {
  Rng rng(12);
  const std::size_t tau = 24;
  std::vector<std::uint8_t> mask(tau / 2 + 1, 0);
  mask[0] = mask[2] = mask[5] = 1;
  auto f = manual_filter(tau, mask);
  Array window = Array::random_uniform({tau, 1}, -2, 2, rng);
  auto d = disentangle(window, f);
  auto d2 = disentangle(d.dominant, f);
  for (std::size_t i = 0; i < tau; ++i) {
    CHECK(d2.dominant[i] == doctest::Approx(d.dominant[i]).epsilon(1e-9));
    CHECK(std::abs(d2.residual[i]) < 1e-9);
  }
}

TEST_CASE("filter save/load round trip") {
  Series s = sine_series(200, 3.0, 24);
  auto f = fit_filter(s, 24, 0.3);
  const std::string path = "/tmp/koda_filter_test.json";
  f.save(path);
  auto g = SpectralFilter::load(path);
  CHECK(g.tau == f.tau);
  CHECK(g.channels == f.channels);
  CHECK(g.shared == f.shared);
  CHECK(g.masks == f.masks);
  std::remove(path.c_str());
}

TEST_CASE("errors: short series, bad fraction, length mismatch") {
  Series s = sine_series(10, 1.0, 24);
  CHECK_THROWS_AS((void)fit_filter(s, 24, 0.3), ValueError);
  Series ok = sine_series(100, 1.0, 24);
  CHECK_THROWS_AS((void)fit_filter(ok, 24, 0.0), ValueError);
  CHECK_THROWS_AS((void)fit_filter(ok, 24, 1.0), ValueError);
  auto f = fit_filter(ok, 24, 0.3);
  CHECK_THROWS_AS((void)disentangle(Array::zeros({16, 1}), f), ShapeError);
}

TEST_CASE("all-zero series keeps DC only with a warning") {
  Series s;
  s.values = Array::zeros({100, 1});
  s.channel_names = {"z"};
  auto f = fit_filter(s, 16, 0.5);
  CHECK(f.dc_only_warning);
  std::size_t kept = 0;
  for (auto m : f.masks[0]) kept += m;
  CHECK(kept == 1);
  CHECK(f.masks[0][0] == 1);
}

TEST_CASE("spectral_project tape op: linearity and gradient") {
  Rng rng(14);
  const std::size_t tau = 24;
  std::vector<std::uint8_t> mask(tau / 2 + 1, 0);
  mask[0] = mask[3] = mask[7] = 1;
  auto f = manual_filter(tau, mask);
  std::vector<std::size_t> ch = {0, 0};

  Array x = Array::random_uniform({2, tau}, -1, 1, rng);
  Array cot = Array::random_uniform({2, tau}, -1, 1, rng);

  Tape t;
  Var vx = t.leaf(x, true);
  Var y = spectral_project(vx, f, ch, true);
  Var loss = ops::sum(ops::mul(y, t.constant(cot)));
  auto grads = t.backward(loss);
  auto fd = koda::testing::finite_diff_grads(
      [&](const std::vector<Array>& in) {
        Array proj = project_rows(in[0], f, ch, true);
        double acc = 0.0;
        for (std::size_t i = 0; i < proj.size(); ++i) acc += proj[i] * cot[i];
        return acc;
      },
      {x});
  CHECK(koda::testing::max_rel_err(grads.at(vx.id), fd[0]) < 1e-4);

  // dominant + residual reassembles the input rows
  Var dom = spectral_project(vx, f, ch, true);
  Var res = spectral_project(vx, f, ch, false);
  Var sum = ops::add(dom, res);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(t.val(sum)[i] == doctest::Approx(x[i]).epsilon(1e-10));
  }
}
