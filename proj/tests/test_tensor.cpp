#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "koda/rng.hpp"
#include "koda/tape.hpp"
#include "support/oracles.hpp"

using namespace koda;
using koda::testing::finite_diff_grads;
using koda::testing::max_rel_err;

namespace {

Array rand_array(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  return Array::random_uniform(std::move(shape), lo, hi, rng);
}

}  // namespace

TEST_CASE("matmul identity") {
  Tape t;
  Var I = t.constant(Array::from({2, 2}, {1, 0, 0, 1}));
  Var x = t.constant(Array::from({2, 1}, {3, 4}));
  Var y = ops::matmul(I, x);
  CHECK(t.val(y)[0] == doctest::Approx(3.0));
  CHECK(t.val(y)[1] == doctest::Approx(4.0));
}

TEST_CASE("tanh at origin") {
  Tape t;
  Var y = ops::tanh(t.constant(Array::from({1}, {0.0})));
  CHECK(t.val(y)[0] == 0.0);
}

TEST_CASE("mean over axis then sum") {
  Tape t;
  Var x = t.constant(Array::from({2, 2}, {1, 2, 3, 4}));
  Var m = ops::mean_axis(x, 0);
  CHECK(t.val(m).shape() == Shape{2});
  CHECK(t.val(m)[0] == doctest::Approx(2.0));
  CHECK(t.val(m)[1] == doctest::Approx(3.0));
  Var s = ops::sum(m);
  CHECK(t.val(s)[0] == doctest::Approx(5.0));
}

TEST_CASE("backward of sum of squares") {
  Tape t;
  Var w = t.leaf(Array::from({1}, {3.0}), true);
  Var loss = ops::sum(ops::square(w));
  auto grads = t.backward(loss);
  CHECK(grads.at(w.id)[0] == doctest::Approx(6.0));
}

TEST_CASE("least squares gradient at w=0") {
  Rng rng(11);
  Array x = rand_array({8}, rng);
  Array y = rand_array({8}, rng);
  Tape t;
  Var w = t.leaf(Array::scalar(0.0), true);
  Var pred = ops::mul(t.constant(x), w);  // scalar broadcast
  Var loss = ops::mse(pred, t.constant(y));
  auto grads = t.backward(loss);
  double expect = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) expect += x[i] * y[i];
  expect *= -2.0 / static_cast<double>(x.size());
  CHECK(grads.at(w.id)[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("non-scalar and detached losses are rejected") {
  Tape t;
  Var w = t.leaf(Array::from({2}, {1.0, 2.0}), true);
  CHECK_THROWS_AS((void)t.backward(ops::square(w)), ShapeError);
  Var c = t.constant(Array::scalar(1.0));
  CHECK_THROWS_AS((void)t.backward(ops::sum(ops::square(c))), ValueError);
}

TEST_CASE("shape mismatch reports both shapes") {
  Tape t;
  Var a = t.constant(Array::zeros({2, 3}));
  Var b = t.constant(Array::zeros({4, 5}));
  try {
    (void)ops::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
}

TEST_CASE("unreachable trainable leaf gets a zero gradient") {
  Tape t;
  Var used = t.leaf(Array::scalar(2.0), true);
  Var unused = t.leaf(Array::from({3}, {1, 2, 3}), true);
  auto grads = t.backward(ops::sum(ops::square(used)));
  CHECK(grads.at(unused.id).shape() == Shape{3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(grads.at(unused.id)[i] == 0.0);
}

// Central finite differences at rel. tol 1e-4 for every primitive, each probed
// through a random linear functional of its output.
TEST_CASE("gradient checks for every primitive") {
  Rng rng(17);

  auto check_unary = [&](const char* name, std::function<Var(Var)> op,
                         std::function<double(const Array&)> dummy = nullptr) {
    (void)dummy;
    for (int rep = 0; rep < 5; ++rep) {
      Array x = rand_array({3, 4}, rng);
      Array c = rand_array({3, 4}, rng);
      Tape t;
      Var vx = t.leaf(x, true);
      Var y = op(vx);
      Array cot = c;
      if (!t.val(y).same_shape(cot)) cot = rand_array(t.val(y).shape(), rng);
      const Array cot_fixed = cot;
      Var loss = ops::sum(ops::mul(y, t.constant(cot_fixed)));
      auto grads = t.backward(loss);
      auto fd = finite_diff_grads(
          [&](const std::vector<Array>& in) {
            Tape tt;
            Var yy = op(tt.leaf(in[0], false));
            double acc = 0.0;
            for (std::size_t i = 0; i < tt.val(yy).size(); ++i) {
              acc += tt.val(yy)[i] * cot_fixed[i];
            }
            return acc;
          },
          {x});
      CHECK_MESSAGE(max_rel_err(grads.at(vx.id), fd[0]) < 1e-4, name);
    }
  };

  check_unary("tanh", [](Var v) { return ops::tanh(v); });
  check_unary("sigmoid", [](Var v) { return ops::sigmoid(v); });
  check_unary("relu", [](Var v) { return ops::relu(v); });
  check_unary("square", [](Var v) { return ops::square(v); });
  check_unary("scale", [](Var v) { return ops::scale(v, -1.7); });
  check_unary("sum", [](Var v) { return ops::sum(v); });
  check_unary("sum_axis0", [](Var v) { return ops::sum_axis(v, 0); });
  check_unary("sum_axis1", [](Var v) { return ops::sum_axis(v, 1); });
  check_unary("mean", [](Var v) { return ops::mean(v); });
  check_unary("mean_axis", [](Var v) { return ops::mean_axis(v, 1); });
  check_unary("reshape", [](Var v) { return ops::reshape(v, {4, 3}); });
  check_unary("transpose", [](Var v) { return ops::transpose(v); });
  check_unary("slice", [](Var v) { return ops::slice(v, 1, 1, 2); });
  check_unary("pad", [](Var v) { return ops::pad_zeros(v, 0, 1, 2); });
  check_unary("expand", [](Var v) { return ops::expand_axis(v, 1, 3); });

  // Binary primitives, including the broadcast paths.
  struct BinCase {
    const char* name;
    Shape sa, sb;
    std::function<Var(Var, Var)> op;
  };
  const std::vector<BinCase> cases = {
      {"add", {3, 4}, {3, 4}, [](Var a, Var b) { return ops::add(a, b); }},
      {"add bcast", {3, 4}, {4}, [](Var a, Var b) { return ops::add(a, b); }},
      {"add scalar", {3, 4}, {1}, [](Var a, Var b) { return ops::add(a, b); }},
      {"mul", {3, 4}, {3, 4}, [](Var a, Var b) { return ops::mul(a, b); }},
      {"mul bcast", {3, 4}, {4}, [](Var a, Var b) { return ops::mul(a, b); }},
      {"sub", {3, 4}, {3, 4}, [](Var a, Var b) { return ops::sub(a, b); }},
      {"matmul", {3, 4}, {4, 2}, [](Var a, Var b) { return ops::matmul(a, b); }},
      {"concat", {3, 4}, {3, 4},
       [](Var a, Var b) { return ops::concat({a, b}, 1); }},
      {"mse", {3, 4}, {3, 4}, [](Var a, Var b) { return ops::mse(a, b); }},
  };
  for (const auto& bc : cases) {
    for (int rep = 0; rep < 5; ++rep) {
      Array a = rand_array(bc.sa, rng);
      Array b = rand_array(bc.sb, rng);
      Tape t;
      Var va = t.leaf(a, true);
      Var vb = t.leaf(b, true);
      Var y = bc.op(va, vb);
      Array cot = rand_array(t.val(y).shape(), rng);
      Var loss = ops::sum(ops::mul(y, t.constant(cot)));
      auto grads = t.backward(loss);
      auto fd = finite_diff_grads(
          [&](const std::vector<Array>& in) {
            Tape tt;
            Var yy = bc.op(tt.leaf(in[0], false), tt.leaf(in[1], false));
            double acc = 0.0;
            for (std::size_t i = 0; i < tt.val(yy).size(); ++i) acc += tt.val(yy)[i] * cot[i];
            return acc;
          },
          {a, b});
      CHECK_MESSAGE(max_rel_err(grads.at(va.id), fd[0]) < 1e-4, bc.name);
      CHECK_MESSAGE(max_rel_err(grads.at(vb.id), fd[1]) < 1e-4, bc.name);
    }
  }
}

TEST_CASE("linearity of backward") {
  Rng rng(23);
  Array x = rand_array({4}, rng);
  const double a = 1.7, b = -0.6;
  auto grad_of = [&](std::function<Var(Tape&, Var)> f) {
    Tape t;
    Var vx = t.leaf(x, true);
    auto g = t.backward(f(t, vx));
    return g.at(vx.id);
  };
  Array gf = grad_of([](Tape&, Var v) { return ops::sum(ops::square(v)); });
  Array gg = grad_of([](Tape&, Var v) { return ops::sum(ops::tanh(v)); });
  Array gmix = grad_of([&](Tape&, Var v) {
    return ops::add(ops::scale(ops::sum(ops::square(v)), a), ops::scale(ops::sum(ops::tanh(v)), b));
  });
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(gmix[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-12));
  }
}

TEST_CASE("vjp of a linear map is A^T v") {
  Rng rng(29);
  Array A = rand_array({3, 2}, rng);
  Array x = rand_array({1, 3}, rng);
  Array v = rand_array({1, 2}, rng);
  Array got = vjp(
      [&](Tape& t, Var in) { return ops::matmul(in, t.constant(A)); }, x, v);
  for (std::size_t i = 0; i < 3; ++i) {
    double expect = 0.0;
    for (std::size_t j = 0; j < 2; ++j) expect += A[i * 2 + j] * v[j];
    CHECK(got[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("vjp of elementwise tanh") {
  Rng rng(31);
  Array x = rand_array({5}, rng);
  Array v = rand_array({5}, rng);
  Array got = vjp([](Tape&, Var in) { return ops::tanh(in); }, x, v);
  for (std::size_t i = 0; i < 5; ++i) {
    const double th = std::tanh(x[i]);
    CHECK(got[i] == doctest::Approx(v[i] * (1.0 - th * th)).epsilon(1e-12));
  }
}

TEST_CASE("vjp of a random MLP matches finite-difference Jacobian") {
  Rng rng(37);
  Array W1 = rand_array({3, 8}, rng, -0.7, 0.7);
  Array b1 = rand_array({8}, rng, -0.3, 0.3);
  Array W2 = rand_array({8, 2}, rng, -0.7, 0.7);
  Array b2 = rand_array({2}, rng, -0.3, 0.3);
  auto mlp = [&](Tape& t, Var in) {
    Var h = ops::tanh(ops::add(ops::matmul(in, t.constant(W1)), t.constant(b1)));
    return ops::add(ops::matmul(h, t.constant(W2)), t.constant(b2));
  };
  Array x = rand_array({1, 3}, rng);

  // Explicit Jacobian, column by column, from forward finite differences.
  auto eval = [&](const Array& p) {
    Tape t;
    return t.val(mlp(t, t.constant(p))).clone();
  };
  const double eps = 1e-6;
  double J[2][3];
  for (std::size_t i = 0; i < 3; ++i) {
    Array hi = x.clone(), lo = x.clone();
    hi.mut()[i] += eps;
    lo.mut()[i] -= eps;
    Array yh = eval(hi), yl = eval(lo);
    for (std::size_t o = 0; o < 2; ++o) J[o][i] = (yh[o] - yl[o]) / (2 * eps);
  }
  for (std::size_t o = 0; o < 2; ++o) {
    Array e = Array::zeros({1, 2});
    e.mut()[o] = 1.0;
    Array row = vjp(mlp, x, e);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(koda::testing::rel_err(row[i], J[o][i]) < 1e-4);
    }
  }
}

TEST_CASE("vjp agrees with backward through the composite") {
  Rng rng(41);
  Array x = rand_array({1, 4}, rng);
  Array W = rand_array({4, 4}, rng, -0.5, 0.5);
  Array target = rand_array({1, 4}, rng);
  // dLoss/dOutput of loss = mse(f(x), target), with f = tanh(xW).
  Tape t;
  Var vx = t.leaf(x, true);
  Var out = ops::tanh(ops::matmul(vx, t.constant(W)));
  Var loss = ops::mse(out, t.constant(target));
  auto grads = t.backward(loss);

  Array dldo = Array::zeros({1, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    dldo.mut()[i] = 2.0 / 4.0 * (t.val(out)[i] - target[i]);
  }
  Array via_vjp = vjp(
      [&](Tape& tt, Var in) { return ops::tanh(ops::matmul(in, tt.constant(W))); }, x, dldo);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(via_vjp[i] == doctest::Approx(grads.at(vx.id)[i]).epsilon(1e-10));
  }
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(43);
  Array x = rand_array({6, 6}, rng);
  Array W = rand_array({6, 6}, rng);
  auto run = [&]() {
    Tape t;
    Var y = ops::sum(ops::tanh(ops::matmul(t.constant(x), t.constant(W))));
    return t.val(y)[0];
  };
  const double a = run();
  const double b = run();
  CHECK(a == b);  // bit-identical
}

// grad_vars output stays on the tape, so gradients can be differentiated
// again; the correction step's training path relies on this.
TEST_CASE("second-order gradients through grad_vars") {
  Rng rng(47);
  Array x = rand_array({3}, rng, -1.0, 1.0);
  Tape t;
  Var vx = t.leaf(x, true);
  Var y = ops::sum(ops::square(ops::tanh(vx)));
  Var seed = t.constant(Array::scalar(1.0));
  Var g = t.grad_vars(y, seed, {vx})[0];
  Var outer = ops::sum(ops::square(g));
  auto grads = t.backward(outer);

  auto fd = finite_diff_grads(
      [&](const std::vector<Array>& in) {
        Tape tt;
        Var vv = tt.leaf(in[0], true);
        Var yy = ops::sum(ops::square(ops::tanh(vv)));
        Var ss = tt.constant(Array::scalar(1.0));
        Var gg = tt.grad_vars(yy, ss, {vv})[0];
        return tt.val(ops::sum(ops::square(gg)))[0];
      },
      {x});
  CHECK(max_rel_err(grads.at(vx.id), fd[0]) < 1e-4);
}
