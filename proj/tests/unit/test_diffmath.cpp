// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "../common/test_util.hpp"

using namespace motrack;
using namespace motrack::diffmath;
using motrack::testutil::fd_check;

namespace {

using T64 = Tensor<double>;
using V64 = Var<double>;
using Tape64 = Tape<double>;
using Builder = std::function<V64(Tape64&, std::vector<V64>&)>;

T64 randn(int r, int c, Rng& rng, double sd = 1.0) { return T64::randn(r, c, rng, sd); }

}  // namespace

TEST_CASE("matmul identity and hand-computed product") {
  Tape64 t(false);
  auto i2 = t.constant(T64::from_rows({{1, 0}, {0, 1}}));
  auto m = matmul(i2, i2);
  CHECK(m.val()(0, 0) == 1.0);
  CHECK(m.val()(0, 1) == 0.0);
  CHECK(m.val()(1, 1) == 1.0);

  auto a = t.constant(T64::from_rows({{1, 2}, {3, 4}}));
  auto b = t.constant(T64::from_rows({{1}, {1}}));
  auto c = matmul(a, b);
  CHECK(c.val()(0, 0) == doctest::Approx(3.0));
  CHECK(c.val()(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul shape mismatch throws") {
  Tape64 t(false);
  auto a = t.constant(T64(2, 3));
  auto b = t.constant(T64(2, 2));
  CHECK_THROWS(matmul(a, b));
}

TEST_CASE("matmul gradient matches finite differences (3x4 * 4x2)") {
  Rng rng(7);
  auto a = randn(3, 4, rng);
  auto b = randn(4, 2, rng);
  const double err = fd_check<double>({a, b}, [](Tape64&, std::vector<V64>& v) {
    return sum(matmul(v[0], v[1]));
  });
  CHECK(err <= 1e-6);
}

TEST_CASE("matmul transpose flags against explicit products") {
  Rng rng(11);
  auto a = randn(3, 4, rng);
  auto b = randn(2, 4, rng);  // used as b^T: 4x2
  Tape64 t(false);
  auto av = t.constant(a), bv = t.constant(b);
  auto nt = matmul(av, bv, false, true);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double acc = 0;
      for (int l = 0; l < 4; ++l) acc += a(i, l) * b(j, l);
      CHECK(nt.val()(i, j) == doctest::Approx(acc));
    }
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto x = ta ? randn(4, 3, rng) : randn(3, 4, rng);
      auto y = tb ? randn(2, 4, rng) : randn(4, 2, rng);
      const double err = fd_check<double>({x, y}, [ta, tb](Tape64&, std::vector<V64>& v) {
        return sum(matmul(v[0], v[1], ta, tb));
      });
      CHECK(err <= 1e-6);
    }
}

TEST_CASE("softmax symmetry, stability, normalization") {
  Tape64 t(false);
  auto x = t.constant(T64::from_rows({{0, 0}}));
  auto y = softmax_rows(x);
  CHECK(y.val()(0, 0) == doctest::Approx(0.5));
  CHECK(y.val()(0, 1) == doctest::Approx(0.5));

  auto big = t.constant(T64::from_rows({{1000, 0}}));
  auto yb = softmax_rows(big);
  CHECK(std::fabs(yb.val()(0, 0) - 1.0) <= 1e-12);
  CHECK(std::fabs(yb.val()(0, 1) - 0.0) <= 1e-12);
  CHECK(yb.val().finite());

  Rng rng(3);
  auto r = randn(4, 6, rng, 3.0);
  Tape64 t2(false);
  auto yr = softmax_rows(t2.constant(r));
  for (int i = 0; i < 4; ++i) {
    double s = 0;
    for (int j = 0; j < 6; ++j) s += yr.val()(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax gradient vs finite differences on random length-5 input") {
  Rng rng(5);
  auto x = randn(1, 5, rng);
  auto w = randn(1, 5, rng);  // project to scalar with fixed weights
  const double err = fd_check<double>({x}, [&w](Tape64& t, std::vector<V64>& v) {
    return sum(mul(softmax_rows(v[0]), t.constant(w)));
  });
  CHECK(err <= 1e-6);
}

TEST_CASE("rmsnorm unit vector, zero vector, scale invariance") {
  Tape64 t(false);
  auto ones = t.constant(T64::full(1, 8, 1.0));
  auto gain = t.constant(T64::full(1, 8, 1.0));
  auto y = rmsnorm_rows(ones, gain, 1e-12);
  for (int j = 0; j < 8; ++j) CHECK(y.val()(0, j) == doctest::Approx(1.0).epsilon(1e-9));

  auto zero = t.constant(T64(1, 8));
  auto yz = rmsnorm_rows(zero, gain, 1e-6);
  for (int j = 0; j < 8; ++j) CHECK(yz.val()(0, j) == 0.0);

  Rng rng(9);
  auto x = randn(1, 8, rng);
  auto xs = x;
  for (std::size_t i = 0; i < xs.numel(); ++i) xs[i] *= 3.7;
  auto y1 = rmsnorm_rows(t.constant(x), gain, 0.0);
  auto y2 = rmsnorm_rows(t.constant(xs), gain, 0.0);
  for (int j = 0; j < 8; ++j) CHECK(std::fabs(y1.val()(0, j) - y2.val()(0, j)) <= 1e-10);
}

TEST_CASE("rmsnorm gradient") {
  Rng rng(13);
  auto x = randn(2, 6, rng);
  auto g = randn(1, 6, rng);
  auto w = randn(2, 6, rng);
  const double err = fd_check<double>({x, g}, [&w](Tape64& t, std::vector<V64>& v) {
    return sum(mul(rmsnorm_rows(v[0], v[1], 1e-5), t.constant(w)));
  });
  CHECK(err <= 1e-6);
}

TEST_CASE("rope identity at position zero and norm preservation") {
  Rng rng(17);
  auto x = randn(4, 8, rng);
  Tape64 t(false);
  auto y0 = rope_rows(t.constant(x), {0});
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y0.val()[i] == doctest::Approx(x[i]).epsilon(1e-15));

  auto yr = rope_rows(t.constant(x), {0, 3, 11, 40});
  for (int i = 0; i < 4; ++i) {
    double n0 = 0, n1 = 0;
    for (int j = 0; j < 8; ++j) {
      n0 += x(i, j) * x(i, j);
      n1 += yr.val()(i, j) * yr.val()(i, j);
    }
    CHECK(std::fabs(std::sqrt(n0) - std::sqrt(n1)) <= 1e-10);
  }
}

TEST_CASE("rope relative property: dot depends only on position offset") {
  Rng rng(19);
  auto q = randn(1, 16, rng);
  auto k = randn(1, 16, rng);
  Tape64 t(false);
  auto qv = t.constant(q), kv = t.constant(k);
  for (std::int64_t p : {0L, 2L, 9L}) {
    for (std::int64_t pp : {1L, 5L, 14L}) {
      for (std::int64_t s : {0L, 3L, 27L, 101L}) {
        auto d0 = matmul(rope_rows(qv, {p}), rope_rows(kv, {pp}), false, true).val()(0, 0);
        auto d1 = matmul(rope_rows(qv, {p + s}), rope_rows(kv, {pp + s}), false, true).val()(0, 0);
        CHECK(std::fabs(d0 - d1) <= 1e-8);
      }
    }
  }
}

TEST_CASE("rope rejects odd head dim and negative positions") {
  Tape64 t(false);
  auto odd = t.constant(T64(1, 7));
  CHECK_THROWS(rope_rows(odd, {0}));
  auto ok = t.constant(T64(1, 8));
  CHECK_THROWS(rope_rows(ok, {-1}));
}

TEST_CASE("activation values") {
  Tape64 t(false);
  auto z = t.constant(T64::from_rows({{0.0}}));
  CHECK(sigmoid(z).val()(0, 0) == doctest::Approx(0.5));
  CHECK(silu(z).val()(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("every primitive gradient matches central finite differences") {
  // 20 random inputs per op, h = 1e-5, 64-bit, max rel err <= 1e-4.
  Rng rng(23);
  // Deterministic shape-dependent projection to a scalar, so the graph builder
  // is a pure function of its inputs and interior gradients are exercised.
  auto scalarize = [](Tape64& t, const V64& v) {
    T64 w(v.val().rows(), v.val().cols());
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = 0.5 * std::sin(0.7 * (13 * i + 5 * j) + 1.0) + 0.1;
    return sum(mul(v, t.constant(w)));
  };

  std::vector<std::pair<const char*, double>> results;
  auto run = [&](const char* name, auto make_inputs, auto build) {
    double worst = 0;
    for (int it = 0; it < 20; ++it) {
      auto inputs = make_inputs();
      worst = std::max(worst, fd_check<double>(inputs, build));
    }
    results.emplace_back(name, worst);
    CHECK_MESSAGE(worst <= 1e-4, name);
  };

  run("add", [&] { return std::vector<T64>{randn(2, 3, rng), randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, add(v[0], v[1])); });
  run("sub", [&] { return std::vector<T64>{randn(2, 3, rng), randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, sub(v[0], v[1])); });
  run("mul", [&] { return std::vector<T64>{randn(2, 3, rng), randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, mul(v[0], v[1])); });
  run("min_elem", [&] { return std::vector<T64>{randn(2, 3, rng), randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, min_elem(v[0], v[1])); });
  run("div", [&] {
        auto a = randn(2, 3, rng);
        auto b = randn(2, 3, rng);
        for (std::size_t i = 0; i < b.numel(); ++i) b[i] = (b[i] < 0 ? -1 : 1) * (std::fabs(b[i]) + 0.5);
        return std::vector<T64>{a, b};
      },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, div(v[0], v[1])); });
  run("abs", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, abs_op(v[0])); });
  run("matmul", [&] { return std::vector<T64>{randn(3, 4, rng), randn(4, 2, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, matmul(v[0], v[1])); });
  run("scale", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, scale(v[0], 2.5)); });
  run("add_const", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, add_const(v[0], 1.5)); });
  run("sigmoid", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, sigmoid(v[0])); });
  run("silu", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, silu(v[0])); });
  run("relu", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, relu(v[0])); });
  run("exp", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, exp_op(v[0])); });
  run("log", [&] {
        auto x = randn(2, 3, rng);
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = std::fabs(x[i]) + 0.5;
        return std::vector<T64>{x};
      },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, log_op(v[0])); });
  run("square", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, square(v[0])); });
  run("sqrt", [&] {
        auto x = randn(2, 3, rng);
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = std::fabs(x[i]) + 0.5;
        return std::vector<T64>{x};
      },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, sqrt_op(v[0])); });
  run("clamp", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, clamp(v[0], -0.5, 0.5)); });
  run("add_bias", [&] { return std::vector<T64>{randn(3, 4, rng), randn(1, 4, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, add_bias(v[0], v[1])); });
  run("mul_rowvec", [&] { return std::vector<T64>{randn(3, 4, rng), randn(1, 4, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, mul_rowvec(v[0], v[1])); });
  run("mul_scalar", [&] { return std::vector<T64>{randn(3, 4, rng), randn(1, 1, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, mul_scalar(v[0], v[1])); });
  run("broadcast_col", [&] { return std::vector<T64>{randn(3, 1, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, broadcast_col(v[0], 5)); });
  run("row", [&] { return std::vector<T64>{randn(3, 4, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, row(v[0], 1)); });
  run("slice_cols", [&] { return std::vector<T64>{randn(3, 6, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, slice_cols(v[0], 1, 4)); });
  run("select_cols", [&] { return std::vector<T64>{randn(2, 6, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, select_cols(v[0], {4, 0, 2})); });
  run("concat_cols", [&] { return std::vector<T64>{randn(2, 3, rng), randn(2, 2, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) {
        std::vector<V64> parts{v[0], v[1]};
        return scalarize(t, concat_cols<double>(parts));
      });
  run("stack_rows", [&] { return std::vector<T64>{randn(1, 3, rng), randn(2, 3, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) {
        std::vector<V64> parts{v[0], v[1]};
        return scalarize(t, stack_rows<double>(parts));
      });
  run("softmax", [&] { return std::vector<T64>{randn(2, 5, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, softmax_rows(v[0])); });
  run("rmsnorm", [&] { return std::vector<T64>{randn(2, 6, rng), randn(1, 6, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, rmsnorm_rows(v[0], v[1], 1e-5)); });
  run("rope", [&] { return std::vector<T64>{randn(3, 8, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, rope_rows(v[0], {0, 5, 13})); });
  run("sum", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64&, std::vector<V64>& v) { return sum(v[0]); });
  run("mean", [&] { return std::vector<T64>{randn(2, 3, rng)}; },
      [&](Tape64&, std::vector<V64>& v) { return mean(v[0]); });
  run("sum_cols", [&] { return std::vector<T64>{randn(3, 4, rng)}; },
      [&](Tape64& t, std::vector<V64>& v) { return scalarize(t, sum_cols(v[0])); });

  // masked softmax (mask is data, not a differentiable input)
  {
    double worst = 0;
    for (int it = 0; it < 20; ++it) {
      auto x = randn(3, 3, rng);
      auto mask = T64::from_rows({{1, 0, 0}, {1, 1, 0}, {1, 1, 1}});
      worst = std::max(worst, fd_check<double>({x}, [&](Tape64& t, std::vector<V64>& v) {
        auto w = t.constant(T64::full(3, 3, 0.7));
        return sum(mul(softmax_rows(v[0], &mask), w));
      }));
    }
    CHECK_MESSAGE(worst <= 1e-4, "softmax_masked");
  }
}

TEST_CASE("forward determinism: identical inputs give bit-identical outputs") {
  Rng rng1(42), rng2(42);
  auto run_once = [](Rng& rng) {
    auto a = randn(4, 4, rng);
    auto b = randn(4, 4, rng);
    Tape64 t(false);
    auto y = softmax_rows(matmul(silu(t.constant(a)), t.constant(b)));
    return y.val();
  };
  auto y1 = run_once(rng1);
  auto y2 = run_once(rng2);
  for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("NaN poison is detected by the tape finite-check mode") {
  Tape64 t(true, true);
  auto x = T64::from_rows({{1.0, 2.0}});
  x(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(t.leaf(x));

  // poison introduced mid-graph: log of a negative number
  Tape64 t2(true, true);
  auto neg = t2.constant(T64::from_rows({{-1.0}}));
  CHECK_THROWS(log_op(neg));

  // with checks off the same graph completes (documented opt-out)
  Tape64 t3(true, false);
  auto neg2 = t3.constant(T64::from_rows({{-1.0}}));
  CHECK_NOTHROW(log_op(neg2));
}

TEST_CASE("backward visits each op once: grad of shared subexpression accumulates") {
  // y = sum(x) + sum(x) -> dy/dx = 2 exactly
  Tape64 t;
  auto x = t.leaf(T64::full(2, 2, 1.5));
  auto y = add(sum(x), sum(x));
  t.backward(y);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 2.0);
}

TEST_CASE("tape reports error for backward on non-scalar or non-recording tape") {
  Tape64 t;
  auto x = t.leaf(T64(2, 2));
  CHECK_THROWS(t.backward(x));
  Tape64 t2(false);
  auto y = t2.leaf(T64(1, 1));
  CHECK_THROWS(t2.backward(y));
}
