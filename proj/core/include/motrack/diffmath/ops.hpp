// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "motrack/diffmath/tape.hpp"

namespace motrack::diffmath {

// ---------------------------------------------------------------------------
// gemm helper: C (+)= op(A) * op(B), row-major, flags select transposition.
// ---------------------------------------------------------------------------
template <std::floating_point S>
void gemm_into(const Tensor<S>& a, bool ta, const Tensor<S>& b, bool tb, Tensor<S>& c) {
  const int m = ta ? a.cols() : a.rows();
  const int k = ta ? a.rows() : a.cols();
  const int kb = tb ? b.cols() : b.rows();
  const int n = tb ? b.rows() : b.cols();
  if (k != kb) fail("gemm: inner dimensions mismatch");
  if (c.rows() != m || c.cols() != n) fail("gemm: output shape mismatch");
  const S* A = a.data();
  const S* B = b.data();
  S* C = c.data();
  const int lda = a.cols(), ldb = b.cols(), ldc = n;
  if (!ta && !tb) {
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const S av = A[i * lda + l];
        if (av == S{0}) continue;
        const S* brow = B + l * ldb;
        S* crow = C + i * ldc;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  } else if (!ta && tb) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        S acc{0};
        const S* arow = A + i * lda;
        const S* brow = B + j * ldb;
        for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
        C[i * ldc + j] += acc;
      }
  } else if (ta && !tb) {
    for (int l = 0; l < k; ++l)
      for (int i = 0; i < m; ++i) {
        const S av = A[l * lda + i];
        if (av == S{0}) continue;
        const S* brow = B + l * ldb;
        S* crow = C + i * ldc;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        S acc{0};
        for (int l = 0; l < k; ++l) acc += A[l * lda + i] * B[j * ldb + l];
        C[i * ldc + j] += acc;
      }
  }
}

template <std::floating_point S>
Tensor<S> gemm(const Tensor<S>& a, bool ta, const Tensor<S>& b, bool tb) {
  const int m = ta ? a.cols() : a.rows();
  const int n = tb ? b.rows() : b.cols();
  Tensor<S> c(m, n);
  gemm_into(a, ta, b, tb, c);
  return c;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------
template <std::floating_point S>
Var<S> matmul(const Var<S>& a, const Var<S>& b, bool ta = false, bool tb = false) {
  Tape<S>& t = *a.tape;
  Var<S> out = t.alloc(gemm(a.val(), ta, b.val(), tb), t.needs_grad(a.id) || t.needs_grad(b.id), "matmul");
  const int ai = a.id, bi = b.id, oi = out.id;
  t.record([ai, bi, oi, ta, tb](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dc = tp.grad_of(oi);
    const Tensor<S>& av = tp.value(ai);
    const Tensor<S>& bv = tp.value(bi);
    if (tp.needs_grad(ai)) {
      if (!ta && !tb) gemm_into(dc, false, bv, true, tp.grad(ai));
      else if (!ta && tb) gemm_into(dc, false, bv, false, tp.grad(ai));
      else if (ta && !tb) gemm_into(bv, false, dc, true, tp.grad(ai));
      else gemm_into(bv, true, dc, true, tp.grad(ai));
    }
    if (tp.needs_grad(bi)) {
      if (!ta && !tb) gemm_into(av, true, dc, false, tp.grad(bi));
      else if (!ta && tb) gemm_into(dc, true, av, false, tp.grad(bi));
      else if (ta && !tb) gemm_into(av, false, dc, false, tp.grad(bi));
      else gemm_into(dc, true, av, true, tp.grad(bi));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// elementwise binaries (same shape)
// ---------------------------------------------------------------------------
namespace detail {

template <std::floating_point S, typename FwdFn, typename BwdFn>
Var<S> binary_same_shape(const Var<S>& a, const Var<S>& b, const char* name, FwdFn fwd, BwdFn bwd) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  const Tensor<S>& bv = b.val();
  if (!av.same_shape(bv)) fail(std::string(name) + ": shape mismatch");
  Tensor<S> y(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.numel(); ++i) y[i] = fwd(av[i], bv[i]);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id) || t.needs_grad(b.id), name);
  const int ai = a.id, bi = b.id, oi = out.id;
  t.record([ai, bi, oi, bwd](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    const Tensor<S>& av2 = tp.value(ai);
    const Tensor<S>& bv2 = tp.value(bi);
    const bool ga = tp.needs_grad(ai), gb = tp.needs_grad(bi);
    Tensor<S>* da = ga ? &tp.grad(ai) : nullptr;
    Tensor<S>* db = gb ? &tp.grad(bi) : nullptr;
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      auto [fa, fb] = bwd(av2[i], bv2[i]);
      if (da) (*da)[i] += dy[i] * fa;
      if (db) (*db)[i] += dy[i] * fb;
    }
  });
  return out;
}

template <std::floating_point S, typename FwdFn, typename BwdFn>
Var<S> unary(const Var<S>& a, const char* name, FwdFn fwd, BwdFn bwd) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  Tensor<S> y(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.numel(); ++i) y[i] = fwd(av[i]);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), name);
  const int ai = a.id, oi = out.id;
  t.record([ai, oi, bwd](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    const Tensor<S>& av2 = tp.value(ai);
    const Tensor<S>& yv = tp.value(oi);
    Tensor<S>& da = tp.grad(ai);
    for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i] * bwd(av2[i], yv[i]);
  });
  return out;
}

}  // namespace detail

template <std::floating_point S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  return detail::binary_same_shape(
      a, b, "add", [](S x, S y) { return x + y; },
      [](S, S) { return std::pair<S, S>{S{1}, S{1}}; });
}

template <std::floating_point S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  return detail::binary_same_shape(
      a, b, "sub", [](S x, S y) { return x - y; },
      [](S, S) { return std::pair<S, S>{S{1}, S{-1}}; });
}

template <std::floating_point S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  return detail::binary_same_shape(
      a, b, "mul", [](S x, S y) { return x * y; },
      [](S x, S y) { return std::pair<S, S>{y, x}; });
}

template <std::floating_point S>
Var<S> div(const Var<S>& a, const Var<S>& b) {
  return detail::binary_same_shape(
      a, b, "div", [](S x, S y) { return x / y; },
      [](S x, S y) { return std::pair<S, S>{S{1} / y, -x / (y * y)}; });
}

/// min(a, b) elementwise; ties propagate the gradient to `a`.
template <std::floating_point S>
Var<S> min_elem(const Var<S>& a, const Var<S>& b) {
  return detail::binary_same_shape(
      a, b, "min_elem", [](S x, S y) { return x <= y ? x : y; },
      [](S x, S y) { return x <= y ? std::pair<S, S>{S{1}, S{0}} : std::pair<S, S>{S{0}, S{1}}; });
}

// ---------------------------------------------------------------------------
// elementwise unaries
// ---------------------------------------------------------------------------
template <std::floating_point S>
Var<S> scale(const Var<S>& a, S c) {
  return detail::unary(a, "scale", [c](S x) { return c * x; }, [c](S, S) { return c; });
}

template <std::floating_point S>
Var<S> neg(const Var<S>& a) {
  return scale(a, S{-1});
}

template <std::floating_point S>
Var<S> add_const(const Var<S>& a, S c) {
  return detail::unary(a, "add_const", [c](S x) { return x + c; }, [](S, S) { return S{1}; });
}

template <std::floating_point S>
Var<S> sigmoid(const Var<S>& a) {
  return detail::unary(
      a, "sigmoid", [](S x) { return S{1} / (S{1} + std::exp(-x)); },
      [](S, S y) { return y * (S{1} - y); });
}

template <std::floating_point S>
Var<S> silu(const Var<S>& a) {
  return detail::unary(
      a, "silu",
      [](S x) {
        const S s = S{1} / (S{1} + std::exp(-x));
        return x * s;
      },
      [](S x, S) {
        const S s = S{1} / (S{1} + std::exp(-x));
        return s * (S{1} + x * (S{1} - s));
      });
}

template <std::floating_point S>
Var<S> relu(const Var<S>& a) {
  return detail::unary(
      a, "relu", [](S x) { return x > S{0} ? x : S{0}; },
      [](S x, S) { return x > S{0} ? S{1} : S{0}; });
}

template <std::floating_point S>
Var<S> abs_op(const Var<S>& a) {
  return detail::unary(
      a, "abs", [](S x) { return std::fabs(x); },
      [](S x, S) { return x >= S{0} ? S{1} : S{-1}; });
}

template <std::floating_point S>
Var<S> exp_op(const Var<S>& a) {
  return detail::unary(a, "exp", [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <std::floating_point S>
Var<S> log_op(const Var<S>& a) {
  return detail::unary(a, "log", [](S x) { return std::log(x); }, [](S x, S) { return S{1} / x; });
}

template <std::floating_point S>
Var<S> square(const Var<S>& a) {
  return detail::unary(a, "square", [](S x) { return x * x; }, [](S x, S) { return S{2} * x; });
}

template <std::floating_point S>
Var<S> sqrt_op(const Var<S>& a) {
  return detail::unary(
      a, "sqrt", [](S x) { return std::sqrt(x); },
      [](S, S y) { return S{0.5} / y; });
}

/// Subgradient 0 outside the interval.
template <std::floating_point S>
Var<S> clamp(const Var<S>& a, S lo, S hi) {
  return detail::unary(
      a, "clamp", [lo, hi](S x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](S x, S) { return (x >= lo && x <= hi) ? S{1} : S{0}; });
}

// ---------------------------------------------------------------------------
// row/column broadcasting
// ---------------------------------------------------------------------------

/// a[n x m] + b[1 x m], b broadcast over rows.
template <std::floating_point S>
Var<S> add_bias(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  const Tensor<S>& bv = b.val();
  if (bv.rows() != 1 || bv.cols() != av.cols()) fail("add_bias: bias must be [1 x cols]");
  Tensor<S> y(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) y(i, j) = av(i, j) + bv(0, j);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id) || t.needs_grad(b.id), "add_bias");
  const int ai = a.id, bi = b.id, oi = out.id;
  t.record([ai, bi, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    if (tp.needs_grad(ai)) {
      Tensor<S>& da = tp.grad(ai);
      for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i];
    }
    if (tp.needs_grad(bi)) {
      Tensor<S>& db = tp.grad(bi);
      for (int i = 0; i < dy.rows(); ++i)
        for (int j = 0; j < dy.cols(); ++j) db(0, j) += dy(i, j);
    }
  });
  return out;
}

/// a[n x m] * v[1 x m] elementwise, v broadcast over rows.
template <std::floating_point S>
Var<S> mul_rowvec(const Var<S>& a, const Var<S>& v) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  const Tensor<S>& vv = v.val();
  if (vv.rows() != 1 || vv.cols() != av.cols()) fail("mul_rowvec: vector must be [1 x cols]");
  Tensor<S> y(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) y(i, j) = av(i, j) * vv(0, j);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id) || t.needs_grad(v.id), "mul_rowvec");
  const int ai = a.id, vi = v.id, oi = out.id;
  t.record([ai, vi, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    const Tensor<S>& av2 = tp.value(ai);
    const Tensor<S>& vv2 = tp.value(vi);
    if (tp.needs_grad(ai)) {
      Tensor<S>& da = tp.grad(ai);
      for (int i = 0; i < dy.rows(); ++i)
        for (int j = 0; j < dy.cols(); ++j) da(i, j) += dy(i, j) * vv2(0, j);
    }
    if (tp.needs_grad(vi)) {
      Tensor<S>& dv = tp.grad(vi);
      for (int i = 0; i < dy.rows(); ++i)
        for (int j = 0; j < dy.cols(); ++j) dv(0, j) += dy(i, j) * av2(i, j);
    }
  });
  return out;
}

/// y = s * a with s a [1 x 1] var.
template <std::floating_point S>
Var<S> mul_scalar(const Var<S>& a, const Var<S>& s) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  const S sv = s.val().item();
  Tensor<S> y(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.numel(); ++i) y[i] = sv * av[i];
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id) || t.needs_grad(s.id), "mul_scalar");
  const int ai = a.id, si = s.id, oi = out.id;
  t.record([ai, si, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    const Tensor<S>& av2 = tp.value(ai);
    const S sv2 = tp.value(si).item();
    if (tp.needs_grad(ai)) {
      Tensor<S>& da = tp.grad(ai);
      for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i] * sv2;
    }
    if (tp.needs_grad(si)) {
      S acc{0};
      for (std::size_t i = 0; i < dy.numel(); ++i) acc += dy[i] * av2[i];
      tp.grad(si)[0] += acc;
    }
  });
  return out;
}

/// col[n x 1] tiled to [n x m].
template <std::floating_point S>
Var<S> broadcast_col(const Var<S>& col, int m) {
  Tape<S>& t = *col.tape;
  const Tensor<S>& cv = col.val();
  if (cv.cols() != 1) fail("broadcast_col: input must be [n x 1]");
  Tensor<S> y(cv.rows(), m);
  for (int i = 0; i < cv.rows(); ++i)
    for (int j = 0; j < m; ++j) y(i, j) = cv(i, 0);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(col.id), "broadcast_col");
  const int ci = col.id, oi = out.id;
  t.record([ci, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ci)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    Tensor<S>& dc = tp.grad(ci);
    for (int i = 0; i < dy.rows(); ++i) {
      S acc{0};
      for (int j = 0; j < dy.cols(); ++j) acc += dy(i, j);
      dc(i, 0) += acc;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// slicing / assembly
// ---------------------------------------------------------------------------
template <std::floating_point S>
Var<S> row(const Var<S>& a, int i) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  if (i < 0 || i >= av.rows()) fail("row: index out of range");
  Tensor<S> y(1, av.cols());
  for (int j = 0; j < av.cols(); ++j) y(0, j) = av(i, j);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), "row");
  const int ai = a.id, oi = out.id;
  t.record([ai, oi, i](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    Tensor<S>& da = tp.grad(ai);
    for (int j = 0; j < dy.cols(); ++j) da(i, j) += dy(0, j);
  });
  return out;
}

template <std::floating_point S>
Var<S> slice_cols(const Var<S>& a, int c0, int c1) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  if (c0 < 0 || c1 > av.cols() || c0 >= c1) fail("slice_cols: bad range");
  Tensor<S> y(av.rows(), c1 - c0);
  for (int i = 0; i < av.rows(); ++i)
    for (int j = c0; j < c1; ++j) y(i, j - c0) = av(i, j);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), "slice_cols");
  const int ai = a.id, oi = out.id;
  t.record([ai, oi, c0](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    Tensor<S>& da = tp.grad(ai);
    for (int i = 0; i < dy.rows(); ++i)
      for (int j = 0; j < dy.cols(); ++j) da(i, j + c0) += dy(i, j);
  });
  return out;
}

template <std::floating_point S>
Var<S> concat_cols(std::span<const Var<S>> parts) {
  if (parts.empty()) fail("concat_cols: empty");
  Tape<S>& t = *parts[0].tape;
  const int n = parts[0].val().rows();
  int total = 0;
  bool ng = false;
  for (const auto& p : parts) {
    if (p.val().rows() != n) fail("concat_cols: row mismatch");
    total += p.val().cols();
    ng = ng || t.needs_grad(p.id);
  }
  Tensor<S> y(n, total);
  int off = 0;
  std::vector<int> ids, offs, widths;
  for (const auto& p : parts) {
    const Tensor<S>& pv = p.val();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < pv.cols(); ++j) y(i, off + j) = pv(i, j);
    ids.push_back(p.id);
    offs.push_back(off);
    widths.push_back(pv.cols());
    off += pv.cols();
  }
  Var<S> out = t.alloc(std::move(y), ng, "concat_cols");
  const int oi = out.id;
  t.record([ids, offs, widths, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.needs_grad(ids[k])) continue;
      Tensor<S>& dp = tp.grad(ids[k]);
      for (int i = 0; i < dy.rows(); ++i)
        for (int j = 0; j < widths[k]; ++j) dp(i, j) += dy(i, offs[k] + j);
    }
  });
  return out;
}

/// Vertical stack; parts may have any row counts but equal column counts.
template <std::floating_point S>
Var<S> stack_rows(std::span<const Var<S>> parts) {
  if (parts.empty()) fail("stack_rows: empty");
  Tape<S>& t = *parts[0].tape;
  const int c = parts[0].val().cols();
  int total = 0;
  bool ng = false;
  for (const auto& p : parts) {
    if (p.val().cols() != c) fail("stack_rows: column mismatch");
    total += p.val().rows();
    ng = ng || t.needs_grad(p.id);
  }
  Tensor<S> y(total, c);
  int off = 0;
  std::vector<int> ids, offs, heights;
  for (const auto& p : parts) {
    const Tensor<S>& pv = p.val();
    for (int i = 0; i < pv.rows(); ++i)
      for (int j = 0; j < c; ++j) y(off + i, j) = pv(i, j);
    ids.push_back(p.id);
    offs.push_back(off);
    heights.push_back(pv.rows());
    off += pv.rows();
  }
  Var<S> out = t.alloc(std::move(y), ng, "stack_rows");
  const int oi = out.id;
  t.record([ids, offs, heights, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.needs_grad(ids[k])) continue;
      Tensor<S>& dp = tp.grad(ids[k]);
      for (int i = 0; i < heights[k]; ++i)
        for (int j = 0; j < dy.cols(); ++j) dp(i, j) += dy(offs[k] + i, j);
    }
  });
  return out;
}

/// Gathers the given columns (for every row). Backward scatter-adds.
template <std::floating_point S>
Var<S> select_cols(const Var<S>& a, std::vector<int> idx) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  for (int j : idx)
    if (j < 0 || j >= av.cols()) fail("select_cols: index out of range");
  Tensor<S> y(av.rows(), static_cast<int>(idx.size()));
  for (int i = 0; i < av.rows(); ++i)
    for (std::size_t k = 0; k < idx.size(); ++k) y(i, static_cast<int>(k)) = av(i, idx[k]);
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), "select_cols");
  const int ai = a.id, oi = out.id;
  t.record([ai, oi, idx](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    Tensor<S>& da = tp.grad(ai);
    for (int i = 0; i < dy.rows(); ++i)
      for (std::size_t k = 0; k < idx.size(); ++k) da(i, idx[k]) += dy(i, static_cast<int>(k));
  });
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------
template <std::floating_point S>
Var<S> sum(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  S acc{0};
  for (std::size_t i = 0; i < av.numel(); ++i) acc += av[i];
  Tensor<S> y(1, 1);
  y[0] = acc;
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), "sum");
  const int ai = a.id, oi = out.id;
  t.record([ai, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const S g = tp.grad_of(oi)[0];
    Tensor<S>& da = tp.grad(ai);
    for (std::size_t i = 0; i < da.numel(); ++i) da[i] += g;
  });
  return out;
}

template <std::floating_point S>
Var<S> mean(const Var<S>& a) {
  const auto n = static_cast<S>(a.val().numel());
  return scale(sum(a), S{1} / n);
}

/// Per-row sum: [n x m] -> [n x 1].
template <std::floating_point S>
Var<S> sum_cols(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  Tensor<S> y(av.rows(), 1);
  for (int i = 0; i < av.rows(); ++i) {
    S acc{0};
    for (int j = 0; j < av.cols(); ++j) acc += av(i, j);
    y(i, 0) = acc;
  }
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), "sum_cols");
  const int ai = a.id, oi = out.id;
  t.record([ai, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    Tensor<S>& da = tp.grad(ai);
    for (int i = 0; i < da.rows(); ++i)
      for (int j = 0; j < da.cols(); ++j) da(i, j) += dy(i, 0);
  });
  return out;
}

// ---------------------------------------------------------------------------
// softmax (row-wise, max-subtraction stabilized, optional 0/1 mask)
// ---------------------------------------------------------------------------
template <std::floating_point S>
Var<S> softmax_rows(const Var<S>& a, const Tensor<S>* mask = nullptr) {
  Tape<S>& t = *a.tape;
  const Tensor<S>& av = a.val();
  if (mask && !mask->same_shape(av)) fail("softmax_rows: mask shape mismatch");
  Tensor<S> y(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i) {
    S mx = std::numeric_limits<S>::lowest();
    bool any = false;
    for (int j = 0; j < av.cols(); ++j) {
      if (mask && (*mask)(i, j) == S{0}) continue;
      mx = std::max(mx, av(i, j));
      any = true;
    }
    if (!any) fail("softmax_rows: fully masked row");
    S denom{0};
    for (int j = 0; j < av.cols(); ++j) {
      if (mask && (*mask)(i, j) == S{0}) {
        y(i, j) = S{0};
        continue;
      }
      y(i, j) = std::exp(av(i, j) - mx);
      denom += y(i, j);
    }
    for (int j = 0; j < av.cols(); ++j) y(i, j) /= denom;
  }
  Var<S> out = t.alloc(std::move(y), t.needs_grad(a.id), "softmax");
  const int ai = a.id, oi = out.id;
  t.record([ai, oi](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(ai)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    const Tensor<S>& yv = tp.value(oi);
    Tensor<S>& da = tp.grad(ai);
    for (int i = 0; i < dy.rows(); ++i) {
      S dot{0};
      for (int j = 0; j < dy.cols(); ++j) dot += dy(i, j) * yv(i, j);
      for (int j = 0; j < dy.cols(); ++j) da(i, j) += yv(i, j) * (dy(i, j) - dot);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// rmsnorm (row-wise): y = gain .* x / sqrt(mean(x^2) + eps)
// ---------------------------------------------------------------------------
template <std::floating_point S>
Var<S> rmsnorm_rows(const Var<S>& x, const Var<S>& gain, S eps) {
  Tape<S>& t = *x.tape;
  const Tensor<S>& xv = x.val();
  const Tensor<S>& gv = gain.val();
  const int d = xv.cols();
  if (d < 1) fail("rmsnorm: empty feature dim");
  if (gv.numel() != static_cast<std::size_t>(d)) fail("rmsnorm: gain size mismatch");
  Tensor<S> y(xv.rows(), d);
  for (int i = 0; i < xv.rows(); ++i) {
    S ms{0};
    for (int j = 0; j < d; ++j) ms += xv(i, j) * xv(i, j);
    ms /= static_cast<S>(d);
    const S inv = S{1} / std::sqrt(ms + eps);
    for (int j = 0; j < d; ++j) y(i, j) = gv[static_cast<std::size_t>(j)] * xv(i, j) * inv;
  }
  Var<S> out = t.alloc(std::move(y), t.needs_grad(x.id) || t.needs_grad(gain.id), "rmsnorm");
  const int xi = x.id, gi = gain.id, oi = out.id;
  t.record([xi, gi, oi, eps, d](Tape<S>& tp) {
    if (!tp.has_grad(oi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    const Tensor<S>& xv2 = tp.value(xi);
    const Tensor<S>& gv2 = tp.value(gi);
    const bool gx = tp.needs_grad(xi), gg = tp.needs_grad(gi);
    for (int i = 0; i < xv2.rows(); ++i) {
      S ms{0};
      for (int j = 0; j < d; ++j) ms += xv2(i, j) * xv2(i, j);
      ms /= static_cast<S>(d);
      const S inv = S{1} / std::sqrt(ms + eps);
      if (gx) {
        // dx_j = inv*g_j*dy_j - (x_j*inv^3/d) * sum_k dy_k*g_k*x_k
        S dot{0};
        for (int k = 0; k < d; ++k) dot += dy(i, k) * gv2[static_cast<std::size_t>(k)] * xv2(i, k);
        Tensor<S>& dx = tp.grad(xi);
        const S c = inv * inv * inv / static_cast<S>(d);
        for (int j = 0; j < d; ++j)
          dx(i, j) += inv * gv2[static_cast<std::size_t>(j)] * dy(i, j) - xv2(i, j) * c * dot;
      }
      if (gg) {
        Tensor<S>& dg = tp.grad(gi);
        for (int j = 0; j < d; ++j) dg[static_cast<std::size_t>(j)] += dy(i, j) * xv2(i, j) * inv;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// rotary position embedding, adjacent-pair layout, frequency base 10000
// ---------------------------------------------------------------------------
inline std::vector<double> rope_inv_freq(int head_dim, double base) {
  std::vector<double> f(static_cast<std::size_t>(head_dim / 2));
  for (std::size_t p = 0; p < f.size(); ++p)
    f[p] = std::pow(base, -2.0 * static_cast<double>(p) / static_cast<double>(head_dim));
  return f;
}

/// Rotates every row by the corresponding position. `positions` has either
/// one entry per row or a single entry applied to all rows (the per-token
/// [heads x d_h] form).
template <std::floating_point S>
Var<S> rope_rows(const Var<S>& x, std::vector<std::int64_t> positions, double base = 10000.0) {
  Tape<S>& t = *x.tape;
  const Tensor<S>& xv = x.val();
  const int d = xv.cols();
  if (d % 2 != 0) fail("rope: head dim must be even");
  if (positions.size() != 1 && positions.size() != static_cast<std::size_t>(xv.rows()))
    fail("rope: positions size mismatch");
  for (std::int64_t p : positions)
    if (p < 0) fail("rope: negative position");
  const auto inv_freq = rope_inv_freq(d, base);
  Tensor<S> y(xv.rows(), d);
  for (int i = 0; i < xv.rows(); ++i) {
    const auto pos = static_cast<double>(positions.size() == 1 ? positions[0] : positions[i]);
    for (int p = 0; p < d / 2; ++p) {
      const double ang = pos * inv_freq[static_cast<std::size_t>(p)];
      const S c = static_cast<S>(std::cos(ang)), s = static_cast<S>(std::sin(ang));
      const S a = xv(i, 2 * p), b = xv(i, 2 * p + 1);
      y(i, 2 * p) = a * c - b * s;
      y(i, 2 * p + 1) = a * s + b * c;
    }
  }
  Var<S> out = t.alloc(std::move(y), t.needs_grad(x.id), "rope");
  const int xi = x.id, oi = out.id;
  t.record([xi, oi, positions, base, d](Tape<S>& tp) {
    if (!tp.has_grad(oi) || !tp.needs_grad(xi)) return;
    const Tensor<S>& dy = tp.grad_of(oi);
    Tensor<S>& dx = tp.grad(xi);
    const auto inv_freq2 = rope_inv_freq(d, base);
    for (int i = 0; i < dy.rows(); ++i) {
      const auto pos = static_cast<double>(positions.size() == 1 ? positions[0] : positions[i]);
      for (int p = 0; p < d / 2; ++p) {
        const double ang = pos * inv_freq2[static_cast<std::size_t>(p)];
        const S c = static_cast<S>(std::cos(ang)), s = static_cast<S>(std::sin(ang));
        const S ga = dy(i, 2 * p), gb = dy(i, 2 * p + 1);
        // inverse rotation
        dx(i, 2 * p) += ga * c + gb * s;
        dx(i, 2 * p + 1) += -ga * s + gb * c;
      }
    }
  });
  return out;
}

}  // namespace motrack::diffmath
