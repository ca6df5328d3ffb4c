#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

// AVX2/FMA variants. Compiled with -mavx2 -mfma and reached only through the
// dispatch layer after a runtime CPU check.
namespace ctaug::kernels::detail::avx2 {

namespace {

template <typename T>
struct V;

template <>
struct V<float> {
  using reg = __m256;
  static constexpr int64_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg gt_zero_mask(reg a) {
    return _mm256_cmp_ps(a, _mm256_setzero_ps(), _CMP_GT_OQ);
  }
  static reg blend(reg a, reg b, reg mask) {
    return _mm256_blendv_ps(a, b, mask);
  }
  static reg abs(reg a) {
    return _mm256_andnot_ps(_mm256_set1_ps(-0.0f), a);
  }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_movehdup_ps(lo));
    return _mm_cvtss_f32(lo);
  }
};

template <>
struct V<double> {
  using reg = __m256d;
  static constexpr int64_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg gt_zero_mask(reg a) {
    return _mm256_cmp_pd(a, _mm256_setzero_pd(), _CMP_GT_OQ);
  }
  static reg blend(reg a, reg b, reg mask) {
    return _mm256_blendv_pd(a, b, mask);
  }
  static reg abs(reg a) {
    return _mm256_andnot_pd(_mm256_set1_pd(-0.0), a);
  }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
    return _mm_cvtsd_f64(lo);
  }
};

}  // namespace

// A broadcast / B streamed, 4 rows of C at a time, two vectors per row.
// Covers NN (A row-major) and TN (A column-major through lda).
template <typename T>
static void gemm_bstream(bool trans_a, int64_t m, int64_t n, int64_t k,
                         T alpha, const T* a, int64_t lda, const T* b,
                         int64_t ldb, T beta, T* c, int64_t ldc) {
  using W = V<T>;
  constexpr int64_t vw = W::width;
  const int64_t jtile = 2 * vw;
  auto aidx = [&](int64_t i, int64_t kk) {
    return trans_a ? kk * lda + i : i * lda + kk;
  };

  int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    int64_t j = 0;
    for (; j + jtile <= n; j += jtile) {
      typename W::reg acc00 = W::zero(), acc01 = W::zero();
      typename W::reg acc10 = W::zero(), acc11 = W::zero();
      typename W::reg acc20 = W::zero(), acc21 = W::zero();
      typename W::reg acc30 = W::zero(), acc31 = W::zero();
      for (int64_t kk = 0; kk < k; ++kk) {
        const typename W::reg b0 = W::load(b + kk * ldb + j);
        const typename W::reg b1 = W::load(b + kk * ldb + j + vw);
        const typename W::reg a0 = W::set1(a[aidx(i + 0, kk)]);
        const typename W::reg a1 = W::set1(a[aidx(i + 1, kk)]);
        const typename W::reg a2 = W::set1(a[aidx(i + 2, kk)]);
        const typename W::reg a3 = W::set1(a[aidx(i + 3, kk)]);
        acc00 = W::fmadd(a0, b0, acc00);
        acc01 = W::fmadd(a0, b1, acc01);
        acc10 = W::fmadd(a1, b0, acc10);
        acc11 = W::fmadd(a1, b1, acc11);
        acc20 = W::fmadd(a2, b0, acc20);
        acc21 = W::fmadd(a2, b1, acc21);
        acc30 = W::fmadd(a3, b0, acc30);
        acc31 = W::fmadd(a3, b1, acc31);
      }
      const typename W::reg va = W::set1(alpha);
      typename W::reg accs[4][2] = {{acc00, acc01},
                                    {acc10, acc11},
                                    {acc20, acc21},
                                    {acc30, acc31}};
      for (int64_t ii = 0; ii < 4; ++ii) {
        T* cp = c + (i + ii) * ldc + j;
        for (int64_t jj = 0; jj < 2; ++jj) {
          typename W::reg res = W::mul(va, accs[ii][jj]);
          if (beta != T(0))
            res = W::fmadd(W::set1(beta), W::load(cp + jj * vw), res);
          W::store(cp + jj * vw, res);
        }
      }
    }
    // column remainder, scalar
    for (; j < n; ++j) {
      for (int64_t ii = 0; ii < 4; ++ii) {
        T acc = T(0);
        for (int64_t kk = 0; kk < k; ++kk)
          acc += a[aidx(i + ii, kk)] * b[kk * ldb + j];
        T* cp = c + (i + ii) * ldc + j;
        *cp = alpha * acc + (beta == T(0) ? T(0) : beta * *cp);
      }
    }
  }
  // row remainder, one row at a time with single-vector tiles
  for (; i < m; ++i) {
    int64_t j = 0;
    for (; j + vw <= n; j += vw) {
      typename W::reg acc = W::zero();
      for (int64_t kk = 0; kk < k; ++kk)
        acc = W::fmadd(W::set1(a[aidx(i, kk)]), W::load(b + kk * ldb + j), acc);
      typename W::reg res = W::mul(W::set1(alpha), acc);
      if (beta != T(0))
        res = W::fmadd(W::set1(beta), W::load(c + i * ldc + j), res);
      W::store(c + i * ldc + j, res);
    }
    for (; j < n; ++j) {
      T acc = T(0);
      for (int64_t kk = 0; kk < k; ++kk)
        acc += a[aidx(i, kk)] * b[kk * ldb + j];
      T* cp = c + i * ldc + j;
      *cp = alpha * acc + (beta == T(0) ? T(0) : beta * *cp);
    }
  }
}

// op(B) = B^T: rows of A dotted with rows of B, vectorized over k.
template <typename T>
static void gemm_dot(bool trans_a, int64_t m, int64_t n, int64_t k, T alpha,
                     const T* a, int64_t lda, const T* b, int64_t ldb, T beta,
                     T* c, int64_t ldc) {
  using W = V<T>;
  constexpr int64_t vw = W::width;
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * ldb;
      T acc;
      if (!trans_a) {
        const T* arow = a + i * lda;
        typename W::reg vacc0 = W::zero(), vacc1 = W::zero();
        int64_t kk = 0;
        for (; kk + 2 * vw <= k; kk += 2 * vw) {
          vacc0 = W::fmadd(W::load(arow + kk), W::load(brow + kk), vacc0);
          vacc1 =
              W::fmadd(W::load(arow + kk + vw), W::load(brow + kk + vw), vacc1);
        }
        for (; kk + vw <= k; kk += vw)
          vacc0 = W::fmadd(W::load(arow + kk), W::load(brow + kk), vacc0);
        acc = W::hsum(W::add(vacc0, vacc1));
        for (; kk < k; ++kk) acc += arow[kk] * brow[kk];
      } else {
        acc = T(0);  // strided A, keep scalar
        for (int64_t kk = 0; kk < k; ++kk) acc += a[kk * lda + i] * brow[kk];
      }
      T* cp = c + i * ldc + j;
      *cp = alpha * acc + (beta == T(0) ? T(0) : beta * *cp);
    }
  }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c,
          int64_t ldc) {
  if (trans_b)
    gemm_dot(trans_a, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    gemm_bstream(trans_a, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
T sum(const T* x, int64_t n) {
  using W = V<T>;
  typename W::reg acc = W::zero();
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) acc = W::add(acc, W::load(x + i));
  T s = W::hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T sum_squares(const T* x, int64_t n) {
  using W = V<T>;
  typename W::reg acc = W::zero();
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg v = W::load(x + i);
    acc = W::fmadd(v, v, acc);
  }
  T s = W::hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

template <typename T>
T sum_abs(const T* x, int64_t n) {
  using W = V<T>;
  typename W::reg acc = W::zero();
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    acc = W::add(acc, W::abs(W::load(x + i)));
  T s = W::hsum(acc);
  for (; i < n; ++i) s += x[i] < T(0) ? -x[i] : x[i];
  return s;
}

template <typename T>
void axpby(int64_t n, T a, const T* x, T b, T* y) {
  using W = V<T>;
  const typename W::reg va = W::set1(a);
  const typename W::reg vb = W::set1(b);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(y + i, W::fmadd(va, W::load(x + i), W::mul(vb, W::load(y + i))));
  for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

template <typename T>
void scale_shift(int64_t n, const T* x, T scale, T shift, T* y) {
  using W = V<T>;
  const typename W::reg vs = W::set1(scale);
  const typename W::reg vh = W::set1(shift);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(y + i, W::fmadd(vs, W::load(x + i), vh));
  for (; i < n; ++i) y[i] = scale * x[i] + shift;
}

template <typename T>
void relu_forward(int64_t n, const T* x, T* y) {
  using W = V<T>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width)
    W::store(y + i, W::max(W::load(x + i), W::zero()));
  for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(int64_t n, const T* x, const T* gy, T* gx) {
  using W = V<T>;
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg mask = W::gt_zero_mask(W::load(x + i));
    W::store(gx + i, W::blend(W::zero(), W::load(gy + i), mask));
  }
  for (; i < n; ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
}

template <typename T>
void leaky_relu_forward(int64_t n, T slope, const T* x, T* y) {
  using W = V<T>;
  const typename W::reg vs = W::set1(slope);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg v = W::load(x + i);
    W::store(y + i, W::blend(W::mul(vs, v), v, W::gt_zero_mask(v)));
  }
  for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(int64_t n, T slope, const T* x, const T* gy, T* gx) {
  using W = V<T>;
  const typename W::reg vs = W::set1(slope);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg g = W::load(gy + i);
    const typename W::reg mask = W::gt_zero_mask(W::load(x + i));
    W::store(gx + i, W::blend(W::mul(vs, g), g, mask));
  }
  for (; i < n; ++i) gx[i] = x[i] > T(0) ? gy[i] : slope * gy[i];
}

// std::tanh on both backends: libm precision, and forward passes stay
// bit-identical whichever backend is active.
template <typename T>
void tanh_forward(int64_t n, const T* x, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(int64_t n, const T* y, const T* gy, T* gx) {
  using W = V<T>;
  const typename W::reg one = W::set1(T(1));
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg v = W::load(y + i);
    W::store(gx + i, W::mul(W::load(gy + i), W::sub(one, W::mul(v, v))));
  }
  for (; i < n; ++i) gx[i] = gy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void adam_step(int64_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
               T eps, T bias1, T bias2) {
  using W = V<T>;
  const typename W::reg vb1 = W::set1(beta1);
  const typename W::reg vb2 = W::set1(beta2);
  const typename W::reg v1mb1 = W::set1(T(1) - beta1);
  const typename W::reg v1mb2 = W::set1(T(1) - beta2);
  const typename W::reg vlr = W::set1(lr);
  const typename W::reg veps = W::set1(eps);
  const typename W::reg vib1 = W::set1(T(1) / bias1);
  const typename W::reg vib2 = W::set1(T(1) / bias2);
  int64_t i = 0;
  for (; i + W::width <= n; i += W::width) {
    const typename W::reg gv = W::load(g + i);
    typename W::reg mv = W::fmadd(vb1, W::load(m + i), W::mul(v1mb1, gv));
    typename W::reg vv =
        W::fmadd(vb2, W::load(v + i), W::mul(v1mb2, W::mul(gv, gv)));
    W::store(m + i, mv);
    W::store(v + i, vv);
    const typename W::reg mhat = W::mul(mv, vib1);
    const typename W::reg vhat = W::mul(vv, vib2);
    const typename W::reg upd =
        W::div(W::mul(vlr, mhat), W::add(W::sqrt(vhat), veps));
    W::store(w + i, W::sub(W::load(w + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
  }
}

#define CTAUG_INSTANTIATE(T)                                                  \
  template void gemm<T>(bool, bool, int64_t, int64_t, int64_t, T, const T*,   \
                        int64_t, const T*, int64_t, T, T*, int64_t);          \
  template T sum<T>(const T*, int64_t);                                       \
  template T sum_squares<T>(const T*, int64_t);                               \
  template T sum_abs<T>(const T*, int64_t);                                   \
  template void axpby<T>(int64_t, T, const T*, T, T*);                        \
  template void scale_shift<T>(int64_t, const T*, T, T, T*);                  \
  template void relu_forward<T>(int64_t, const T*, T*);                       \
  template void relu_backward<T>(int64_t, const T*, const T*, T*);            \
  template void leaky_relu_forward<T>(int64_t, T, const T*, T*);              \
  template void leaky_relu_backward<T>(int64_t, T, const T*, const T*, T*);   \
  template void tanh_forward<T>(int64_t, const T*, T*);                       \
  template void tanh_backward<T>(int64_t, const T*, const T*, T*);            \
  template void adam_step<T>(int64_t, T*, const T*, T*, T*, T, T, T, T, T, T);

CTAUG_INSTANTIATE(float)
CTAUG_INSTANTIATE(double)
#undef CTAUG_INSTANTIATE

}  // namespace ctaug::kernels::detail::avx2
