#include <cmath>

#include "kernels_impl.hpp"

// Reference kernels. Plain loops, fixed accumulation order; the AVX2 variants
// are validated against these.
namespace ctaug::kernels::detail::scalar {

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c,
          int64_t ldc) {
  auto A = [&](int64_t i, int64_t kk) {
    return trans_a ? a[kk * lda + i] : a[i * lda + kk];
  };
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    if (!trans_b) {
      // accumulate row-by-row over k so the inner loop streams B
      for (int64_t kk = 0; kk < k; ++kk) {
        const T av = alpha * A(i, kk);
        const T* brow = b + kk * ldb;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    } else {
      // op(B)[k,n] with B stored [n,k]: dot products of contiguous rows
      for (int64_t j = 0; j < n; ++j) {
        const T* brow = b + j * ldb;
        T acc = T(0);
        if (!trans_a) {
          const T* arow = a + i * lda;
          for (int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        } else {
          for (int64_t kk = 0; kk < k; ++kk) acc += a[kk * lda + i] * brow[kk];
        }
        crow[j] += alpha * acc;
      }
    }
  }
}

template <typename T>
T sum(const T* x, int64_t n) {
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T sum_squares(const T* x, int64_t n) {
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

template <typename T>
T sum_abs(const T* x, int64_t n) {
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += x[i] < T(0) ? -x[i] : x[i];
  return acc;
}

template <typename T>
void axpby(int64_t n, T a, const T* x, T b, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

template <typename T>
void scale_shift(int64_t n, const T* x, T scale, T shift, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = scale * x[i] + shift;
}

template <typename T>
void relu_forward(int64_t n, const T* x, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(int64_t n, const T* x, const T* gy, T* gx) {
  for (int64_t i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
}

template <typename T>
void leaky_relu_forward(int64_t n, T slope, const T* x, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(int64_t n, T slope, const T* x, const T* gy, T* gx) {
  for (int64_t i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? gy[i] : slope * gy[i];
}

template <typename T>
void tanh_forward(int64_t n, const T* x, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(int64_t n, const T* y, const T* gy, T* gx) {
  for (int64_t i = 0; i < n; ++i) gx[i] = gy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void adam_step(int64_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
               T eps, T bias1, T bias2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bias1;
    const T vhat = v[i] / bias2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
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

}  // namespace ctaug::kernels::detail::scalar
