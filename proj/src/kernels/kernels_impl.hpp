#pragma once

#include <cstdint>

// Internal backend entry points. Each backend defines the full set; the
// dispatch layer in kernels.cpp routes public calls to one of them.
namespace ctaug::kernels::detail {

#define CTAUG_KERNELS_DECLARE(ns)                                              \
  namespace ns {                                                               \
  template <typename T>                                                        \
  void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,       \
            T alpha, const T* a, int64_t lda, const T* b, int64_t ldb, T beta, \
            T* c, int64_t ldc);                                                \
  template <typename T>                                                        \
  T sum(const T* x, int64_t n);                                                \
  template <typename T>                                                        \
  T sum_squares(const T* x, int64_t n);                                        \
  template <typename T>                                                        \
  T sum_abs(const T* x, int64_t n);                                            \
  template <typename T>                                                        \
  void axpby(int64_t n, T a, const T* x, T b, T* y);                           \
  template <typename T>                                                        \
  void scale_shift(int64_t n, const T* x, T scale, T shift, T* y);             \
  template <typename T>                                                        \
  void relu_forward(int64_t n, const T* x, T* y);                              \
  template <typename T>                                                        \
  void relu_backward(int64_t n, const T* x, const T* gy, T* gx);               \
  template <typename T>                                                        \
  void leaky_relu_forward(int64_t n, T slope, const T* x, T* y);               \
  template <typename T>                                                        \
  void leaky_relu_backward(int64_t n, T slope, const T* x, const T* gy,        \
                           T* gx);                                             \
  template <typename T>                                                        \
  void tanh_forward(int64_t n, const T* x, T* y);                              \
  template <typename T>                                                        \
  void tanh_backward(int64_t n, const T* y, const T* gy, T* gx);               \
  template <typename T>                                                        \
  void adam_step(int64_t n, T* w, const T* g, T* m, T* v, T lr, T beta1,       \
                 T beta2, T eps, T bias1, T bias2);                            \
  }

CTAUG_KERNELS_DECLARE(scalar)
#if CTAUG_HAVE_AVX2
CTAUG_KERNELS_DECLARE(avx2)
#endif

#undef CTAUG_KERNELS_DECLARE

}  // namespace ctaug::kernels::detail
