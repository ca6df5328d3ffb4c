#pragma once

#include <cstdint>

// Numeric inner loops used by the filtering and network code. Every routine
// has a scalar reference implementation and, on x86-64, an AVX2/FMA variant;
// the backend is picked once at startup (CTAUG_KERNELS=scalar|avx2 overrides
// auto-detection) and the two are equivalence-tested against each other.
namespace ctaug::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);
bool cpu_has_avx2();
const char* backend_name(Backend b);

// C = alpha * op(A) @ op(B) + beta * C, row-major with leading dimensions.
// op(A) is [m,k], op(B) is [k,n], C is [m,n].
template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c,
          int64_t ldc);

template <typename T>
T sum(const T* x, int64_t n);

template <typename T>
T sum_squares(const T* x, int64_t n);

template <typename T>
T sum_abs(const T* x, int64_t n);

// y = a*x + b*y
template <typename T>
void axpby(int64_t n, T a, const T* x, T b, T* y);

// y = scale*x + shift
template <typename T>
void scale_shift(int64_t n, const T* x, T scale, T shift, T* y);

template <typename T>
void relu_forward(int64_t n, const T* x, T* y);

// gx = gy where x > 0, else 0
template <typename T>
void relu_backward(int64_t n, const T* x, const T* gy, T* gx);

template <typename T>
void leaky_relu_forward(int64_t n, T slope, const T* x, T* y);

template <typename T>
void leaky_relu_backward(int64_t n, T slope, const T* x, const T* gy, T* gx);

template <typename T>
void tanh_forward(int64_t n, const T* x, T* y);

// gx = gy * (1 - y^2), y the cached forward output
template <typename T>
void tanh_backward(int64_t n, const T* y, const T* gy, T* gx);

// One Adam update. bias1/bias2 are the 1-b^t correction terms for this step.
template <typename T>
void adam_step(int64_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
               T eps, T bias1, T bias2);

}  // namespace ctaug::kernels
