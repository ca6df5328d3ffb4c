#include "ctaug/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"

namespace ctaug::kernels {

bool cpu_has_avx2() {
#if CTAUG_HAVE_AVX2
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend pick_initial_backend() {
  if (const char* env = std::getenv("CTAUG_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = pick_initial_backend();

}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2()) b = Backend::scalar;
  g_backend = b;
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

#if CTAUG_HAVE_AVX2
#define CTAUG_DISPATCH(fn, ...)                          \
  if (g_backend == Backend::avx2)                        \
    return detail::avx2::fn(__VA_ARGS__);                \
  return detail::scalar::fn(__VA_ARGS__)
#else
#define CTAUG_DISPATCH(fn, ...) return detail::scalar::fn(__VA_ARGS__)
#endif

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c,
          int64_t ldc) {
  CTAUG_DISPATCH(gemm, trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta,
                 c, ldc);
}

template <typename T>
T sum(const T* x, int64_t n) {
  CTAUG_DISPATCH(sum, x, n);
}

template <typename T>
T sum_squares(const T* x, int64_t n) {
  CTAUG_DISPATCH(sum_squares, x, n);
}

template <typename T>
T sum_abs(const T* x, int64_t n) {
  CTAUG_DISPATCH(sum_abs, x, n);
}

template <typename T>
void axpby(int64_t n, T a, const T* x, T b, T* y) {
  CTAUG_DISPATCH(axpby, n, a, x, b, y);
}

template <typename T>
void scale_shift(int64_t n, const T* x, T scale, T shift, T* y) {
  CTAUG_DISPATCH(scale_shift, n, x, scale, shift, y);
}

template <typename T>
void relu_forward(int64_t n, const T* x, T* y) {
  CTAUG_DISPATCH(relu_forward, n, x, y);
}

template <typename T>
void relu_backward(int64_t n, const T* x, const T* gy, T* gx) {
  CTAUG_DISPATCH(relu_backward, n, x, gy, gx);
}

template <typename T>
void leaky_relu_forward(int64_t n, T slope, const T* x, T* y) {
  CTAUG_DISPATCH(leaky_relu_forward, n, slope, x, y);
}

template <typename T>
void leaky_relu_backward(int64_t n, T slope, const T* x, const T* gy, T* gx) {
  CTAUG_DISPATCH(leaky_relu_backward, n, slope, x, gy, gx);
}

template <typename T>
void tanh_forward(int64_t n, const T* x, T* y) {
  CTAUG_DISPATCH(tanh_forward, n, x, y);
}

template <typename T>
void tanh_backward(int64_t n, const T* y, const T* gy, T* gx) {
  CTAUG_DISPATCH(tanh_backward, n, y, gy, gx);
}

template <typename T>
void adam_step(int64_t n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
               T eps, T bias1, T bias2) {
  CTAUG_DISPATCH(adam_step, n, w, g, m, v, lr, beta1, beta2, eps, bias1, bias2);
}

#undef CTAUG_DISPATCH

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

}  // namespace ctaug::kernels
