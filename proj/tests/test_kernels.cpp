#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "ctaug/kernels.hpp"
#include "ctaug/rng.hpp"

using namespace ctaug;

namespace {

// Runs fn under both backends and returns the pair of results.
template <typename Fn>
auto with_both_backends(Fn&& fn) {
  const auto saved = kernels::active_backend();
  kernels::set_backend(kernels::Backend::scalar);
  auto scalar_result = fn();
  kernels::set_backend(kernels::Backend::avx2);  // no-op if unsupported
  auto simd_result = fn();
  kernels::set_backend(saved);
  return std::make_pair(std::move(scalar_result), std::move(simd_result));
}

template <typename T>
std::vector<T> random_vec(int64_t n, Rng& rng, double scale = 1.0) {
  std::vector<T> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, scale));
  return v;
}

// Plain triple-loop oracle, independent of the kernels module.
template <typename T>
std::vector<T> gemm_oracle(bool ta, bool tb, int64_t m, int64_t n, int64_t k,
                           T alpha, const std::vector<T>& a, int64_t lda,
                           const std::vector<T>& b, int64_t ldb, T beta,
                           std::vector<T> c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0;
      for (int64_t kk = 0; kk < k; ++kk) {
        const T av = ta ? a[kk * lda + i] : a[i * lda + kk];
        const T bv = tb ? b[j * ldb + kk] : b[kk * ldb + j];
        acc += static_cast<double>(av) * static_cast<double>(bv);
      }
      c[i * ldc + j] = static_cast<T>(alpha * acc + beta * c[i * ldc + j]);
    }
  return c;
}

}  // namespace

TEST_CASE("backend dispatch is sane") {
  const auto b = kernels::active_backend();
  CHECK((b == kernels::Backend::scalar || b == kernels::Backend::avx2));
  if (kernels::cpu_has_avx2()) {
    kernels::set_backend(kernels::Backend::avx2);
    CHECK(kernels::active_backend() == kernels::Backend::avx2);
  }
  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  kernels::set_backend(b);
}

TEST_CASE_TEMPLATE("gemm matches oracle in all transpose modes", T, float,
                   double) {
  Rng rng(42);
  for (const bool ta : {false, true})
    for (const bool tb : {false, true})
      for (const auto& [m, n, k] :
           std::vector<std::array<int64_t, 3>>{
               {1, 1, 1}, {3, 5, 7}, {4, 16, 8}, {5, 17, 33}, {8, 64, 40},
               {13, 31, 19}}) {
        const int64_t lda = ta ? m : k;
        const int64_t ldb = tb ? k : n;
        const auto a = random_vec<T>(m * k, rng);
        const auto b = random_vec<T>(k * n, rng);
        const auto c0 = random_vec<T>(m * n, rng);
        const T alpha = static_cast<T>(1.5), beta = static_cast<T>(0.5);

        const auto expected =
            gemm_oracle(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c0, n);
        auto [scalar_c, simd_c] = with_both_backends([&] {
          auto c = c0;
          kernels::gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb,
                        beta, c.data(), n);
          return c;
        });
        const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-12;
        for (size_t i = 0; i < expected.size(); ++i) {
          CHECK(std::abs(scalar_c[i] - expected[i]) <=
                tol * (1.0 + std::abs(expected[i])));
          CHECK(std::abs(simd_c[i] - expected[i]) <=
                tol * (1.0 + std::abs(expected[i])));
        }
      }
}

TEST_CASE_TEMPLATE("elementwise kernels agree across backends", T, float,
                   double) {
  Rng rng(7);
  for (const int64_t n : {1, 7, 8, 9, 64, 257}) {
    const auto x = random_vec<T>(n, rng);
    const auto y0 = random_vec<T>(n, rng);
    const auto g = random_vec<T>(n, rng);

    auto [s1, v1] = with_both_backends([&] {
      auto y = y0;
      kernels::axpby<T>(n, T(1.5), x.data(), T(-0.5), y.data());
      return y;
    });
    auto [s2, v2] = with_both_backends([&] {
      std::vector<T> y(x.size());
      kernels::leaky_relu_forward<T>(n, T(0.2), x.data(), y.data());
      return y;
    });
    auto [s3, v3] = with_both_backends([&] {
      std::vector<T> y(x.size());
      kernels::leaky_relu_backward<T>(n, T(0.2), x.data(), g.data(), y.data());
      return y;
    });
    auto [s4, v4] = with_both_backends([&] {
      std::vector<T> y(x.size());
      kernels::relu_forward<T>(n, x.data(), y.data());
      return y;
    });
    auto [s5, v5] = with_both_backends(
        [&] { return std::vector<T>{kernels::sum<T>(x.data(), n)}; });
    auto [s6, v6] = with_both_backends(
        [&] { return std::vector<T>{kernels::sum_squares<T>(x.data(), n)}; });
    auto [s7, v7] = with_both_backends(
        [&] { return std::vector<T>{kernels::sum_abs<T>(x.data(), n)}; });

    const double tol = std::is_same_v<T, float> ? 1e-5 : 1e-13;
    const auto close = [&](const std::vector<T>& a, const std::vector<T>& b) {
      REQUIRE(a.size() == b.size());
      for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) <=
              tol * (1.0 + std::abs(static_cast<double>(a[i]))) * n);
    };
    close(s1, v1);
    close(s2, v2);
    close(s3, v3);
    close(s4, v4);
    close(s5, v5);
    close(s6, v6);
    close(s7, v7);
  }
}

TEST_CASE_TEMPLATE("tanh kernels: forward bit-identical, backward equivalent",
                   T, float, double) {
  Rng rng(11);
  const int64_t n = 100;
  const auto x = random_vec<T>(n, rng, 2.0);
  auto [sf, vf] = with_both_backends([&] {
    std::vector<T> y(x.size());
    kernels::tanh_forward<T>(n, x.data(), y.data());
    return y;
  });
  for (size_t i = 0; i < sf.size(); ++i) CHECK(sf[i] == vf[i]);

  const auto g = random_vec<T>(n, rng);
  auto [sb, vb] = with_both_backends([&] {
    std::vector<T> gx(x.size());
    kernels::tanh_backward<T>(n, sf.data(), g.data(), gx.data());
    return gx;
  });
  const double tol = std::is_same_v<T, float> ? 1e-6 : 1e-14;
  for (size_t i = 0; i < sb.size(); ++i)
    CHECK(std::abs(sb[i] - vb[i]) <= tol * (1.0 + std::abs(sb[i])));
}

TEST_CASE_TEMPLATE("adam_step backends agree and lr=0 is a no-op", T, float,
                   double) {
  Rng rng(13);
  const int64_t n = 67;
  const auto w0 = random_vec<T>(n, rng);
  const auto g = random_vec<T>(n, rng);
  const auto m0 = random_vec<T>(n, rng, 0.1);
  auto v0 = random_vec<T>(n, rng, 0.1);
  for (auto& v : v0) v = std::abs(v);

  auto run = [&] {
    auto w = w0;
    auto m = m0;
    auto v = v0;
    kernels::adam_step<T>(n, w.data(), g.data(), m.data(), v.data(), T(1e-3),
                          T(0.9), T(0.999), T(1e-8), T(0.1), T(0.001));
    return w;
  };
  auto [sw, vw] = with_both_backends(run);
  const double tol = std::is_same_v<T, float> ? 1e-6 : 1e-14;
  for (size_t i = 0; i < sw.size(); ++i)
    CHECK(std::abs(sw[i] - vw[i]) <= tol * (1.0 + std::abs(sw[i])));

  // lr = 0 leaves weights bit-identical
  auto w = w0;
  auto m = m0;
  auto v = v0;
  kernels::adam_step<T>(n, w.data(), g.data(), m.data(), v.data(), T(0), T(0.9),
                        T(0.999), T(1e-8), T(0.1), T(0.001));
  for (size_t i = 0; i < w.size(); ++i) CHECK(w[i] == w0[i]);
}
