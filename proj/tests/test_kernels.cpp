// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <omp.h>

#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "xrmbt/kernels.hpp"

using namespace xrmbt;

namespace {

std::vector<float> randu(int n, std::mt19937& rng) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

// Plain (i,j,p) loop in double, deliberately different accumulation order
// from the kernels.
std::vector<double> naive_nn(const std::vector<float>& a, const std::vector<float>& b, int m,
                             int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p)
        s += static_cast<double>(a[static_cast<size_t>(i) * k + p]) *
             static_cast<double>(b[static_cast<size_t>(p) * n + j]);
      c[static_cast<size_t>(i) * n + j] = s;
    }
  return c;
}

struct ParallelGuard {
  bool was = kernels::parallel_enabled();
  ~ParallelGuard() { kernels::set_parallel(was); }
};

}  // namespace

TEST_CASE("gemm_nn matches a naive double oracle") {
  std::mt19937 rng(42);
  for (auto [m, k, n] : {std::array{3, 5, 4}, std::array{17, 33, 9}, std::array{64, 64, 64}}) {
    const auto a = randu(m * k, rng);
    const auto b = randu(k * n, rng);
    std::vector<float> c(static_cast<size_t>(m) * n);
    kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    const auto ref = naive_nn(a, b, m, k, n);
    for (size_t i = 0; i < c.size(); ++i)
      CHECK(std::abs(c[i] - ref[i]) <= 1e-4 * (1.0 + std::abs(ref[i])));
  }
}

TEST_CASE("gemm_nt_acc and gemm_tn_acc match naive oracles and accumulate") {
  std::mt19937 rng(7);
  const int m = 11, k = 23, n = 13;
  const auto a = randu(m * k, rng);   // [m,k]
  const auto bt = randu(n * k, rng);  // rows of b for nt
  const auto at = randu(k * m, rng);  // [k,m] for tn
  const auto b = randu(k * n, rng);   // [k,n]

  std::vector<float> c1(static_cast<size_t>(m) * n, 0.5f);
  kernels::gemm_nt_acc(a.data(), bt.data(), c1.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.5;
      for (int p = 0; p < k; ++p)
        s += static_cast<double>(a[static_cast<size_t>(i) * k + p]) *
             static_cast<double>(bt[static_cast<size_t>(j) * k + p]);
      CHECK(std::abs(c1[static_cast<size_t>(i) * n + j] - s) <= 1e-4 * (1.0 + std::abs(s)));
    }

  std::vector<float> c2(static_cast<size_t>(m) * n, -0.25f);
  kernels::gemm_tn_acc(at.data(), b.data(), c2.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = -0.25;
      for (int p = 0; p < k; ++p)
        s += static_cast<double>(at[static_cast<size_t>(p) * m + i]) *
             static_cast<double>(b[static_cast<size_t>(p) * n + j]);
      CHECK(std::abs(c2[static_cast<size_t>(i) * n + j] - s) <= 1e-4 * (1.0 + std::abs(s)));
    }
}

TEST_CASE("parallel kernels are bit-identical to serial for any thread count") {
  ParallelGuard guard;
  std::mt19937 rng(3);
  // sizes straddle the dispatch grain
  for (auto [m, k, n] : {std::array{8, 8, 8}, std::array{96, 77, 96}, std::array{130, 40, 210}}) {
    const auto a = randu(m * k, rng);
    const auto b = randu(k * n, rng);

    std::vector<float> ser(static_cast<size_t>(m) * n);
    kernels::gemm_nn_serial(a.data(), b.data(), ser.data(), m, k, n);

    for (int threads : {1, 2, 4, 7}) {
      omp_set_num_threads(threads);
      std::vector<float> par(static_cast<size_t>(m) * n);
      kernels::gemm_nn_omp(a.data(), b.data(), par.data(), m, k, n);
      CHECK(std::memcmp(ser.data(), par.data(), ser.size() * sizeof(float)) == 0);

      kernels::set_parallel(true);
      std::vector<float> dispatched(static_cast<size_t>(m) * n);
      kernels::gemm_nn(a.data(), b.data(), dispatched.data(), m, k, n);
      CHECK(std::memcmp(ser.data(), dispatched.data(), ser.size() * sizeof(float)) == 0);
    }

    // accumulating variants, with a nonzero starting c
    const auto c0 = randu(m * n, rng);
    std::vector<float> s1 = c0, p1 = c0;
    kernels::gemm_nt_acc_serial(a.data(), b.data(), s1.data(), m, k, n);
    omp_set_num_threads(4);
    kernels::gemm_nt_acc_omp(a.data(), b.data(), p1.data(), m, k, n);
    CHECK(std::memcmp(s1.data(), p1.data(), s1.size() * sizeof(float)) == 0);

    std::vector<float> s2 = c0, p2 = c0;
    kernels::gemm_tn_acc_serial(a.data(), b.data(), s2.data(), m, k, n);
    kernels::gemm_tn_acc_omp(a.data(), b.data(), p2.data(), m, k, n);
    CHECK(std::memcmp(s2.data(), p2.data(), s2.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("set_parallel gates the dispatcher") {
  ParallelGuard guard;
  kernels::set_parallel(false);
  CHECK_FALSE(kernels::parallel_enabled());
  kernels::set_parallel(true);
  CHECK(kernels::parallel_enabled());
}

TEST_CASE("parallel_for covers every index exactly once") {
  ParallelGuard guard;
  kernels::set_parallel(true);
  std::vector<int> hits(10000, 0);
  kernels::parallel_for(10000, 64, [&](int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}
