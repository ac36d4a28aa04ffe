// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels used by the autodiff graph and the geometry batch passes.
// Every kernel exists in a serial reference form and an OpenMP form with
// identical per-element arithmetic order, so outputs are bit-identical for
// any thread count. The _serial variants are kept as the comparison oracle
// for tests and for the kernel benchmark.
#pragma once

#include <cstdint>

namespace xrmbt::kernels {

/// Global switch; OMP variants fall back to serial order anyway, this only
/// controls whether worker threads are used at all.
void set_parallel(bool enabled);
bool parallel_enabled();

/// Minimum number of output elements before a kernel bothers forking threads.
inline constexpr std::int64_t kParallelGrain = 4096;

// c[m,n] = a[m,k] * b[k,n]; accumulate over p ascending per element.
template <typename T>
void gemm_nn_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = T(0);
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T aip = arow[p];
      const T* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename T>
void gemm_nn_omp(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = T(0);
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T aip = arow[p];
      const T* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c[m,n] += a[m,k] * b[n,k]^T, i.e. c(i,j) += dot(a row i, b row j).
template <typename T>
void gemm_nt_acc_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::int64_t>(j) * k;
      T s = T(0);
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

template <typename T>
void gemm_nt_acc_omp(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::int64_t>(j) * k;
      T s = T(0);
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// c[m,n] += a[k,m]^T * b[k,n]; accumulate over p ascending per element.
template <typename T>
void gemm_tn_acc_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T api = a[static_cast<std::int64_t>(p) * m + i];
      const T* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <typename T>
void gemm_tn_acc_omp(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T api = a[static_cast<std::int64_t>(p) * m + i];
      const T* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n) {
  if (parallel_enabled() && static_cast<std::int64_t>(m) * n >= kParallelGrain)
    gemm_nn_omp(a, b, c, m, k, n);
  else
    gemm_nn_serial(a, b, c, m, k, n);
}

template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  if (parallel_enabled() && static_cast<std::int64_t>(m) * n >= kParallelGrain)
    gemm_nt_acc_omp(a, b, c, m, k, n);
  else
    gemm_nt_acc_serial(a, b, c, m, k, n);
}

template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  if (parallel_enabled() && static_cast<std::int64_t>(m) * n >= kParallelGrain)
    gemm_tn_acc_omp(a, b, c, m, k, n);
  else
    gemm_tn_acc_serial(a, b, c, m, k, n);
}

/// Runs f(i) for i in [0, n). Iterations must be independent; results are
/// bit-identical with and without threads.
template <typename F>
void parallel_for(int n, std::int64_t work_per_item, F&& f);

}  // namespace xrmbt::kernels

// Implementation detail for parallel_for (needs the omp pragma in a template).
namespace xrmbt::kernels {

template <typename F>
void parallel_for(int n, std::int64_t work_per_item, F&& f) {
  if (parallel_enabled() && work_per_item * n >= kParallelGrain) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) f(i);
  } else {
    for (int i = 0; i < n; ++i) f(i);
  }
}

}  // namespace xrmbt::kernels
