// SPDX-License-Identifier: Apache-2.0
//
// Times the serial reference kernels against the OpenMP versions and checks
// that both produce bit-identical results (the parallel kernels keep the
// serial per-element accumulation order).
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "xrmbt/kernels.hpp"

using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
  f();  // warm up
  const auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  const int sizes[][3] = {{64, 64, 64}, {256, 256, 256}, {512, 512, 512}, {1600, 310, 128}};
  std::printf("%-18s %12s %12s %8s %10s\n", "m x k x n", "serial(ms)", "omp(ms)", "speedup",
              "bit-equal");
  bool all_equal = true;
  for (const auto& s : sizes) {
    const int m = s[0], k = s[1], n = s[2];
    std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n);
    for (auto& v : a) v = dist(rng);
    for (auto& v : b) v = dist(rng);
    std::vector<float> c_serial(static_cast<size_t>(m) * n), c_omp(c_serial.size());

    xrmbt::kernels::set_parallel(false);
    const double t_serial = time_ms(
        [&]() { xrmbt::kernels::gemm_nn(a.data(), b.data(), c_serial.data(), m, k, n); }, 3);
    xrmbt::kernels::set_parallel(true);
    const double t_omp = time_ms(
        [&]() { xrmbt::kernels::gemm_nn(a.data(), b.data(), c_omp.data(), m, k, n); }, 3);

    const bool equal =
        std::memcmp(c_serial.data(), c_omp.data(), c_serial.size() * sizeof(float)) == 0;
    all_equal = all_equal && equal;
    char label[32];
    std::snprintf(label, sizeof(label), "%dx%dx%d", m, k, n);
    std::printf("%-18s %12.3f %12.3f %8.2f %10s\n", label, t_serial, t_omp, t_serial / t_omp,
                equal ? "yes" : "NO");
  }
  if (!all_equal) {
    std::printf("mismatch between serial and parallel kernels\n");
    return 1;
  }
  return 0;
}
