// SPDX-License-Identifier: Apache-2.0
#include "xrmbt/kernels.hpp"

namespace xrmbt::kernels {

namespace {
bool g_parallel = true;
}

void set_parallel(bool on) { g_parallel = on; }
bool parallel_enabled() { return g_parallel; }

}  // namespace xrmbt::kernels
