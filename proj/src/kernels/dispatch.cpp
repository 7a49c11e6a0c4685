#include "stvqa/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace stvqa::kern {

namespace {

bool cpu_has_avx2() {
#if defined(STVQA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend g_backend = [] {
  if (const char* env = std::getenv("STVQA_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2") {
      if (cpu_has_avx2()) return Backend::avx2;
      // static-init context: report and fall back instead of terminating
      std::fputs("stvqa: STVQA_SIMD=avx2 requested but AVX2 is unavailable, using scalar\n",
                 stderr);
      return Backend::scalar;
    }
    // anything else (including "auto") falls through to detection
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}();

}  // namespace

bool backend_supported(Backend b) {
  return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw std::runtime_error("kernel backend '" + backend_name(b) + "' not supported on this CPU");
  g_backend = b;
}

Backend active_backend() { return g_backend; }

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "?";
}

const KernelTable& table() {
#if defined(STVQA_HAVE_AVX2)
  if (g_backend == Backend::avx2) return avx2_table();
#endif
  return scalar_table();
}

}  // namespace stvqa::kern
