#include <cstdlib>
#include <cstring>

#include "branchlab/simd.hpp"

namespace branchlab::simd {

#if defined(BRANCHLAB_HAVE_AVX2)
const Kernels* avx2_kernels_impl();
#endif

const Kernels* avx2_kernels() {
#if defined(BRANCHLAB_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? avx2_kernels_impl() : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active() {
  static const Kernels* chosen = [] {
    const char* env = std::getenv("BRANCHLAB_SIMD");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    const Kernels* v = avx2_kernels();
    return v ? v : &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace branchlab::simd
