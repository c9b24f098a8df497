#include <cstdlib>
#include <string_view>

#include "sqz/simd/kernels.hpp"

namespace sqz::simd {

#if defined(SQZ_HAVE_AVX2)
namespace avx2 {
const Kernels& table();
}
#endif

const Kernels* avx2_kernels() {
#if defined(SQZ_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool supported = __builtin_cpu_supports("avx2");
  if (supported) return &avx2::table();
#endif
  return nullptr;
}

const Kernels& active() {
  static const Kernels& chosen = [] () -> const Kernels& {
    const char* env = std::getenv("SQZ_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return *k;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace sqz::simd
