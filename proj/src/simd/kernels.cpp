#include "bgda/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace bgda::simd {

const KernelTable& kernels() {
  static const KernelTable& selected = [] () -> const KernelTable& {
    const char* env = std::getenv("BGDA_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* wide = avx2_kernels()) return *wide;
    return scalar_kernels();
  }();
  return selected;
}

}  // namespace bgda::simd
