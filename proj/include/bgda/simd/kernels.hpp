#pragma once

#include <cstddef>
#include <string_view>

namespace bgda::simd {

enum class Isa { Scalar, Avx2 };

// Dense double-precision primitives used by the batched network passes.
// All pointers may alias only where noted; lengths are element counts.
struct KernelTable {
  Isa isa;
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // out = a * b (elementwise); out may alias a or b
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out += a * b (elementwise)
  void (*mul_acc)(const double* a, const double* b, double* out, std::size_t n);
  // out += a * b * c (elementwise)
  void (*mul3_acc)(const double* a, const double* b, const double* c, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

// Null when the binary or the host cannot run AVX2+FMA.
const KernelTable* avx2_kernels();

// Selected once per process: the widest supported variant unless the
// BGDA_SIMD environment variable is set to "scalar".
const KernelTable& kernels();

}  // namespace bgda::simd
