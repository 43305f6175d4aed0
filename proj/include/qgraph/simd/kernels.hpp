#pragma once

// Data-parallel inner loops used by the dense networks and the Q-iteration
// sweep. Every kernel has a scalar reference implementation; vector variants
// are compiled into separate translation units and selected at runtime.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace qgraph::simd {

enum class Isa { scalar, avx2, avx512 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  // C[m x n] (= or +=) A[m x k] * B[k x n].
  // A is addressed as a[i * a_rs + p * a_cs] so transposed operands need no
  // copy; B and C are row-major with leading dimensions ldb / ldc.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t a_rs, std::size_t a_cs, const double* b,
               std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

  // out[i] = reward[i] + discount[i] * value[target[i]]
  // Bit-identical across ISAs (no fused multiply-add).
  void (*bellman_backup)(std::size_t n, const double* reward,
                         const double* discount, const std::uint32_t* target,
                         const double* value, double* out);

  // max_i |a[i] - b[i]|
  double (*max_abs_diff)(std::size_t n, const double* a, const double* b);

  // Bias-corrected Adam update. correction1 = 1 / (1 - beta1^t),
  // correction2 = 1 / (1 - beta2^t). Bit-identical across ISAs.
  void (*adam_update)(std::size_t n, double* param, const double* grad,
                      double* m, double* v, double beta1, double beta2,
                      double eps, double lr, double correction1,
                      double correction2);

  // x[i] = tanh(x[i]) in place, within a few ulp of std::tanh. NaN stays NaN.
  // Bit-identical across ISAs.
  void (*tanh_inplace)(std::size_t n, double* x);
};

// Kernel table picked at first use: the widest ISA the CPU supports, unless
// the QGRAPH_KERNELS environment variable names a narrower one.
const KernelTable& active();

// Throws std::runtime_error when the CPU cannot run `isa`.
const KernelTable& table(Isa isa);

bool supported(Isa isa);

std::vector<Isa> supported_isas();

namespace detail {
KernelTable scalar_table();
#if defined(QGRAPH_X86_KERNELS)
KernelTable avx2_table();
KernelTable avx512_table();
#endif
}  // namespace detail

}  // namespace qgraph::simd
