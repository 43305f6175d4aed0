#include "qgraph/simd/kernels.hpp"

#if defined(QGRAPH_X86_KERNELS)

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>

#include "tanh_constants.hpp"

namespace qgraph::simd::detail {
namespace {

template <std::size_t Rows, std::size_t Vecs>
inline void gemm_block(std::size_t k, const double* a, std::size_t a_rs,
                       std::size_t a_cs, const double* b, std::size_t ldb,
                       double* c, std::size_t ldc, bool accumulate) {
  __m512d acc[Rows][Vecs];
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) {
      acc[r][v] = _mm512_setzero_pd();
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    __m512d bv[Vecs];
    for (std::size_t v = 0; v < Vecs; ++v) {
      bv[v] = _mm512_loadu_pd(b + p * ldb + 8 * v);
    }
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m512d av = _mm512_set1_pd(a[r * a_rs + p * a_cs]);
      for (std::size_t v = 0; v < Vecs; ++v) {
        acc[r][v] = _mm512_fmadd_pd(av, bv[v], acc[r][v]);
      }
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) {
      double* dst = c + r * ldc + 8 * v;
      _mm512_storeu_pd(dst, accumulate ? _mm512_add_pd(_mm512_loadu_pd(dst), acc[r][v]) : acc[r][v]);
    }
  }
}

// Hot 8 x 16 block with named accumulators; the array form above makes GCC
// write the accumulators back to the stack on every k step.
inline void gemm_8x16(std::size_t k, const double* a, std::size_t a_rs,
                      std::size_t a_cs, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc, bool accumulate) {
  __m512d c00 = _mm512_setzero_pd(), c01 = _mm512_setzero_pd();
  __m512d c10 = _mm512_setzero_pd(), c11 = _mm512_setzero_pd();
  __m512d c20 = _mm512_setzero_pd(), c21 = _mm512_setzero_pd();
  __m512d c30 = _mm512_setzero_pd(), c31 = _mm512_setzero_pd();
  __m512d c40 = _mm512_setzero_pd(), c41 = _mm512_setzero_pd();
  __m512d c50 = _mm512_setzero_pd(), c51 = _mm512_setzero_pd();
  __m512d c60 = _mm512_setzero_pd(), c61 = _mm512_setzero_pd();
  __m512d c70 = _mm512_setzero_pd(), c71 = _mm512_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m512d b0 = _mm512_loadu_pd(b + p * ldb);
    const __m512d b1 = _mm512_loadu_pd(b + p * ldb + 8);
    const double* ap = a + p * a_cs;
    __m512d av;
#define QG_ROW(r)                                  \
    av = _mm512_set1_pd(ap[(r) * a_rs]);           \
    c##r##0 = _mm512_fmadd_pd(av, b0, c##r##0);    \
    c##r##1 = _mm512_fmadd_pd(av, b1, c##r##1);
    QG_ROW(0) QG_ROW(1) QG_ROW(2) QG_ROW(3) QG_ROW(4) QG_ROW(5) QG_ROW(6) QG_ROW(7)
#undef QG_ROW
  }
#define QG_STORE(r)                                                        \
  {                                                                        \
    double* dst = c + (r) * ldc;                                           \
    _mm512_storeu_pd(dst, accumulate ? _mm512_add_pd(_mm512_loadu_pd(dst), c##r##0) : c##r##0); \
    _mm512_storeu_pd(dst + 8, accumulate ? _mm512_add_pd(_mm512_loadu_pd(dst + 8), c##r##1) : c##r##1); \
  }
  QG_STORE(0) QG_STORE(1) QG_STORE(2) QG_STORE(3) QG_STORE(4) QG_STORE(5) QG_STORE(6) QG_STORE(7)
#undef QG_STORE
}

// Column tail narrower than one vector: masked loads and stores.
template <std::size_t Rows>
inline void gemm_masked(std::size_t k, std::size_t width, const double* a,
                        std::size_t a_rs, std::size_t a_cs, const double* b,
                        std::size_t ldb, double* c, std::size_t ldc,
                        bool accumulate) {
  const __mmask8 mask = static_cast<__mmask8>((1u << width) - 1u);
  __m512d acc[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    acc[r] = accumulate ? _mm512_maskz_loadu_pd(mask, c + r * ldc)
                        : _mm512_setzero_pd();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m512d bv = _mm512_maskz_loadu_pd(mask, b + p * ldb);
    for (std::size_t r = 0; r < Rows; ++r) {
      acc[r] = _mm512_fmadd_pd(_mm512_set1_pd(a[r * a_rs + p * a_cs]), bv,
                               acc[r]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    _mm512_mask_storeu_pd(c + r * ldc, mask, acc[r]);
  }
}

template <std::size_t Rows>
inline void gemm_rows(std::size_t n, std::size_t k, const double* a,
                      std::size_t a_rs, std::size_t a_cs, const double* b,
                      std::size_t ldb, double* c, std::size_t ldc,
                      bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    gemm_block<Rows, 2>(k, a, a_rs, a_cs, b + j, ldb, c + j, ldc, accumulate);
  }
  for (; j + 8 <= n; j += 8) {
    gemm_block<Rows, 1>(k, a, a_rs, a_cs, b + j, ldb, c + j, ldc, accumulate);
  }
  if (j < n) {
    gemm_masked<Rows>(k, n - j, a, a_rs, a_cs, b + j, ldb, c + j, ldc,
                      accumulate);
  }
}

void gemm_avx512(std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t a_rs, std::size_t a_cs, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 8 <= m; i += 8) {
    const double* ai = a + i * a_rs;
    double* ci = c + i * ldc;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      gemm_8x16(k, ai, a_rs, a_cs, b + j, ldb, ci + j, ldc, accumulate);
    }
    if (j < n) {
      gemm_rows<8>(n - j, k, ai, a_rs, a_cs, b + j, ldb, ci + j, ldc, accumulate);
    }
  }
  for (; i + 4 <= m; i += 4) {
    gemm_rows<4>(n, k, a + i * a_rs, a_rs, a_cs, b, ldb, c + i * ldc, ldc,
                 accumulate);
  }
  for (; i < m; ++i) {
    gemm_rows<1>(n, k, a + i * a_rs, a_rs, a_cs, b, ldb, c + i * ldc, ldc,
                 accumulate);
  }
}

void bellman_backup_avx512(std::size_t n, const double* reward,
                           const double* discount, const std::uint32_t* target,
                           const double* value, double* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i idx =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(target + i));
    const __m512d v = _mm512_i32gather_pd(idx, value, 8);
    const __m512d boot = _mm512_mul_pd(_mm512_loadu_pd(discount + i), v);
    _mm512_storeu_pd(out + i, _mm512_add_pd(_mm512_loadu_pd(reward + i), boot));
  }
  for (; i < n; ++i) {
    const double bootstrap = discount[i] * value[target[i]];
    out[i] = reward[i] + bootstrap;
  }
}

double max_abs_diff_avx512(std::size_t n, const double* a, const double* b) {
  __m512d worst = _mm512_setzero_pd();
  __mmask8 nan_seen = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d d = _mm512_abs_pd(
        _mm512_sub_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
    nan_seen |= _mm512_cmp_pd_mask(d, d, _CMP_UNORD_Q);
    worst = _mm512_max_pd(worst, d);
  }
  if (nan_seen != 0) return std::numeric_limits<double>::quiet_NaN();
  double result = _mm512_reduce_max_pd(worst);
  for (; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (std::isnan(d)) return d;
    if (d > result) result = d;
  }
  return result;
}

void adam_update_avx512(std::size_t n, double* param, const double* grad,
                        double* m, double* v, double beta1, double beta2,
                        double eps, double lr, double correction1,
                        double correction2) {
  const __m512d b1 = _mm512_set1_pd(beta1);
  const __m512d b2 = _mm512_set1_pd(beta2);
  const __m512d omb1 = _mm512_set1_pd(1.0 - beta1);
  const __m512d omb2 = _mm512_set1_pd(1.0 - beta2);
  const __m512d c1 = _mm512_set1_pd(correction1);
  const __m512d c2 = _mm512_set1_pd(correction2);
  const __m512d ep = _mm512_set1_pd(eps);
  const __m512d rate = _mm512_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d g = _mm512_loadu_pd(grad + i);
    const __m512d mi = _mm512_add_pd(_mm512_mul_pd(b1, _mm512_loadu_pd(m + i)),
                                     _mm512_mul_pd(omb1, g));
    const __m512d vi =
        _mm512_add_pd(_mm512_mul_pd(b2, _mm512_loadu_pd(v + i)),
                      _mm512_mul_pd(omb2, _mm512_mul_pd(g, g)));
    _mm512_storeu_pd(m + i, mi);
    _mm512_storeu_pd(v + i, vi);
    const __m512d step = _mm512_div_pd(
        _mm512_mul_pd(rate, _mm512_mul_pd(mi, c1)),
        _mm512_add_pd(_mm512_sqrt_pd(_mm512_mul_pd(vi, c2)), ep));
    _mm512_storeu_pd(param + i, _mm512_sub_pd(_mm512_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    const double mi = beta1 * m[i] + (1.0 - beta1) * g;
    const double vi = beta2 * v[i] + (1.0 - beta2) * (g * g);
    m[i] = mi;
    v[i] = vi;
    param[i] = param[i] - (lr * (mi * correction1)) /
                              (std::sqrt(vi * correction2) + eps);
  }
}


__m512d tanh_vec(__m512d x) {
  namespace tc = tanh_constants;
  const __m512d a = _mm512_abs_pd(x);

  const __m512d z = _mm512_mul_pd(a, a);
  __m512d p = _mm512_set1_pd(tc::kTaylor[0]);
  for (std::size_t i = 1; i < std::size(tc::kTaylor); ++i) {
    p = _mm512_add_pd(_mm512_mul_pd(p, z), _mm512_set1_pd(tc::kTaylor[i]));
  }
  const __m512d small = _mm512_add_pd(a, _mm512_mul_pd(_mm512_mul_pd(a, z), p));

  const __m512d shifter = _mm512_set1_pd(tc::kShifter);
  const __m512d y = _mm512_mul_pd(_mm512_set1_pd(-2.0),
                                  _mm512_min_pd(a, _mm512_set1_pd(tc::kClamp)));
  const __m512d t = _mm512_add_pd(_mm512_mul_pd(y, _mm512_set1_pd(tc::kInvLn2)), shifter);
  const __m512d n = _mm512_sub_pd(t, shifter);
  const __m512d r =
      _mm512_sub_pd(_mm512_sub_pd(y, _mm512_mul_pd(n, _mm512_set1_pd(tc::kLn2Hi))),
                    _mm512_mul_pd(n, _mm512_set1_pd(tc::kLn2Lo)));
  __m512d q = _mm512_set1_pd(tc::kExp[0]);
  for (std::size_t i = 1; i < std::size(tc::kExp); ++i) {
    q = _mm512_add_pd(_mm512_mul_pd(q, r), _mm512_set1_pd(tc::kExp[i]));
  }
  const __m512i bits = _mm512_slli_epi64(
      _mm512_add_epi64(_mm512_castpd_si512(t), _mm512_set1_epi64(1023)), 52);
  const __m512d e = _mm512_mul_pd(q, _mm512_castsi512_pd(bits));
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d large = _mm512_div_pd(_mm512_sub_pd(one, e), _mm512_add_pd(one, e));

  const __mmask8 use_small = _mm512_cmp_pd_mask(a, _mm512_set1_pd(tc::kSmall), _CMP_LT_OQ);
  const __m512d mag = _mm512_mask_blend_pd(use_small, large, small);
  const __m512i sign = _mm512_and_epi64(_mm512_castpd_si512(x),
                                        _mm512_set1_epi64(INT64_MIN));
  const __m512d out = _mm512_castsi512_pd(_mm512_or_epi64(_mm512_castpd_si512(mag), sign));
  const __mmask8 nan = _mm512_cmp_pd_mask(x, x, _CMP_UNORD_Q);
  return _mm512_mask_blend_pd(nan, out, x);
}

void tanh_inplace_avx512(std::size_t n, double* x) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm512_storeu_pd(x + i, tanh_vec(_mm512_loadu_pd(x + i)));
  if (i < n) {
    const __mmask8 tail = static_cast<__mmask8>((1u << (n - i)) - 1u);
    const __m512d v = _mm512_mask_loadu_pd(_mm512_setzero_pd(), tail, x + i);
    _mm512_mask_storeu_pd(x + i, tail, tanh_vec(v));
  }
}

}  // namespace

KernelTable avx512_table() {
  return KernelTable{Isa::avx512, gemm_avx512, bellman_backup_avx512,
                     max_abs_diff_avx512, adam_update_avx512,
                     tanh_inplace_avx512};
}

}  // namespace qgraph::simd::detail

#endif
