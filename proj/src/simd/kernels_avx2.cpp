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

// Register block of Rows x (4 * Vecs) entries of C, accumulated over k.
template <std::size_t Rows, std::size_t Vecs>
inline void gemm_block(std::size_t k, const double* a, std::size_t a_rs,
                       std::size_t a_cs, const double* b, std::size_t ldb,
                       double* c, std::size_t ldc, bool accumulate) {
  __m256d acc[Rows][Vecs];
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) {
      acc[r][v] = _mm256_setzero_pd();
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    __m256d bv[Vecs];
    for (std::size_t v = 0; v < Vecs; ++v) {
      bv[v] = _mm256_loadu_pd(b + p * ldb + 4 * v);
    }
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + r * a_rs + p * a_cs);
      for (std::size_t v = 0; v < Vecs; ++v) {
        acc[r][v] = _mm256_fmadd_pd(av, bv[v], acc[r][v]);
      }
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) {
      double* dst = c + r * ldc + 4 * v;
      _mm256_storeu_pd(dst, accumulate ? _mm256_add_pd(_mm256_loadu_pd(dst), acc[r][v]) : acc[r][v]);
    }
  }
}

template <std::size_t Rows>
inline void gemm_rows(std::size_t n, std::size_t k, const double* a,
                      std::size_t a_rs, std::size_t a_cs, const double* b,
                      std::size_t ldb, double* c, std::size_t ldc,
                      bool accumulate) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    gemm_block<Rows, 2>(k, a, a_rs, a_cs, b + j, ldb, c + j, ldc, accumulate);
  }
  for (; j + 4 <= n; j += 4) {
    gemm_block<Rows, 1>(k, a, a_rs, a_cs, b + j, ldb, c + j, ldc, accumulate);
  }
  for (; j < n; ++j) {
    for (std::size_t r = 0; r < Rows; ++r) {
      double sum = accumulate ? c[r * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        sum += a[r * a_rs + p * a_cs] * b[p * ldb + j];
      }
      c[r * ldc + j] = sum;
    }
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t a_rs, std::size_t a_cs, const double* b,
               std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    gemm_rows<4>(n, k, a + i * a_rs, a_rs, a_cs, b, ldb, c + i * ldc, ldc,
                 accumulate);
  }
  for (; i < m; ++i) {
    gemm_rows<1>(n, k, a + i * a_rs, a_rs, a_cs, b, ldb, c + i * ldc, ldc,
                 accumulate);
  }
}

void bellman_backup_avx2(std::size_t n, const double* reward,
                         const double* discount, const std::uint32_t* target,
                         const double* value, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i idx =
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(target + i));
    const __m256d v = _mm256_i32gather_pd(value, idx, 8);
    const __m256d boot = _mm256_mul_pd(_mm256_loadu_pd(discount + i), v);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(reward + i), boot));
  }
  for (; i < n; ++i) {
    const double bootstrap = discount[i] * value[target[i]];
    out[i] = reward[i] + bootstrap;
  }
}

double max_abs_diff_avx2(std::size_t n, const double* a, const double* b) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d worst = _mm256_setzero_pd();
  __m256d nan_seen = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_andnot_pd(
        sign, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    nan_seen = _mm256_or_pd(nan_seen, _mm256_cmp_pd(d, d, _CMP_UNORD_Q));
    worst = _mm256_max_pd(worst, d);
  }
  if (_mm256_movemask_pd(nan_seen) != 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, worst);
  double result = lanes[0];
  for (int l = 1; l < 4; ++l) result = lanes[l] > result ? lanes[l] : result;
  for (; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (std::isnan(d)) return d;
    if (d > result) result = d;
  }
  return result;
}

void adam_update_avx2(std::size_t n, double* param, const double* grad,
                      double* m, double* v, double beta1, double beta2,
                      double eps, double lr, double correction1,
                      double correction2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d c1 = _mm256_set1_pd(correction1);
  const __m256d c2 = _mm256_set1_pd(correction2);
  const __m256d ep = _mm256_set1_pd(eps);
  const __m256d rate = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(omb1, g));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                      _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d step = _mm256_div_pd(
        _mm256_mul_pd(rate, _mm256_mul_pd(mi, c1)),
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, c2)), ep));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
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


__m256d tanh_vec(__m256d x) {
  namespace tc = tanh_constants;
  const __m256d sign_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(INT64_MIN));
  const __m256d a = _mm256_andnot_pd(sign_mask, x);

  const __m256d z = _mm256_mul_pd(a, a);
  __m256d p = _mm256_set1_pd(tc::kTaylor[0]);
  for (std::size_t i = 1; i < std::size(tc::kTaylor); ++i) {
    p = _mm256_add_pd(_mm256_mul_pd(p, z), _mm256_set1_pd(tc::kTaylor[i]));
  }
  const __m256d small = _mm256_add_pd(a, _mm256_mul_pd(_mm256_mul_pd(a, z), p));

  const __m256d shifter = _mm256_set1_pd(tc::kShifter);
  const __m256d y = _mm256_mul_pd(_mm256_set1_pd(-2.0),
                                  _mm256_min_pd(a, _mm256_set1_pd(tc::kClamp)));
  const __m256d t = _mm256_add_pd(_mm256_mul_pd(y, _mm256_set1_pd(tc::kInvLn2)), shifter);
  const __m256d n = _mm256_sub_pd(t, shifter);
  const __m256d r =
      _mm256_sub_pd(_mm256_sub_pd(y, _mm256_mul_pd(n, _mm256_set1_pd(tc::kLn2Hi))),
                    _mm256_mul_pd(n, _mm256_set1_pd(tc::kLn2Lo)));
  __m256d q = _mm256_set1_pd(tc::kExp[0]);
  for (std::size_t i = 1; i < std::size(tc::kExp); ++i) {
    q = _mm256_add_pd(_mm256_mul_pd(q, r), _mm256_set1_pd(tc::kExp[i]));
  }
  const __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_castpd_si256(t), _mm256_set1_epi64x(1023)), 52);
  const __m256d e = _mm256_mul_pd(q, _mm256_castsi256_pd(bits));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d large = _mm256_div_pd(_mm256_sub_pd(one, e), _mm256_add_pd(one, e));

  const __m256d use_small = _mm256_cmp_pd(a, _mm256_set1_pd(tc::kSmall), _CMP_LT_OQ);
  const __m256d mag = _mm256_blendv_pd(large, small, use_small);
  const __m256d out = _mm256_or_pd(mag, _mm256_and_pd(x, sign_mask));
  return _mm256_blendv_pd(out, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

void tanh_inplace_avx2(std::size_t n, double* x) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, tanh_vec(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
    _mm256_store_pd(buf, tanh_vec(_mm256_load_pd(buf)));
    for (std::size_t j = i; j < n; ++j) x[j] = buf[j - i];
  }
}

}  // namespace

KernelTable avx2_table() {
  return KernelTable{Isa::avx2, gemm_avx2, bellman_backup_avx2,
                     max_abs_diff_avx2, adam_update_avx2,
                     tanh_inplace_avx2};
}

}  // namespace qgraph::simd::detail

#endif
