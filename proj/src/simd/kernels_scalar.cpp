#include "qgraph/simd/kernels.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <iterator>

#include "tanh_constants.hpp"

namespace qgraph::simd::detail {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t a_rs, std::size_t a_cs, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = a[i * a_rs + p * a_cs];
      const double* b_row = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
    }
  }
}

void bellman_backup_scalar(std::size_t n, const double* reward,
                           const double* discount, const std::uint32_t* target,
                           const double* value, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double bootstrap = discount[i] * value[target[i]];
    out[i] = reward[i] + bootstrap;
  }
}

double max_abs_diff_scalar(std::size_t n, const double* a, const double* b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > worst || std::isnan(d)) worst = d;
  }
  return worst;
}

void adam_update_scalar(std::size_t n, double* param, const double* grad,
                        double* m, double* v, double beta1, double beta2,
                        double eps, double lr, double correction1,
                        double correction2) {
  const double one_minus_b1 = 1.0 - beta1;
  const double one_minus_b2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    const double mi = beta1 * m[i] + one_minus_b1 * g;
    const double vi = beta2 * v[i] + one_minus_b2 * (g * g);
    m[i] = mi;
    v[i] = vi;
    const double m_hat = mi * correction1;
    const double v_hat = vi * correction2;
    param[i] = param[i] - (lr * m_hat) / (std::sqrt(v_hat) + eps);
  }
}

double tanh_one(double x) {
  namespace tc = tanh_constants;
  const double a = std::fabs(x);

  const double z = a * a;
  double p = tc::kTaylor[0];
  for (std::size_t i = 1; i < std::size(tc::kTaylor); ++i) p = p * z + tc::kTaylor[i];
  const double small = a + (a * z) * p;

  const double y = -2.0 * (a < tc::kClamp ? a : tc::kClamp);
  const double t = y * tc::kInvLn2 + tc::kShifter;
  const double n = t - tc::kShifter;
  const double r = (y - n * tc::kLn2Hi) - n * tc::kLn2Lo;
  double q = tc::kExp[0];
  for (std::size_t i = 1; i < std::size(tc::kExp); ++i) q = q * r + tc::kExp[i];
  const double scale =
      std::bit_cast<double>((std::bit_cast<std::uint64_t>(t) + 1023) << 52);
  const double e = q * scale;
  const double large = (1.0 - e) / (1.0 + e);

  if (std::isnan(x)) return x;
  return std::copysign(a < tc::kSmall ? small : large, x);
}

void tanh_inplace_scalar(std::size_t n, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] = tanh_one(x[i]);
}

}  // namespace

KernelTable scalar_table() {
  return KernelTable{Isa::scalar, gemm_scalar, bellman_backup_scalar,
                     max_abs_diff_scalar, adam_update_scalar, tanh_inplace_scalar};
}

}  // namespace qgraph::simd::detail
