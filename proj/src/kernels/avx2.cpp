// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "devrl/kernels.hpp"

namespace devrl::kernels {
namespace {

inline __m256i tail_mask(std::size_t remaining) {
  alignas(32) static const std::int64_t lanes[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes + 4 - remaining));
}

inline double horizontal_sum(__m256d v) {
  const __m128d low = _mm256_castpd256_pd128(v);
  const __m128d high = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(low, high);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc[4] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd(),
                    _mm256_setzero_pd()};
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc[0] = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc[0]);
    acc[1] = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc[1]);
    acc[2] = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc[2]);
    acc[3] = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc[3]);
  }
  std::size_t bank = 0;
  for (; i + 4 <= n; i += 4, ++bank) {
    acc[bank] = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc[bank]);
  }
  if (i < n) {
    const __m256i mask = tail_mask(n - i);
    acc[bank] = _mm256_fmadd_pd(_mm256_maskload_pd(a + i, mask), _mm256_maskload_pd(b + i, mask),
                                acc[bank]);
  }
  return horizontal_sum(_mm256_add_pd(_mm256_add_pd(acc[0], acc[1]), _mm256_add_pd(acc[2], acc[3])));
}

void affine_avx2(const double* w, const double* bias, const double* x, double* y,
                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols) + bias[r];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void affine_transpose_acc_avx2(const double* w, const double* delta, double* out,
                               std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(delta[r], w + r * cols, out, cols);
}

void outer_acc_avx2(const double* delta, const double* x, double* grad, std::size_t rows,
                    std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(delta[r], x, grad + r * cols, cols);
}

void adam_avx2(const AdamArgs& a) {
  const __m256d b1 = _mm256_set1_pd(a.beta1);
  const __m256d b2 = _mm256_set1_pd(a.beta2);
  const __m256d one_minus_b1 = _mm256_set1_pd(1.0 - a.beta1);
  const __m256d one_minus_b2 = _mm256_set1_pd(1.0 - a.beta2);
  const __m256d inv_bc1 = _mm256_set1_pd(1.0 / a.bias_correction1);
  const __m256d inv_bc2 = _mm256_set1_pd(1.0 / a.bias_correction2);
  const __m256d lr = _mm256_set1_pd(a.lr);
  const __m256d eps = _mm256_set1_pd(a.eps);
  const __m256d zero = _mm256_setzero_pd();

  std::size_t i = 0;
  for (; i + 4 <= a.n; i += 4) {
    // Lanes with frozen != 0 keep their old parameter and moments.
    std::int32_t packed;
    std::memcpy(&packed, a.frozen + i, sizeof(packed));
    const __m128i f8 = _mm_cvtsi32_si128(packed);
    const __m256i f64 = _mm256_cvtepu8_epi64(f8);
    const __m256d keep = _mm256_castsi256_pd(_mm256_cmpgt_epi64(f64, _mm256_setzero_si256()));

    const __m256d g = _mm256_loadu_pd(a.grads + i);
    const __m256d m_old = _mm256_loadu_pd(a.first_moment + i);
    const __m256d v_old = _mm256_loadu_pd(a.second_moment + i);
    const __m256d p_old = _mm256_loadu_pd(a.params + i);

    const __m256d m = _mm256_add_pd(_mm256_mul_pd(b1, m_old), _mm256_mul_pd(one_minus_b1, g));
    const __m256d v =
        _mm256_add_pd(_mm256_mul_pd(b2, v_old), _mm256_mul_pd(_mm256_mul_pd(one_minus_b2, g), g));
    const __m256d m_hat = _mm256_mul_pd(m, inv_bc1);
    const __m256d v_hat = _mm256_mul_pd(v, inv_bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_max_pd(v_hat, zero)), eps);
    const __m256d p = _mm256_sub_pd(p_old, _mm256_div_pd(_mm256_mul_pd(lr, m_hat), denom));

    _mm256_storeu_pd(a.first_moment + i, _mm256_blendv_pd(m, m_old, keep));
    _mm256_storeu_pd(a.second_moment + i, _mm256_blendv_pd(v, v_old, keep));
    _mm256_storeu_pd(a.params + i, _mm256_blendv_pd(p, p_old, keep));
  }
  for (; i < a.n; ++i) {
    if (a.frozen[i]) continue;
    const double g = a.grads[i];
    a.first_moment[i] = a.beta1 * a.first_moment[i] + (1.0 - a.beta1) * g;
    a.second_moment[i] = a.beta2 * a.second_moment[i] + (1.0 - a.beta2) * g * g;
    const double m_hat = a.first_moment[i] / a.bias_correction1;
    const double v_hat = a.second_moment[i] / a.bias_correction2;
    a.params[i] -= a.lr * m_hat / (std::sqrt(v_hat) + a.eps);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::Avx2,     dot_avx2,       affine_avx2, affine_transpose_acc_avx2,
                                 outer_acc_avx2, axpy_avx2, adam_avx2};
  return table;
}

}  // namespace devrl::kernels
