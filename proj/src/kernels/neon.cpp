#include <arm_neon.h>

#include <cmath>

#include "devrl/kernels.hpp"

namespace devrl::kernels {
namespace {

// A "block" of four doubles is held as two float64x2_t halves so the bank
// layout matches the AVX2 variant.
struct Block {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
};

inline void fma_block(Block& acc, const double* a, const double* b) {
  acc.lo = vfmaq_f64(acc.lo, vld1q_f64(a), vld1q_f64(b));
  acc.hi = vfmaq_f64(acc.hi, vld1q_f64(a + 2), vld1q_f64(b + 2));
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  Block acc[4];
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    fma_block(acc[0], a + i, b + i);
    fma_block(acc[1], a + i + 4, b + i + 4);
    fma_block(acc[2], a + i + 8, b + i + 8);
    fma_block(acc[3], a + i + 12, b + i + 12);
  }
  std::size_t bank = 0;
  for (; i + 4 <= n; i += 4, ++bank) fma_block(acc[bank], a + i, b + i);
  if (i < n) {
    double ta[4] = {0.0, 0.0, 0.0, 0.0};
    double tb[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; i + k < n; ++k) {
      ta[k] = a[i + k];
      tb[k] = b[i + k];
    }
    fma_block(acc[bank], ta, tb);
  }
  const float64x2_t lo = vaddq_f64(vaddq_f64(acc[0].lo, acc[1].lo), vaddq_f64(acc[2].lo, acc[3].lo));
  const float64x2_t hi = vaddq_f64(vaddq_f64(acc[0].hi, acc[1].hi), vaddq_f64(acc[2].hi, acc[3].hi));
  const float64x2_t pair = vaddq_f64(lo, hi);
  return vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
}

void affine_neon(const double* w, const double* bias, const double* x, double* y,
                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(w + r * cols, x, cols) + bias[r];
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void affine_transpose_acc_neon(const double* w, const double* delta, double* out,
                               std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_neon(delta[r], w + r * cols, out, cols);
}

void outer_acc_neon(const double* delta, const double* x, double* grad, std::size_t rows,
                    std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_neon(delta[r], x, grad + r * cols, cols);
}

void adam_neon(const AdamArgs& a) {
  const float64x2_t b1 = vdupq_n_f64(a.beta1);
  const float64x2_t b2 = vdupq_n_f64(a.beta2);
  const float64x2_t c1 = vdupq_n_f64(1.0 - a.beta1);
  const float64x2_t c2 = vdupq_n_f64(1.0 - a.beta2);
  const float64x2_t inv_bc1 = vdupq_n_f64(1.0 / a.bias_correction1);
  const float64x2_t inv_bc2 = vdupq_n_f64(1.0 / a.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(a.lr);
  const float64x2_t eps = vdupq_n_f64(a.eps);
  std::size_t i = 0;
  for (; i + 2 <= a.n; i += 2) {
    const uint64x2_t keep = {a.frozen[i] ? ~0ULL : 0ULL, a.frozen[i + 1] ? ~0ULL : 0ULL};
    const float64x2_t g = vld1q_f64(a.grads + i);
    const float64x2_t m_old = vld1q_f64(a.first_moment + i);
    const float64x2_t v_old = vld1q_f64(a.second_moment + i);
    const float64x2_t p_old = vld1q_f64(a.params + i);
    const float64x2_t m = vaddq_f64(vmulq_f64(b1, m_old), vmulq_f64(c1, g));
    const float64x2_t v = vaddq_f64(vmulq_f64(b2, v_old), vmulq_f64(vmulq_f64(c2, g), g));
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vmulq_f64(v, inv_bc2)), eps);
    const float64x2_t p = vsubq_f64(p_old, vdivq_f64(vmulq_f64(lr, vmulq_f64(m, inv_bc1)), denom));
    vst1q_f64(a.first_moment + i, vbslq_f64(keep, m_old, m));
    vst1q_f64(a.second_moment + i, vbslq_f64(keep, v_old, v));
    vst1q_f64(a.params + i, vbslq_f64(keep, p_old, p));
  }
  for (; i < a.n; ++i) {
    if (a.frozen[i]) continue;
    const double g = a.grads[i];
    a.first_moment[i] = a.beta1 * a.first_moment[i] + (1.0 - a.beta1) * g;
    a.second_moment[i] = a.beta2 * a.second_moment[i] + (1.0 - a.beta2) * g * g;
    a.params[i] -= a.lr * (a.first_moment[i] / a.bias_correction1) /
                   (std::sqrt(a.second_moment[i] / a.bias_correction2) + a.eps);
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Isa::Neon,     dot_neon,       affine_neon, affine_transpose_acc_neon,
                                 outer_acc_neon, axpy_neon, adam_neon};
  return table;
}

}  // namespace devrl::kernels
