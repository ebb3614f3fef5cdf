#include "devrl/kernels.hpp"

#include <cmath>

namespace devrl::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void affine_scalar(const double* w, const double* bias, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols) + bias[r];
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine_transpose_acc_scalar(const double* w, const double* delta, double* out,
                                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(delta[r], w + r * cols, out, cols);
}

void outer_acc_scalar(const double* delta, const double* x, double* grad, std::size_t rows,
                      std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(delta[r], x, grad + r * cols, cols);
}

void adam_scalar(const AdamArgs& a) {
  for (std::size_t i = 0; i < a.n; ++i) {
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

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar,          dot_scalar,       affine_scalar,
                                 affine_transpose_acc_scalar, outer_acc_scalar, axpy_scalar,
                                 adam_scalar};
  return table;
}

}  // namespace devrl::kernels
