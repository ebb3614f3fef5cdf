#pragma once

// Dense double-precision kernels used by the network engine.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is
// picked once at startup from CPUID; DEVRL_ISA=scalar forces the reference
// path. Variants agree with the reference up to floating-point reassociation.
//
// Reduction order contract: the scalar dot product sums left to right; the
// vector variants put element i in lane (i % 4) of accumulator bank
// ((i / 4) % 4) and combine the banks last. In both, appending zeros to the
// inputs never changes the result. Transfer block identity relies on this.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace devrl::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct AdamArgs {
  double* params;
  const double* grads;
  double* first_moment;
  double* second_moment;
  const std::uint8_t* frozen;  // 1 = leave the parameter and its moments untouched
  std::size_t n;
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[r] = bias[r] + sum_c w[r * cols + c] * x[c]
  void (*affine)(const double* w, const double* bias, const double* x, double* y,
                 std::size_t rows, std::size_t cols);
  // out[c] += sum_r w[r * cols + c] * delta[r]
  void (*affine_transpose_acc)(const double* w, const double* delta, double* out,
                               std::size_t rows, std::size_t cols);
  // grad[r * cols + c] += delta[r] * x[c]
  void (*outer_acc)(const double* delta, const double* x, double* grad, std::size_t rows,
                    std::size_t cols);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*adam)(const AdamArgs& args);
};

const KernelTable& scalar_table();
// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* table_for(Isa isa);
bool supported(Isa isa);

// The table chosen for this process.
const KernelTable& active();

// Overrides the process-wide choice; throws std::invalid_argument if unsupported.
void select(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
void affine(std::span<const double> w, std::span<const double> bias, std::span<const double> x,
            std::span<double> y);
void affine_transpose_acc(std::span<const double> w, std::span<const double> delta,
                          std::span<double> out);
void outer_acc(std::span<const double> delta, std::span<const double> x, std::span<double> grad);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace devrl::kernels
