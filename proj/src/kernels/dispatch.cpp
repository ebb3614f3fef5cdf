#include <cstdlib>
#include <stdexcept>
#include <string>

#include "devrl/kernels.hpp"

namespace devrl::kernels {

#if defined(DEVRL_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(DEVRL_HAVE_NEON)
const KernelTable& neon_table();
#endif

namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(DEVRL_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(DEVRL_HAVE_NEON)
      return true;  // mandatory on aarch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* detect() {
  if (const char* forced = std::getenv("DEVRL_ISA")) {
    const std::string name(forced);
    if (name == "scalar") return &scalar_table();
    if (name == "avx2" && cpu_has(Isa::Avx2)) return table_for(Isa::Avx2);
    if (name == "neon" && cpu_has(Isa::Neon)) return table_for(Isa::Neon);
  }
  if (cpu_has(Isa::Avx2)) return table_for(Isa::Avx2);
  if (cpu_has(Isa::Neon)) return table_for(Isa::Neon);
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = detect();
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  if (!cpu_has(isa)) return nullptr;
  switch (isa) {
    case Isa::Scalar:
      return &scalar_table();
    case Isa::Avx2:
#if defined(DEVRL_HAVE_AVX2)
      return &avx2_table();
#else
      return nullptr;
#endif
    case Isa::Neon:
#if defined(DEVRL_HAVE_NEON)
      return &neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

bool supported(Isa isa) { return table_for(isa) != nullptr; }

const KernelTable& active() { return *current(); }

void select(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) {
    throw std::invalid_argument("kernel variant not available: " + std::string(isa_name(isa)));
  }
  current() = table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void affine(std::span<const double> w, std::span<const double> bias, std::span<const double> x,
            std::span<double> y) {
  if (bias.size() != y.size() || w.size() != y.size() * x.size()) {
    throw std::invalid_argument("affine: size mismatch");
  }
  active().affine(w.data(), bias.data(), x.data(), y.data(), y.size(), x.size());
}

void affine_transpose_acc(std::span<const double> w, std::span<const double> delta,
                          std::span<double> out) {
  if (w.size() != delta.size() * out.size()) {
    throw std::invalid_argument("affine_transpose_acc: size mismatch");
  }
  active().affine_transpose_acc(w.data(), delta.data(), out.data(), delta.size(), out.size());
}

void outer_acc(std::span<const double> delta, std::span<const double> x, std::span<double> grad) {
  if (grad.size() != delta.size() * x.size()) throw std::invalid_argument("outer_acc: size mismatch");
  active().outer_acc(delta.data(), x.data(), grad.data(), delta.size(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace devrl::kernels
