#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <vector>

#include "devrl/kernels.hpp"

using namespace devrl::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Tolerance for sums that differ only by association order.
double tol(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return 1e-14 * (s + 1.0);
}

std::vector<const KernelTable*> variants() {
  std::vector<const KernelTable*> out{&scalar_table()};
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (const KernelTable* t = table_for(isa)) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar dot is a left-to-right sum") {
  const std::vector<double> a{1e16, 1.0, -1e16, 1.0};
  const std::vector<double> b{1.0, 1.0, 1.0, 1.0};
  double expect = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) expect += a[i] * b[i];
  CHECK(scalar_table().dot(a.data(), b.data(), a.size()) == expect);
}

TEST_CASE("vector variants match the scalar reference") {
  std::mt19937_64 rng(7);
  const KernelTable& ref = scalar_table();
  for (const KernelTable* t : variants()) {
    CAPTURE(isa_name(t->isa));
    for (std::size_t n = 0; n <= 70; ++n) {
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, n);
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol(a, b));

      const auto x = random_vec(rng, n);
      auto y1 = random_vec(rng, n);
      auto y2 = y1;
      t->axpy(0.37, x.data(), y1.data(), n);
      ref.axpy(0.37, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y2[i])));
    }
    for (std::size_t rows : {1u, 3u, 8u, 13u}) {
      for (std::size_t cols : {1u, 4u, 7u, 18u, 22u, 64u}) {
        const auto w = random_vec(rng, rows * cols);
        const auto bias = random_vec(rng, rows);
        const auto x = random_vec(rng, cols);
        std::vector<double> y1(rows), y2(rows);
        t->affine(w.data(), bias.data(), x.data(), y1.data(), rows, cols);
        ref.affine(w.data(), bias.data(), x.data(), y2.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r) CHECK(std::abs(y1[r] - y2[r]) <= 1e-12);

        const auto delta = random_vec(rng, rows);
        auto o1 = random_vec(rng, cols);
        auto o2 = o1;
        t->affine_transpose_acc(w.data(), delta.data(), o1.data(), rows, cols);
        ref.affine_transpose_acc(w.data(), delta.data(), o2.data(), rows, cols);
        for (std::size_t c = 0; c < cols; ++c) CHECK(std::abs(o1[c] - o2[c]) <= 1e-12);

        auto g1 = random_vec(rng, rows * cols);
        auto g2 = g1;
        t->outer_acc(delta.data(), x.data(), g1.data(), rows, cols);
        ref.outer_acc(delta.data(), x.data(), g2.data(), rows, cols);
        for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-14);
      }
    }
  }
}

TEST_CASE("appending zeros leaves dot products bit-identical") {
  std::mt19937_64 rng(11);
  for (const KernelTable* t : variants()) {
    CAPTURE(isa_name(t->isa));
    for (std::size_t n = 1; n <= 40; ++n) {
      auto a = random_vec(rng, n);
      auto b = random_vec(rng, n);
      const double base = t->dot(a.data(), b.data(), n);
      for (std::size_t pad = 1; pad <= 9; ++pad) {
        auto ap = a;
        auto bp = b;
        ap.resize(n + pad, 0.0);
        bp.resize(n + pad);
        for (std::size_t i = n; i < n + pad; ++i) bp[i] = 3.0 * static_cast<double>(i);
        CHECK(t->dot(ap.data(), bp.data(), n + pad) == base);
      }
    }
  }
}

TEST_CASE("adam kernels agree and skip frozen entries") {
  std::mt19937_64 rng(3);
  for (const KernelTable* t : variants()) {
    CAPTURE(isa_name(t->isa));
    for (std::size_t n : {1u, 5u, 16u, 37u}) {
      auto p = random_vec(rng, n);
      const auto g = random_vec(rng, n);
      auto m = random_vec(rng, n);
      auto v = random_vec(rng, n);
      for (double& x : v) x = std::abs(x);
      std::vector<std::uint8_t> frozen(n);
      for (std::size_t i = 0; i < n; ++i) frozen[i] = (i % 3 == 1);
      auto p_ref = p, m_ref = m, v_ref = v;
      const auto p0 = p, m0 = m, v0 = v;
      AdamArgs args{p.data(), g.data(), m.data(), v.data(), frozen.data(), n, 1e-3, 0.9, 0.999,
                    1e-8, 1 - 0.9, 1 - 0.999};
      t->adam(args);
      AdamArgs ref_args = args;
      ref_args.params = p_ref.data();
      ref_args.first_moment = m_ref.data();
      ref_args.second_moment = v_ref.data();
      scalar_table().adam(ref_args);
      for (std::size_t i = 0; i < n; ++i) {
        if (frozen[i]) {
          CHECK(p[i] == p0[i]);
          CHECK(m[i] == m0[i]);
          CHECK(v[i] == v0[i]);
        } else {
          // Independent closed form for one step.
          const double mi = 0.9 * m0[i] + 0.1 * g[i];
          const double vi = 0.999 * v0[i] + 0.001 * g[i] * g[i];
          const double expect = p0[i] - 1e-3 * (mi / 0.1) / (std::sqrt(vi / 0.001) + 1e-8);
          CHECK(p[i] == doctest::Approx(expect).epsilon(1e-12));
          CHECK(p[i] == doctest::Approx(p_ref[i]).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("dispatch honours DEVRL_ISA and size checks") {
  const char* forced = std::getenv("DEVRL_ISA");
  if (forced && std::string(forced) == "scalar") CHECK(active().isa == Isa::Scalar);
  CHECK(supported(Isa::Scalar));
  const std::vector<double> a(3, 1.0), b(4, 1.0);
  CHECK_THROWS_AS(dot(a, b), std::invalid_argument);
  const Isa before = active().isa;
  select(Isa::Scalar);
  CHECK(active().isa == Isa::Scalar);
  select(before);
}
