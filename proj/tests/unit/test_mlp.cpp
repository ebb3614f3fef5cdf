#include <doctest.h>

#include <cmath>
#include <numbers>

#include "devrl/error.hpp"
#include "devrl/mlp.hpp"

using namespace devrl;

namespace {

std::vector<double> random_input(Rng& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> x(n);
  for (double& v : x) v = u(rng);
  return x;
}

// Weights large enough that tanh is well inside its nonlinear range.
Mlp random_net(Rng& rng, std::vector<std::size_t> dims, OutputActivation act) {
  Mlp net(std::move(dims), act);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (double& p : net.parameters()) p = u(rng);
  return net;
}

}  // namespace

TEST_CASE("forward examples") {
  Mlp zero({18, 64, 64, 4}, OutputActivation::Tanh);
  const std::vector<double> x(18, 0.7);
  for (double y : zero.forward(x)) CHECK(y == 0.0);

  Mlp tiny({1, 1, 1}, OutputActivation::Tanh);
  for (std::size_t l = 0; l < 2; ++l) tiny.weights(l)[0] = 1.0;
  const std::vector<double> x0{0.0};
  CHECK(tiny.forward(x0)[0] == 0.0);
  const std::vector<double> x1{0.5};
  CHECK(tiny.forward(x1)[0] == doctest::Approx(std::tanh(std::tanh(0.5))).epsilon(1e-15));

  Rng rng(1);
  Mlp actor = random_net(rng, {18, 64, 64, 4}, OutputActivation::Tanh);
  for (int i = 0; i < 200; ++i) {
    for (double y : actor.forward(random_input(rng, 18, 1e3))) {
      CHECK(y > -1.0);
      CHECK(y < 1.0);
    }
  }
  const std::vector<double> bad(17, 0.0);
  CHECK_THROWS_AS(actor.forward(bad), Error);
}

TEST_CASE("linear layer gradient is the input") {
  Mlp lin({3, 1}, OutputActivation::Identity);
  const std::vector<double> x{0.5, -2.0, 3.0};
  const std::vector<double> up{1.0};
  const auto g = lin.gradients(x, up);
  CHECK(g[0] == 0.5);
  CHECK(g[1] == -2.0);
  CHECK(g[2] == 3.0);
  CHECK(g[3] == 1.0);
}

TEST_CASE("gradients match central differences on 100 random nets") {
  Rng rng(42);
  std::uniform_int_distribution<std::size_t> width(1, 9);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    std::vector<std::size_t> dims{width(rng)};
    const std::size_t hidden = 1 + n % 3;
    for (std::size_t h = 0; h < hidden; ++h) dims.push_back(width(rng));
    dims.push_back(width(rng));
    const auto act = n % 2 ? OutputActivation::Tanh : OutputActivation::Identity;
    Mlp net = random_net(rng, dims, act);
    const auto x = random_input(rng, dims.front());
    const auto up = random_input(rng, dims.back());
    const auto g = net.gradients(x, up);

    auto objective = [&](const Mlp& m) {
      const auto y = m.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
      return s;
    };
    const double h = 1e-5;
    for (std::size_t i = 0; i < net.parameter_count(); ++i) {
      Mlp plus = net, minus = net;
      plus.parameters()[i] += h;
      minus.parameters()[i] -= h;
      const double fd = (objective(plus) - objective(minus)) / (2.0 * h);
      const double rel = std::abs(fd - g[i]) / std::max(1.0, std::abs(fd) + std::abs(g[i]));
      worst = std::max(worst, rel);
    }
  }
  CAPTURE(worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("frozen parameters get zero gradient and never move") {
  Rng rng(3);
  Mlp net = random_net(rng, {5, 7, 3}, OutputActivation::Tanh);
  for (auto& f : net.frozen_mask()) f = 1;
  const auto g = net.gradients(random_input(rng, 5), random_input(rng, 3));
  for (double v : g) CHECK(v == 0.0);

  Mlp part = random_net(rng, {5, 7, 3}, OutputActivation::Tanh);
  for (std::size_t i = 0; i < part.parameter_count(); i += 3) part.frozen_mask()[i] = 1;
  const Mlp before = part;
  AdamState opt(part.parameter_count());
  for (int k = 0; k < 50; ++k) {
    const auto gk = part.gradients(random_input(rng, 5), random_input(rng, 3));
    adam_step(part, opt, gk, 1e-2);
  }
  for (std::size_t i = 0; i < part.parameter_count(); ++i) {
    if (part.frozen_mask()[i]) {
      CHECK(part.parameters()[i] == before.parameters()[i]);
    }
  }
  CHECK(part.frozen_count() == (part.parameter_count() + 2) / 3);
}

TEST_CASE("adam closed form") {
  Mlp net({1, 1}, OutputActivation::Identity);
  AdamState opt(net.parameter_count());
  const std::vector<double> zero(2, 0.0);
  adam_step(net, opt, zero, 0.1);
  CHECK(net.parameters()[0] == 0.0);
  CHECK(net.parameters()[1] == 0.0);

  Mlp one({1, 1}, OutputActivation::Identity);
  AdamState o2(one.parameter_count());
  const std::vector<double> g{1.0, 0.0};
  const double lr = 1e-3;
  adam_step(one, o2, g, lr);
  // m_hat = 1, v_hat = 1, step = lr / (1 + eps)
  CHECK(one.parameters()[0] == doctest::Approx(-lr / (1.0 + 1e-8)).epsilon(1e-12));
  double expect = one.parameters()[0];
  for (int t = 2; t <= 20; ++t) {
    adam_step(one, o2, g, lr);
    // With a constant gradient both corrected moments stay at 1.
    expect -= lr / (1.0 + 1e-8);
    CHECK(one.parameters()[0] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("xavier bound and statistics") {
  CHECK(xavier_bound(64, 64) == 0.1);
  CHECK(xavier_bound(1, 1) == 0.1);
  CHECK(xavier_bound(400, 400) == doctest::Approx(std::sqrt(6.0 / 800.0)));
  Rng rng(8);
  const auto w = xavier_init(64, 64, rng);
  for (double v : w) {
    CHECK(v >= -0.1);
    CHECK(v <= 0.1);
  }
  const auto big = xavier_init(400, 250, rng);
  double sum = 0.0;
  for (double v : big) sum += v;
  const double mean = sum / big.size();
  const double sd = 0.1 / std::sqrt(3.0) / std::sqrt(static_cast<double>(big.size()));
  CHECK(std::abs(mean) <= 3.0 * sd);

  Mlp net = Mlp::xavier({4, 8, 2}, OutputActivation::Tanh, rng);
  for (double b : net.bias(0)) CHECK(b == 0.0);
  for (double b : net.bias(1)) CHECK(b == 0.0);
}

TEST_CASE("gaussian log density") {
  const double ln2pi = std::log(2.0 * std::numbers::pi);
  const std::vector<double> mean(8, 0.3);
  CHECK(gaussian_log_prob(mean, 1.0, mean) == doctest::Approx(-4.0 * ln2pi).epsilon(1e-14));
  CHECK(gaussian_log_prob(mean, 1.0, mean) == doctest::Approx(-7.35151).epsilon(1e-6));
  auto a = mean;
  a[0] += 1.0;
  CHECK(gaussian_log_prob(mean, 1.0, a) ==
        doctest::Approx(-4.0 * ln2pi - 0.5).epsilon(1e-14));
  const std::vector<double> m1{0.0};
  CHECK(gaussian_log_prob(m1, 2.0, m1) ==
        doctest::Approx(-0.5 * ln2pi - std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("accumulated gradients equal per-sample gradients") {
  Rng rng(12);
  Mlp net = random_net(rng, {6, 5, 4, 2}, OutputActivation::Tanh);
  net.frozen_mask()[3] = 1;
  std::vector<double> acc(net.parameter_count(), 0.0), sum(net.parameter_count(), 0.0);
  for (int i = 0; i < 10; ++i) {
    const auto x = random_input(rng, 6);
    const auto up = random_input(rng, 2);
    Mlp::Activations cache;
    net.forward(x, cache);
    CHECK(cache.values.back() == net.forward(x));
    net.accumulate_gradients(cache, up, acc);
    const auto g = net.gradients(x, up);
    for (std::size_t k = 0; k < g.size(); ++k) sum[k] += g[k];
  }
  net.mask_frozen(acc);
  CHECK(acc[3] == 0.0);
  for (std::size_t k = 0; k < acc.size(); ++k) CHECK(acc[k] == doctest::Approx(sum[k]).epsilon(1e-12));
}
