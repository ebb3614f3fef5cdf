#include <doctest.h>

#include <cmath>
#include <sstream>

#include "devrl/error.hpp"
#include "devrl/transfer.hpp"

using namespace devrl;

namespace {

Mlp random_quad_actor(Rng& rng) {
  Mlp net({18, 64, 64, 4}, OutputActivation::Tanh);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& p : net.parameters()) p = u(rng);
  return net;
}

Mlp random_quad_critic(Rng& rng) {
  Mlp net({18, 64, 64, 1}, OutputActivation::Identity);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& p : net.parameters()) p = u(rng);
  return net;
}

// Hidden activations after the second layer, computed by hand.
std::vector<double> hidden2(const Mlp& net, const std::vector<double>& x) {
  std::vector<double> cur = x;
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t rows = net.dims()[l + 1], cols = net.dims()[l];
    std::vector<double> next(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = net.bias(l)[r];
      for (std::size_t c = 0; c < cols; ++c) s += net.weights(l)[r * cols + c] * cur[c];
      next[r] = std::tanh(s);
    }
    cur = next;
  }
  return cur;
}

}  // namespace

TEST_CASE("actor transfer layout and counts") {
  Rng rng(1);
  const Mlp quad = random_quad_actor(rng);
  const TransferredNetwork t = build_tilt_actor(quad, rng);
  const Mlp& tilt = t.net;
  CHECK(tilt.dims() == std::vector<std::size_t>{22, 64, 64, 8});
  CHECK(tilt.frozen_count() == 18 * 64 + 64 + 64 * 64 + 64);
  CHECK(tilt.frozen_count() == 5376);
  CHECK(t.report.count(Provenance::TransferredFrozen) == 5376);
  CHECK(t.report.total() == tilt.parameter_count());

  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 22; ++c) {
      const std::size_t i = tilt.weight_offset(0) + r * 22 + c;
      if (c < 18) {
        CHECK(tilt.parameters()[i] == quad.weights(0)[r * 18 + c]);
        CHECK(tilt.frozen_mask()[i] == 1);
      } else {
        CHECK(std::abs(tilt.parameters()[i]) <= xavier_bound(64, 22));
        CHECK(tilt.frozen_mask()[i] == 0);
      }
    }
  }
  for (std::size_t i = 0; i < 64 * 64; ++i) CHECK(tilt.weights(1)[i] == quad.weights(1)[i]);
  for (std::size_t i = 0; i < 64; ++i) CHECK(tilt.bias(1)[i] == quad.bias(1)[i]);
  for (double w : tilt.weights(2)) CHECK(std::abs(w) <= xavier_bound(8, 64));
  for (double b : tilt.bias(2)) CHECK(b == 0.0);
}

TEST_CASE("zero quad actor stays zero in transferred blocks") {
  Rng rng(2);
  const Mlp quad({18, 64, 64, 4}, OutputActivation::Tanh);
  const TransferredNetwork t = build_tilt_actor(quad, rng);
  for (std::size_t i = 0; i < t.net.parameter_count(); ++i) {
    if (t.net.frozen_mask()[i]) CHECK(t.net.parameters()[i] == 0.0);
  }
}

TEST_CASE("block identity on shared inputs") {
  Rng rng(3);
  const Mlp quad = random_quad_actor(rng);
  TransferredNetwork t = build_tilt_actor(quad, rng);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 18; c < 22; ++c) t.net.weights(0)[r * 22 + c] = 0.0;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x18(18);
    for (double& v : x18) v = u(rng);
    std::vector<double> x22 = x18;
    for (int j = 0; j < 4; ++j) x22.push_back(u(rng));
    Mlp::Activations qa, ta;
    quad.forward(x18, qa);
    t.net.forward(x22, ta);
    CHECK(ta.values[2] == qa.values[2]);
    for (double y : ta.values.back()) {
      CHECK(y > -1.0);
      CHECK(y < 1.0);
    }
  }
  // With e_tilt = 0 the fresh columns do not matter either.
  const TransferredNetwork fresh = build_tilt_actor(quad, rng);
  std::vector<double> x(22, 0.0);
  for (std::size_t i = 0; i < 18; ++i) x[i] = u(rng);
  const std::vector<double> x18(x.begin(), x.begin() + 18);
  Mlp::Activations fa, qa;
  fresh.net.forward(x, fa);
  quad.forward(x18, qa);
  CHECK(fa.values[2] == qa.values[2]);
  const auto by_hand = hidden2(quad, x18);
  for (std::size_t i = 0; i < 64; ++i) CHECK(fa.values[2][i] == doctest::Approx(by_hand[i]).epsilon(1e-13));
}

TEST_CASE("critic transfer") {
  Rng rng(4);
  const Mlp quad = random_quad_critic(rng);
  const TransferredNetwork t = build_tilt_critic(quad, rng);
  CHECK(t.net.dims() == std::vector<std::size_t>{22, 64, 64, 1});
  CHECK(t.net.frozen_count() == 0);
  CHECK(t.report.count(Provenance::TransferredFrozen) == 0);
  CHECK(t.report.total() == (22 * 64 + 64) + (64 * 64 + 64) + (64 + 1));
  CHECK(t.report.count(Provenance::FreshXavier) == 22 * 64 + 64);
  for (std::size_t l = 1; l < 3; ++l) {
    const auto a = t.net.weights(l), b = quad.weights(l);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    const auto c = t.net.bias(l), d = quad.bias(l);
    CHECK(std::equal(c.begin(), c.end(), d.begin(), d.end()));
  }
  for (double w : t.net.weights(0)) CHECK(std::abs(w) <= xavier_bound(64, 22));
}

TEST_CASE("transfer options") {
  Rng rng(5);
  const Mlp quad = random_quad_actor(rng);
  TransferOptions zero;
  zero.zero_and_freeze_tilt_columns = true;
  const TransferredNetwork z = build_tilt_actor(quad, rng, zero);
  CHECK(z.net.frozen_count() == 5376 + 64 * 4);
  CHECK(z.report.total() == z.net.parameter_count());
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 18; c < 22; ++c) CHECK(z.net.weights(0)[r * 22 + c] == 0.0);

  TransferOptions rows;
  rows.copy_motor_output_rows = true;
  const TransferredNetwork m = build_tilt_actor(quad, rng, rows);
  CHECK(m.net.frozen_count() == 5376);
  CHECK(m.report.total() == m.net.parameter_count());
  for (std::size_t i = 0; i < 4 * 64; ++i) CHECK(m.net.weights(2)[i] == quad.weights(2)[i]);
  CHECK(m.report.count(Provenance::TransferredTrainable) == 4 * 64 + 4);
}

TEST_CASE("shape checks") {
  Rng rng(6);
  const Mlp eight({18, 64, 64, 8}, OutputActivation::Tanh);
  try {
    build_tilt_actor(eight, rng);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
  }
  const Mlp wide({22, 64, 64, 4}, OutputActivation::Tanh);
  CHECK_THROWS_AS(build_tilt_actor(wide, rng), Error);
  const Mlp critic_out2({18, 64, 64, 2}, OutputActivation::Identity);
  CHECK_THROWS_AS(build_tilt_critic(critic_out2, rng), Error);
}

TEST_CASE("report formats") {
  Rng rng(7);
  const TransferredNetwork a = build_tilt_actor(random_quad_actor(rng), rng);
  const TransferredNetwork c = build_tilt_critic(random_quad_critic(rng), rng);
  std::ostringstream text;
  write_transfer_report_text(text, a.report);
  CHECK(text.str().find("5376") != std::string::npos);
  std::ostringstream csv;
  const std::vector<TransferReport> both{a.report, c.report};
  write_transfer_report_csv(csv, both);
  const std::string s = csv.str();
  CHECK(s.substr(0, s.find('\n')) == "network,layer,block,category,count");
  std::size_t lines = 0;
  for (char ch : s) lines += ch == '\n';
  CHECK(lines == 1 + a.report.entries.size() + c.report.entries.size());
}

TEST_CASE("developmental training keeps frozen weights and spends both budgets") {
  EnvSettings settings;
  TrainConfig quad_cfg;
  quad_cfg.total_steps = 512;
  quad_cfg.rollout_horizon = 256;
  quad_cfg.num_envs = 4;
  quad_cfg.epochs_per_update = 2;
  quad_cfg.minibatch_size = 64;
  quad_cfg.lr0 = 1e-3;
  quad_cfg.seed = 3;
  TrainConfig tilt_cfg = quad_cfg;
  tilt_cfg.total_steps = 768;
  tilt_cfg.seed = 4;

  const DevelopmentalResult r = developmental_train(settings, quad_cfg, tilt_cfg);
  CHECK(r.quad.env_steps + r.tilt.env_steps == 512 + 768);
  REQUIRE(r.logs.size() == 2);
  CHECK(r.logs[0].stage == "quad");
  CHECK(r.logs[1].stage == "tilt");
  CHECK(r.actor_report.count(Provenance::TransferredFrozen) == 5376);

  const Mlp& quad = r.quad.nets.actor;
  const Mlp& tilt = r.tilt.nets.actor;
  CHECK(tilt.frozen_count() == 5376);
  for (std::size_t rr = 0; rr < 64; ++rr)
    for (std::size_t c = 0; c < 18; ++c)
      CHECK(tilt.weights(0)[rr * 22 + c] == quad.weights(0)[rr * 18 + c]);
  const auto w1 = tilt.weights(1), q1 = quad.weights(1);
  CHECK(std::equal(w1.begin(), w1.end(), q1.begin(), q1.end()));

  // Trainable parts did move.
  Rng rng = make_rng(tilt_cfg.seed, Stream::Transfer);
  const TransferredNetwork initial = build_tilt_actor(quad, rng);
  CHECK(initial.net.weights(2)[0] != tilt.weights(2)[0]);
}
