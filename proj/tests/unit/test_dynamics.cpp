#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "devrl/dynamics.hpp"
#include "devrl/error.hpp"

using namespace devrl;
using Eigen::Vector3d;
using Eigen::Vector4d;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(const RigidState& a, const RigidState& b) {
  double d = 0.0;
  d = std::max(d, (a.position_m - b.position_m).cwiseAbs().maxCoeff());
  d = std::max(d, (a.velocity_mps - b.velocity_mps).cwiseAbs().maxCoeff());
  d = std::max(d, (a.orientation.coeffs() - b.orientation.coeffs()).cwiseAbs().maxCoeff());
  d = std::max(d, (a.body_rates_radps - b.body_rates_radps).cwiseAbs().maxCoeff());
  d = std::max(d, (a.tilt_angles_rad - b.tilt_angles_rad).cwiseAbs().maxCoeff());
  d = std::max(d, (a.thrusts_n - b.thrusts_n).cwiseAbs().maxCoeff());
  return d;
}

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

// Plain plus-configuration quadcopter, written independently of body_wrench.
Wrench quad_oracle(const Vector4d& f, const SimParams& p) {
  Wrench w;
  w.force_body = Vector3d(0.0, 0.0, f.sum());
  const double l = p.arm_length_m;
  const double k = p.moment_ratio_m;
  w.torque_body = Vector3d(l * f[1] - l * f[3], l * f[2] - l * f[0],
                           k * (f[0] * p.rotor_spin_signs[0] + f[1] * p.rotor_spin_signs[1] +
                                f[2] * p.rotor_spin_signs[2] + f[3] * p.rotor_spin_signs[3]));
  return w;
}

RigidState random_smooth_state(std::mt19937_64& rng, const SimParams& p) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RigidState s;
  s.position_m = Vector3d(u(rng), u(rng), 5.0 + u(rng));
  s.velocity_mps = Vector3d(u(rng), u(rng), u(rng));
  s.orientation = random_quat(rng);
  s.body_rates_radps = 2.0 * Vector3d(u(rng), u(rng), u(rng));
  for (int i = 0; i < 4; ++i) {
    s.tilt_angles_rad[i] = 0.5 * u(rng);
    s.thrusts_n[i] = p.hover_thrust_n() + 2.0 * u(rng);
  }
  return s;
}

}  // namespace

TEST_CASE("hover thrust") {
  SimParams p;
  CHECK(p.hover_thrust_n() == doctest::Approx(3.67875).epsilon(1e-15));
}

TEST_CASE("body wrench examples") {
  SimParams p;
  RigidState s = hover_state(p, Vector3d(0, 0, 5));
  Wrench w = body_wrench(s, p);
  CHECK(w.force_body.x() == 0.0);
  CHECK(w.force_body.y() == 0.0);
  CHECK(w.force_body.z() == doctest::Approx(14.715).epsilon(1e-14));
  CHECK(w.torque_body.cwiseAbs().maxCoeff() == 0.0);

  s.tilt_angles_rad[1] = kPi / 3.0;
  w = body_wrench(s, p);
  CHECK(w.force_body.x() == doctest::Approx(3.67875 * std::sin(kPi / 3.0)).epsilon(1e-14));
  CHECK(w.force_body.x() == doctest::Approx(3.1856).epsilon(1e-4));
  CHECK(w.force_body.z() == doctest::Approx(3.5 * 3.67875).epsilon(1e-14));

  s = hover_state(p, Vector3d::Zero());
  s.thrusts_n = Vector4d(3.67875, 5.0, 3.67875, 2.0);
  w = body_wrench(s, p);
  CHECK(w.torque_body.x() == doctest::Approx(0.39).epsilon(1e-14));
}

TEST_CASE("tilted rotors push along their tilted axes") {
  SimParams p;
  RigidState s = hover_state(p, Vector3d::Zero());
  s.tilt_angles_rad = Vector4d(0.3, 0.0, 0.3, 0.0);
  Wrench w = body_wrench(s, p);
  CHECK(w.force_body.y() == doctest::Approx(-2.0 * 3.67875 * std::sin(0.3)));
  CHECK(w.force_body.x() == 0.0);
}

TEST_CASE("derivative examples") {
  SimParams p;
  const RigidState hover = hover_state(p, Vector3d(0, 0, 5));
  ActuatorCommand cmd;
  cmd.thrust_cmd_n.setConstant(p.hover_thrust_n());
  const RigidStateDot d = derivative(hover, cmd, p);
  CHECK(d.position.norm() == 0.0);
  CHECK(d.velocity.norm() <= 1e-15);
  CHECK(d.body_rates.norm() == 0.0);
  CHECK(d.orientation.norm() == 0.0);
  CHECK(d.tilt_angles.norm() == 0.0);
  CHECK(d.thrusts.norm() == 0.0);

  RigidState spin = hover;
  spin.thrusts_n.setZero();
  spin.body_rates_radps = Vector3d(1, 0, 0);
  ActuatorCommand full;
  full.thrust_cmd_n.setConstant(15.0);
  const RigidStateDot d2 = derivative(spin, full, p);
  CHECK(d2.body_rates.norm() == 0.0);
  for (int i = 0; i < 4; ++i) CHECK(d2.thrusts[i] == doctest::Approx(300.0).epsilon(1e-14));
}

TEST_CASE("hover equilibrium is a fixed point of step") {
  SimParams p;
  const RigidState s0 = hover_state(p, Vector3d(0.3, -0.2, 5.0));
  ActuatorCommand cmd;
  cmd.thrust_cmd_n.setConstant(p.hover_thrust_n());
  RigidState s = s0;
  for (int i = 0; i < 100; ++i) s = step(s, cmd, p);
  CHECK(max_abs_diff(s, s0) <= 1e-10);
}

TEST_CASE("free fall matches ballistics") {
  SimParams p;
  RigidState s = hover_state(p, Vector3d(0, 0, 10));
  s.thrusts_n.setZero();
  const ActuatorCommand cmd;
  for (int i = 0; i < 100; ++i) s = step(s, cmd, p);
  CHECK(std::abs(s.velocity_mps.z() + 9.81) <= 1e-6);
  CHECK(std::abs((s.position_m.z() - 10.0) + 4.905) <= 1e-4);
  CHECK(s.velocity_mps.head<2>().norm() == 0.0);
}

TEST_CASE("tilt limits hold") {
  SimParams p;
  RigidState s = hover_state(p, Vector3d::Zero());
  s.tilt_angles_rad[0] = p.tilt_angle_range_rad.max;
  ActuatorCommand cmd;
  cmd.thrust_cmd_n.setConstant(p.hover_thrust_n());
  cmd.tilt_rate_cmd_radps[0] = 3.0;
  cmd.tilt_rate_cmd_radps[1] = 3.0;
  for (int i = 0; i < 50; ++i) s = step(s, cmd, p);
  CHECK(s.tilt_angles_rad[0] == p.tilt_angle_range_rad.max);
  CHECK(s.tilt_angles_rad[1] == p.tilt_angle_range_rad.max);
}

TEST_CASE("torque-free motion conserves momentum and rotational energy") {
  SimParams p;
  p.gravity_mps2 = 0.0;
  p.inertia_diag = Vector3d(0.0082, 0.0121, 0.0164);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    RigidState s = random_smooth_state(rng, p);
    s.thrusts_n.setZero();
    s.tilt_angles_rad.setZero();
    const ActuatorCommand cmd;
    const Vector3d momentum0 = p.mass_kg * s.velocity_mps;
    auto energy = [&](const RigidState& st) {
      return 0.5 * st.body_rates_radps.dot(p.inertia_diag.cwiseProduct(st.body_rates_radps));
    };
    auto world_angular_momentum = [&](const RigidState& st) {
      return Vector3d(st.orientation * p.inertia_diag.cwiseProduct(st.body_rates_radps));
    };
    const double e0 = energy(s);
    const Vector3d h0 = world_angular_momentum(s);
    for (int i = 0; i < 1000; ++i) {
      s = step(s, cmd, p);
      const Eigen::Matrix3d r = s.orientation.toRotationMatrix();
      CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(std::abs(r.determinant() - 1.0) <= 1e-9);
      CHECK(std::abs(s.orientation.norm() - 1.0) <= 1e-9);
    }
    CHECK((p.mass_kg * s.velocity_mps - momentum0).norm() <= 1e-12);
    CHECK(std::abs(energy(s) - e0) / e0 <= 1e-6);
    CHECK((world_angular_momentum(s) - h0).norm() / h0.norm() <= 1e-6);
  }
}

TEST_CASE("zero tilt reduces to the plain quadcopter") {
  SimParams p;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> f(0.0, 15.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    RigidState s = random_smooth_state(rng, p);
    s.tilt_angles_rad.setZero();
    s.thrusts_n = Vector4d(f(rng), f(rng), f(rng), f(rng));
    const Wrench a = body_wrench(s, p);
    const Wrench b = quad_oracle(s.thrusts_n, p);
    worst = std::max(worst, (a.force_body - b.force_body).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.torque_body - b.torque_body).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("equal thrusts cancel yaw moments") {
  SimParams p;
  RigidState s = hover_state(p, Vector3d::Zero());
  s.thrusts_n.setConstant(7.25);
  CHECK(body_wrench(s, p).torque_body.z() == 0.0);
}

TEST_CASE("RK4 one-step error shrinks at fifth order") {
  SimParams p;
  p.dt_s = 0.04;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidState s0 = random_smooth_state(rng, p);
    ActuatorCommand cmd;
    for (int i = 0; i < 4; ++i) {
      cmd.thrust_cmd_n[i] = p.hover_thrust_n() + 3.0 * u(rng);
      cmd.tilt_rate_cmd_radps[i] = u(rng);
    }
    auto error = [&](double dt) {
      SimParams coarse = p;
      coarse.dt_s = dt;
      SimParams fine = p;
      fine.dt_s = dt / 100.0;
      const RigidState one = step(s0, cmd, coarse);
      RigidState ref = s0;
      for (int i = 0; i < 100; ++i) ref = step(ref, cmd, fine);
      return max_abs_diff(one, ref);
    };
    const double e1 = error(0.04);
    const double e2 = error(0.02);
    CAPTURE(e1);
    CAPTURE(e2);
    CHECK(e1 / e2 >= 8.0);
  }
}

TEST_CASE("step rejects non-finite results") {
  SimParams p;
  RigidState s = hover_state(p, Vector3d::Zero());
  s.velocity_mps.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step(s, ActuatorCommand{}, p), Error);
  try {
    step(s, ActuatorCommand{}, p);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("euler angles") {
  EulerAngles e = euler_zyx(Eigen::Quaterniond::Identity());
  CHECK(e.roll_rad == 0.0);
  CHECK(e.pitch_rad == 0.0);
  CHECK(e.yaw_rad == 0.0);

  e = euler_zyx(Eigen::Quaterniond(Eigen::AngleAxisd(kPi / 2.0, Vector3d::UnitZ())));
  CHECK(e.yaw_rad == doctest::Approx(kPi / 2.0).epsilon(1e-12));
  CHECK(std::abs(e.roll_rad) <= 1e-12);

  // Composed directly from axis rotations, not via quaternion_from_euler.
  const Eigen::Quaterniond q = Eigen::AngleAxisd(0.3, Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(0.2, Vector3d::UnitY()) *
                               Eigen::AngleAxisd(0.1, Vector3d::UnitX());
  e = euler_zyx(q);
  CHECK(std::abs(e.roll_rad - 0.1) <= 1e-9);
  CHECK(std::abs(e.pitch_rad - 0.2) <= 1e-9);
  CHECK(std::abs(e.yaw_rad - 0.3) <= 1e-9);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> a(-kPi, kPi), b(-1.5, 1.5);
  for (int i = 0; i < 200; ++i) {
    const double r = a(rng), pch = b(rng), y = a(rng);
    const EulerAngles back = euler_zyx(quaternion_from_euler(r, pch, y));
    const Eigen::Matrix3d m1 = quaternion_from_euler(r, pch, y).toRotationMatrix();
    const Eigen::Matrix3d m2 =
        quaternion_from_euler(back.roll_rad, back.pitch_rad, back.yaw_rad).toRotationMatrix();
    CHECK((m1 - m2).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("gimbal lock reports zero yaw") {
  const Eigen::Quaterniond q = quaternion_from_euler(0.4, kPi / 2.0, 0.7);
  const EulerAngles e = euler_zyx(q);
  CHECK(e.yaw_rad == 0.0);
  CHECK(e.pitch_rad == doctest::Approx(kPi / 2.0).epsilon(1e-9));
  const Eigen::Matrix3d m1 = q.toRotationMatrix();
  const Eigen::Matrix3d m2 =
      quaternion_from_euler(e.roll_rad, e.pitch_rad, e.yaw_rad).toRotationMatrix();
  CHECK((m1 - m2).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("parameter validation names the field") {
  SimParams p;
  p.mass_kg = -1.0;
  try {
    p.validate();
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    CHECK(std::string(e.what()).find("mass_kg") != std::string::npos);
  }
  SimParams q;
  q.rotor_spin_signs = Vector4d(1, 1, 1, -1);
  CHECK_THROWS_AS(q.validate(), Error);
  SimParams r;
  r.motor_lag_s = 0.001;
  CHECK_THROWS_AS(r.validate(), Error);
}
