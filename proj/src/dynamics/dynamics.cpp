#include "devrl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "devrl/error.hpp"

namespace devrl {
namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw Error(ErrorKind::ConfigError, std::string(field) + ": " + what);
}

Eigen::Vector4d as_vector(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

Eigen::Quaterniond as_quaternion(const Eigen::Vector4d& v) {
  return Eigen::Quaterniond(v[0], v[1], v[2], v[3]);
}

// state + h * rate, without renormalisation or clamping (RK4 stage point).
RigidState advance(const RigidState& s, const RigidStateDot& d, double h) {
  RigidState out;
  out.position_m = s.position_m + h * d.position;
  out.velocity_mps = s.velocity_mps + h * d.velocity;
  out.orientation = as_quaternion(as_vector(s.orientation) + h * d.orientation);
  out.body_rates_radps = s.body_rates_radps + h * d.body_rates;
  out.tilt_angles_rad = s.tilt_angles_rad + h * d.tilt_angles;
  out.thrusts_n = s.thrusts_n + h * d.thrusts;
  return out;
}

}  // namespace

void SimParams::validate() const {
  require(mass_kg > 0.0, "mass_kg", "must be positive");
  require(arm_length_m > 0.0, "arm_length_m", "must be positive");
  require((inertia_diag.array() > 0.0).all(), "inertia_diag", "components must be positive");
  require(gravity_mps2 >= 0.0, "gravity_mps2", "must be non-negative");
  require(moment_ratio_m >= 0.0, "moment_ratio_m", "must be non-negative");
  require(dt_s > 0.0, "dt_s", "must be positive");
  require(motor_lag_s >= dt_s, "motor_lag_s", "must be at least dt_s");
  require(thrust_range_n.min >= 0.0 && thrust_range_n.max > thrust_range_n.min, "thrust_range_n",
          "needs 0 <= min < max");
  require(tilt_angle_range_rad.max > 0.0 && tilt_angle_range_rad.min == -tilt_angle_range_rad.max,
          "tilt_angle_range_rad", "must be symmetric about 0");
  require(tilt_rate_range_radps.max > tilt_rate_range_radps.min, "tilt_rate_range_radps",
          "needs min < max");
  bool unit_signs = true;
  for (int i = 0; i < 4; ++i) unit_signs &= std::abs(rotor_spin_signs[i]) == 1.0;
  require(unit_signs && rotor_spin_signs.sum() == 0.0, "rotor_spin_signs",
          "entries must be +1/-1 and sum to 0");
}

bool RigidState::finite() const {
  return position_m.allFinite() && velocity_mps.allFinite() && orientation.coeffs().allFinite() &&
         body_rates_radps.allFinite() && tilt_angles_rad.allFinite() && thrusts_n.allFinite();
}

RigidState hover_state(const SimParams& params, const Eigen::Vector3d& position) {
  RigidState s;
  s.position_m = position;
  s.thrusts_n.setConstant(params.hover_thrust_n());
  return s;
}

Wrench body_wrench(const RigidState& state, const SimParams& params) {
  const Eigen::Vector4d& f = state.thrusts_n;
  const Eigen::Vector4d s = state.tilt_angles_rad.array().sin();
  const Eigen::Vector4d c = state.tilt_angles_rad.array().cos();
  const double l = params.arm_length_m;
  const Eigen::Vector4d m = params.moment_ratio_m * params.rotor_spin_signs.cwiseProduct(f);

  // Spin axis of rotor i in body frame: 1,3 -> (0, -s, c); 2,4 -> (s, 0, c).
  Wrench w;
  w.force_body = {f[1] * s[1] + f[3] * s[3],
                  -f[0] * s[0] - f[2] * s[2],
                  f[0] * c[0] + f[1] * c[1] + f[2] * c[2] + f[3] * c[3]};
  w.torque_body = {l * (f[1] * c[1] - f[3] * c[3]) + m[1] * s[1] + m[3] * s[3],
                   l * (f[2] * c[2] - f[0] * c[0]) - m[0] * s[0] - m[2] * s[2],
                   l * (-f[0] * s[0] - f[1] * s[1] + f[2] * s[2] + f[3] * s[3]) +
                       m[0] * c[0] + m[1] * c[1] + m[2] * c[2] + m[3] * c[3]};
  return w;
}

RigidStateDot derivative(const RigidState& state, const ActuatorCommand& cmd,
                         const SimParams& params) {
  const Wrench w = body_wrench(state, params);
  const Eigen::Vector3d& omega = state.body_rates_radps;
  const Eigen::Vector3d inertia = params.inertia_diag;

  RigidStateDot d;
  d.position = state.velocity_mps;
  d.velocity = state.orientation.normalized() * w.force_body / params.mass_kg -
               Eigen::Vector3d(0.0, 0.0, params.gravity_mps2);
  const Eigen::Vector3d angular_momentum = inertia.cwiseProduct(omega);
  d.body_rates = (w.torque_body - omega.cross(angular_momentum)).cwiseQuotient(inertia);
  const Eigen::Quaterniond q_dot =
      state.orientation * Eigen::Quaterniond(0.0, omega.x(), omega.y(), omega.z());
  d.orientation = 0.5 * as_vector(q_dot);

  const Range& tilt = params.tilt_angle_range_rad;
  for (int i = 0; i < 4; ++i) {
    const double rate = cmd.tilt_rate_cmd_radps[i];
    const double angle = state.tilt_angles_rad[i];
    const bool pushing_out = (angle >= tilt.max && rate > 0.0) || (angle <= tilt.min && rate < 0.0);
    d.tilt_angles[i] = pushing_out ? 0.0 : rate;
  }
  d.thrusts = (cmd.thrust_cmd_n - state.thrusts_n) / params.motor_lag_s;
  return d;
}

RigidState step(const RigidState& state, const ActuatorCommand& cmd, const SimParams& params) {
  const double h = params.dt_s;
  const RigidStateDot k1 = derivative(state, cmd, params);
  const RigidStateDot k2 = derivative(advance(state, k1, 0.5 * h), cmd, params);
  const RigidStateDot k3 = derivative(advance(state, k2, 0.5 * h), cmd, params);
  const RigidStateDot k4 = derivative(advance(state, k3, h), cmd, params);

  RigidStateDot mean;
  mean.position = (k1.position + 2.0 * k2.position + 2.0 * k3.position + k4.position) / 6.0;
  mean.velocity = (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity) / 6.0;
  mean.orientation =
      (k1.orientation + 2.0 * k2.orientation + 2.0 * k3.orientation + k4.orientation) / 6.0;
  mean.body_rates =
      (k1.body_rates + 2.0 * k2.body_rates + 2.0 * k3.body_rates + k4.body_rates) / 6.0;
  mean.tilt_angles =
      (k1.tilt_angles + 2.0 * k2.tilt_angles + 2.0 * k3.tilt_angles + k4.tilt_angles) / 6.0;
  mean.thrusts = (k1.thrusts + 2.0 * k2.thrusts + 2.0 * k3.thrusts + k4.thrusts) / 6.0;

  RigidState next = advance(state, mean, h);
  next.orientation.normalize();
  for (int i = 0; i < 4; ++i) {
    next.tilt_angles_rad[i] = params.tilt_angle_range_rad.clamp(next.tilt_angles_rad[i]);
    next.thrusts_n[i] = params.thrust_range_n.clamp(next.thrusts_n[i]);
  }
  if (!next.finite()) throw Error(ErrorKind::NonFinite, "integrator produced a non-finite state");
  return next;
}

EulerAngles euler_zyx(const Eigen::Quaterniond& orientation) {
  const Eigen::Matrix3d r = orientation.normalized().toRotationMatrix();
  EulerAngles e;
  e.pitch_rad = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  if (std::abs(std::abs(e.pitch_rad) - std::numbers::pi / 2.0) < 1e-6) {
    // Only roll -/+ yaw is observable here; report it all as roll.
    e.yaw_rad = 0.0;
    e.roll_rad = std::atan2(-r(1, 2), r(1, 1));
  } else {
    e.roll_rad = std::atan2(r(2, 1), r(2, 2));
    e.yaw_rad = std::atan2(r(1, 0), r(0, 0));
  }
  return e;
}

Eigen::Quaterniond quaternion_from_euler(double roll, double pitch, double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()));
}

}  // namespace devrl
