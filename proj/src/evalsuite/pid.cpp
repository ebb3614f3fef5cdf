#include "devrl/pid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <Eigen/LU>

#include "devrl/error.hpp"

namespace devrl {
namespace {

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

void require_gain(bool ok, const char* name) {
  if (!ok) throw Error(ErrorKind::ConfigError, std::string(name) + ": must be non-negative");
}

}  // namespace

void PidGains::validate() const {
  require_gain(pos_kp_xy >= 0, "pid_pos_kp_xy");
  require_gain(pos_ki_xy >= 0, "pid_pos_ki_xy");
  require_gain(pos_kd_xy >= 0, "pid_pos_kd_xy");
  require_gain(pos_kp_z >= 0, "pid_pos_kp_z");
  require_gain(pos_ki_z >= 0, "pid_pos_ki_z");
  require_gain(pos_kd_z >= 0, "pid_pos_kd_z");
  require_gain(max_accel_xy_mps2 >= 0, "pid_max_accel_xy_mps2");
  require_gain(max_accel_z_mps2 >= 0, "pid_max_accel_z_mps2");
  require_gain(max_tilt_rad >= 0 && max_tilt_rad < std::numbers::pi / 2, "pid_max_tilt_rad");
  require_gain(integral_limit >= 0, "pid_integral_limit");
  require_gain(att_kp >= 0, "pid_att_kp");
  require_gain(yaw_kp >= 0, "pid_yaw_kp");
  require_gain(rate_kp >= 0, "pid_rate_kp");
  require_gain(rate_kd >= 0, "pid_rate_kd");
  require_gain(tilt_kp >= 0, "pid_tilt_kp");
}

Eigen::Matrix4d allocation_matrix(const SimParams& params) {
  const double l = params.arm_length_m;
  const double k = params.moment_ratio_m;
  const Eigen::Vector4d& s = params.rotor_spin_signs;
  Eigen::Matrix4d m;
  m << 1.0, 1.0, 1.0, 1.0,
       0.0, l, 0.0, -l,
       -l, 0.0, l, 0.0,
       k * s[0], k * s[1], k * s[2], k * s[3];
  return m;
}

PidController::PidController(const SimParams& params, const PidGains& gains)
    : params_(params), gains_(gains), mix_inverse_(allocation_matrix(params).inverse()) {
  gains_.validate();
}

void PidController::reset() {
  integral_.setZero();
  prev_rate_error_.setZero();
}

ActuatorCommand PidController::update(const RigidState& state, const Eigen::Vector3d& target) {
  const PidGains& g = gains_;
  const double dt = params_.dt_s;
  const double gravity = params_.gravity_mps2;

  const Eigen::Vector3d e = target - state.position_m;
  integral_ = (integral_ + e * dt).cwiseMax(-g.integral_limit).cwiseMin(g.integral_limit);
  const Eigen::Vector3d& v = state.velocity_mps;

  Eigen::Vector3d acc;
  acc.x() = g.pos_kp_xy * e.x() + g.pos_ki_xy * integral_.x() - g.pos_kd_xy * v.x();
  acc.y() = g.pos_kp_xy * e.y() + g.pos_ki_xy * integral_.y() - g.pos_kd_xy * v.y();
  acc.z() = g.pos_kp_z * e.z() + g.pos_ki_z * integral_.z() - g.pos_kd_z * v.z();
  const double xy = std::hypot(acc.x(), acc.y());
  if (xy > g.max_accel_xy_mps2) acc.head<2>() *= g.max_accel_xy_mps2 / xy;
  acc.z() = std::clamp(acc.z(), -g.max_accel_z_mps2, g.max_accel_z_mps2);

  const EulerAngles att = euler_zyx(state.orientation);
  const double cy = std::cos(att.yaw_rad);
  const double sy = std::sin(att.yaw_rad);
  const double ax_b = cy * acc.x() + sy * acc.y();
  const double ay_b = -sy * acc.x() + cy * acc.y();
  const double pitch_d = std::clamp(std::atan2(ax_b, gravity), -g.max_tilt_rad, g.max_tilt_rad);
  const double roll_d = std::clamp(std::atan2(-ay_b, gravity), -g.max_tilt_rad, g.max_tilt_rad);

  // Project the vertical demand onto the body z axis.
  const Eigen::Vector3d body_z = state.orientation.normalized() * Eigen::Vector3d::UnitZ();
  const double cos_tilt = std::max(body_z.z(), 0.3);
  const double collective = params_.mass_kg * (gravity + acc.z()) / cos_tilt;

  const Eigen::Vector3d rate_d(g.att_kp * wrap_angle(roll_d - att.roll_rad),
                               g.att_kp * wrap_angle(pitch_d - att.pitch_rad),
                               g.yaw_kp * wrap_angle(-att.yaw_rad));
  const Eigen::Vector3d rate_error = rate_d - state.body_rates_radps;
  const Eigen::Vector3d ang_acc = g.rate_kp * rate_error + g.rate_kd * (rate_error - prev_rate_error_) / dt;
  prev_rate_error_ = rate_error;
  const Eigen::Vector3d& inertia = params_.inertia_diag;
  const Eigen::Vector3d torque = inertia.cwiseProduct(ang_acc) +
                                 state.body_rates_radps.cross(inertia.cwiseProduct(state.body_rates_radps));

  const Eigen::Vector4d wrench(collective, torque.x(), torque.y(), torque.z());
  ActuatorCommand cmd;
  cmd.thrust_cmd_n = mix_inverse_ * wrench;
  for (int i = 0; i < 4; ++i) {
    cmd.thrust_cmd_n[i] = params_.thrust_range_n.clamp(cmd.thrust_cmd_n[i]);
    cmd.tilt_rate_cmd_radps[i] =
        params_.tilt_rate_range_radps.clamp(-g.tilt_kp * state.tilt_angles_rad[i]);
  }
  return cmd;
}

ActuatorCommand pid_controller(const RigidState& state, const Eigen::Vector3d& target,
                               const PidGains& gains, const SimParams& params) {
  PidController pid(params, gains);
  return pid.update(state, target);
}

}  // namespace devrl
