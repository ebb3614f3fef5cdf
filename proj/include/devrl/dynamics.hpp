#pragma once

// Tilt-rotor quadcopter rigid-body model.
//
// Plus configuration: rotor 1 on +x_B, rotor 2 on +y_B, rotor 3 on -x_B,
// rotor 4 on -y_B. Rotors 1/3 tilt about the x arm (thrust gains a -y_B
// component for positive angle), rotors 2/4 tilt about the y arm (thrust gains
// +x_B). Each rotor's drag moment is spin_sign * moment_ratio * thrust along
// its tilted spin axis. A plain quadcopter is the same model with every tilt
// angle held at zero.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>

namespace devrl {

struct Range {
  double min = 0.0;
  double max = 0.0;

  double clamp(double x) const { return x < min ? min : (x > max ? max : x); }
  double span() const { return max - min; }
};

struct SimParams {
  double mass_kg = 1.5;
  double arm_length_m = 0.13;
  Eigen::Vector3d inertia_diag{0.0082, 0.0082, 0.0164};
  double gravity_mps2 = 9.81;
  double moment_ratio_m = 0.016;
  double motor_lag_s = 0.05;
  double dt_s = 0.01;
  Range thrust_range_n{0.0, 15.0};
  Range tilt_angle_range_rad{-1.0471975511965976, 1.0471975511965976};
  Range tilt_rate_range_radps{-3.0, 3.0};
  Eigen::Vector4d rotor_spin_signs{1.0, -1.0, 1.0, -1.0};

  // Per-rotor thrust that balances gravity at level attitude.
  double hover_thrust_n() const { return mass_kg * gravity_mps2 / 4.0; }

  // Throws Error(ConfigError) naming the first violated field.
  void validate() const;
};

struct RigidState {
  Eigen::Vector3d position_m = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity_mps = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();  // body -> world
  Eigen::Vector3d body_rates_radps = Eigen::Vector3d::Zero();
  Eigen::Vector4d tilt_angles_rad = Eigen::Vector4d::Zero();
  Eigen::Vector4d thrusts_n = Eigen::Vector4d::Zero();

  bool finite() const;
};

// Level, at rest, untilted, motors spun up to hover thrust.
RigidState hover_state(const SimParams& params, const Eigen::Vector3d& position);

struct ActuatorCommand {
  Eigen::Vector4d thrust_cmd_n = Eigen::Vector4d::Zero();
  Eigen::Vector4d tilt_rate_cmd_radps = Eigen::Vector4d::Zero();
};

struct RigidStateDot {
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;
  Eigen::Vector4d orientation;  // (w, x, y, z)
  Eigen::Vector3d body_rates;
  Eigen::Vector4d tilt_angles;
  Eigen::Vector4d thrusts;
};

struct Wrench {
  Eigen::Vector3d force_body;
  Eigen::Vector3d torque_body;
};

// Rotor forces and moments in the body frame, from the current (lagged)
// thrusts and tilt angles. Excludes gravity and the gyroscopic term.
Wrench body_wrench(const RigidState& state, const SimParams& params);

RigidStateDot derivative(const RigidState& state, const ActuatorCommand& cmd,
                         const SimParams& params);

// One RK4 step of length params.dt_s with the command held constant.
// Throws Error(NonFinite) if the result contains NaN or Inf.
RigidState step(const RigidState& state, const ActuatorCommand& cmd, const SimParams& params);

struct EulerAngles {
  double roll_rad = 0.0;
  double pitch_rad = 0.0;
  double yaw_rad = 0.0;
};

// Z-Y-X decomposition R = Rz(yaw) Ry(pitch) Rx(roll), pitch in [-pi/2, pi/2].
// Within 1e-6 of gimbal lock yaw is reported as 0 and roll absorbs the rest.
EulerAngles euler_zyx(const Eigen::Quaterniond& orientation);

Eigen::Quaterniond quaternion_from_euler(double roll, double pitch, double yaw);

}  // namespace devrl
