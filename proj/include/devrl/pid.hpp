#pragma once

// Cascaded PID baseline: position -> acceleration -> attitude -> body rates
// -> torques, mixed onto the four rotors of the plus configuration. Tilt
// servos are driven back to zero.

#include <Eigen/Core>

#include "devrl/dynamics.hpp"

namespace devrl {

struct PidGains {
  double pos_kp_xy = 1.2;
  double pos_ki_xy = 0.05;
  double pos_kd_xy = 1.8;
  double pos_kp_z = 2.0;
  double pos_ki_z = 0.2;
  double pos_kd_z = 2.2;
  double max_accel_xy_mps2 = 4.0;
  double max_accel_z_mps2 = 5.0;
  double max_tilt_rad = 0.5;
  double integral_limit = 2.0;  // per axis, in m*s
  double att_kp = 6.0;          // attitude error -> rate setpoint, 1/s
  double yaw_kp = 2.0;
  double rate_kp = 12.0;        // rate error -> angular acceleration, 1/s
  double rate_kd = 0.0;
  double tilt_kp = 4.0;         // tilt angle -> servo rate, 1/s

  void validate() const;
};

class PidController {
 public:
  PidController(const SimParams& params, const PidGains& gains);

  void reset();
  // One control update; integrators advance by params.dt_s.
  ActuatorCommand update(const RigidState& state, const Eigen::Vector3d& target);

  const PidGains& gains() const { return gains_; }

 private:
  SimParams params_;
  PidGains gains_;
  Eigen::Matrix4d mix_inverse_;
  Eigen::Vector3d integral_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d prev_rate_error_ = Eigen::Vector3d::Zero();
};

// Stateless single update (integrators at zero).
ActuatorCommand pid_controller(const RigidState& state, const Eigen::Vector3d& target,
                               const PidGains& gains, const SimParams& params = {});

// Rotor thrusts -> (collective, roll torque, pitch torque, yaw torque) at zero tilt.
Eigen::Matrix4d allocation_matrix(const SimParams& params);

}  // namespace devrl
