#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "devrl/dynamics.hpp"
#include "devrl/rng.hpp"

namespace devrl {

enum class Platform { Quad, TiltRotor };

std::string_view platform_name(Platform p);
std::size_t observation_dim(Platform p);  // 18 or 22
std::size_t action_dim(Platform p);       // 4 or 8

// Errors are current minus desired. Desired velocity, body rates and tilt
// angles are zero; only position has a non-zero goal.
struct Observation {
  Platform platform = Platform::Quad;
  Eigen::Vector3d e_p = Eigen::Vector3d::Zero();
  Eigen::Vector3d e_v = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 9, 1> r_flat = Eigen::Matrix<double, 9, 1>::Zero();  // row-major R_B/E
  Eigen::Vector3d e_omega = Eigen::Vector3d::Zero();
  Eigen::Vector4d e_tilt = Eigen::Vector4d::Zero();  // tilt-rotor only

  std::size_t size() const { return observation_dim(platform); }
  // (e_p, e_v, r_flat, e_omega[, e_tilt])
  std::vector<double> flatten() const;
  void flatten_into(std::span<double> out) const;
};

struct EpisodeConfig {
  Eigen::Vector3d target_position_m{0.0, 0.0, 5.0};
  std::uint64_t max_steps = 1500;
  double bound_halfwidth_m = 1.5;
  double init_pos_halfwidth_m = 1.0;
  double init_speed_max_mps = 1.0;
  double init_rate_max_radps = 1.0;
  std::uint64_t so3_warmup_episodes = 500;
  double euler_init_range_rad = 1.0471975511965976;

  void validate() const;
};

struct RewardWeights {
  double beta = 5.0;
  double alpha_a = 0.25;
  double alpha_p = 1.0;
  double alpha_v = 0.05;
  double alpha_omega = 0.25;
  double alpha_roll = 0.1;
  double alpha_pitch = 0.1;
  double alpha_tilt = 0.5;

  void validate() const;
};

enum class Termination { Running, MaxSteps, OutOfBounds, Diverged };

std::string_view termination_name(Termination t);

Observation observe(const RigidState& state, const Eigen::Vector3d& target, Platform platform);

// Policy output in [-1, 1] to rotor thrust, centred on hover thrust.
double scale_thrust(double a, const SimParams& params);
double scale_tilt_rate(double a, const SimParams& params);

// Maps a clamped action vector to actuator commands. Quad actions leave tilt
// rates at zero.
ActuatorCommand scale_action(std::span<const double> action, const SimParams& params);

double reward(const Observation& obs, std::span<const double> action, const RewardWeights& weights,
              const EulerAngles& euler);

// Uniform rotation (Shoemake's subgroup algorithm).
Eigen::Quaterniond uniform_rotation(Rng& rng);

// Direction uniform on the sphere, magnitude uniform in [0, max_norm].
Eigen::Vector3d random_vector(Rng& rng, double max_norm);

RigidState reset_state(Rng& rng, const EpisodeConfig& cfg, const SimParams& params,
                       std::uint64_t episode_index);

Termination terminated(const RigidState& state, std::uint64_t t, const EpisodeConfig& cfg);

struct EnvSettings {
  SimParams sim;
  EpisodeConfig episode;
  RewardWeights reward;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  Termination status = Termination::Running;
};

// Optional hook applied to tilt-rate commands just before integration
// (servo fault injection).
using ServoFilter = std::function<void(Eigen::Vector4d& tilt_rate_cmd)>;

class MultirotorEnv {
 public:
  MultirotorEnv(EnvSettings settings, Platform platform, std::uint64_t seed);

  Observation reset(std::uint64_t episode_index);
  Observation reset_to(const RigidState& state);

  // Action is clamped to [-1, 1] before scaling; reward sees the clamped action.
  StepResult step(std::span<const double> action);
  // Bypasses action scaling (used by the PID baseline). The reward's action
  // term uses the normalised action equivalent to the command.
  StepResult step_command(const ActuatorCommand& cmd);

  void set_target(const Eigen::Vector3d& target) { target_ = target; }
  void set_servo_filter(ServoFilter filter) { servo_filter_ = std::move(filter); }
  // Stop counting out-of-bounds as a termination (waypoint missions).
  void set_bounds_enabled(bool enabled) { bounds_enabled_ = enabled; }

  const RigidState& state() const { return state_; }
  const Eigen::Vector3d& target() const { return target_; }
  std::uint64_t t() const { return t_; }
  Platform platform() const { return platform_; }
  const EnvSettings& settings() const { return settings_; }
  Rng& rng() { return rng_; }
  Observation observation() const { return observe(state_, target_, platform_); }

 private:
  StepResult advance(const ActuatorCommand& cmd, std::span<const double> action_for_reward);

  EnvSettings settings_;
  Platform platform_;
  Rng rng_;
  RigidState state_;
  Eigen::Vector3d target_;
  std::uint64_t t_ = 0;
  ServoFilter servo_filter_;
  bool bounds_enabled_ = true;
};

// Episode trace in the shared CSV schema:
// t,x,y,z,vx,vy,vz,roll,pitch,yaw,p,q,r,tilt1..tilt4,F1..F4,a1..a8,reward
struct TraceRow {
  std::uint64_t t = 0;
  RigidState state;
  std::array<double, 8> action{};
  double reward = 0.0;
};

std::string trace_csv_header();
void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows);
void write_trace_csv(const std::string& path, std::span<const TraceRow> rows);

}  // namespace devrl
