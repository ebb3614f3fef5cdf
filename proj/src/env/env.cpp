#include "devrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "devrl/error.hpp"

namespace devrl {

std::string_view platform_name(Platform p) {
  return p == Platform::Quad ? "quad" : "tiltrotor";
}

std::size_t observation_dim(Platform p) { return p == Platform::Quad ? 18 : 22; }
std::size_t action_dim(Platform p) { return p == Platform::Quad ? 4 : 8; }

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::Running:
      return "running";
    case Termination::MaxSteps:
      return "max_steps";
    case Termination::OutOfBounds:
      return "out_of_bounds";
    case Termination::Diverged:
      return "diverged";
  }
  return "unknown";
}

std::vector<double> Observation::flatten() const {
  std::vector<double> out(size());
  flatten_into(out);
  return out;
}

void Observation::flatten_into(std::span<double> out) const {
  if (out.size() != size()) {
    throw Error(ErrorKind::DimensionMismatch, "observation buffer has wrong size");
  }
  std::size_t k = 0;
  for (int i = 0; i < 3; ++i) out[k++] = e_p[i];
  for (int i = 0; i < 3; ++i) out[k++] = e_v[i];
  for (int i = 0; i < 9; ++i) out[k++] = r_flat[i];
  for (int i = 0; i < 3; ++i) out[k++] = e_omega[i];
  if (platform == Platform::TiltRotor) {
    for (int i = 0; i < 4; ++i) out[k++] = e_tilt[i];
  }
}

void EpisodeConfig::validate() const {
  if (max_steps == 0) throw Error(ErrorKind::ConfigError, "max_steps: must be positive");
  if (!(init_pos_halfwidth_m > 0.0)) {
    throw Error(ErrorKind::ConfigError, "init_pos_halfwidth_m: must be positive");
  }
  if (!(bound_halfwidth_m > init_pos_halfwidth_m)) {
    throw Error(ErrorKind::ConfigError,
                "bound_halfwidth_m: must exceed init_pos_halfwidth_m");
  }
  if (init_speed_max_mps < 0.0 || init_rate_max_radps < 0.0 || euler_init_range_rad < 0.0) {
    throw Error(ErrorKind::ConfigError, "init ranges must be non-negative");
  }
}

void RewardWeights::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"beta", beta},         {"alpha_a", alpha_a},         {"alpha_p", alpha_p},
      {"alpha_v", alpha_v},   {"alpha_omega", alpha_omega}, {"alpha_roll", alpha_roll},
      {"alpha_pitch", alpha_pitch}, {"alpha_tilt", alpha_tilt}};
  for (const auto& [name, value] : fields) {
    if (!(value >= 0.0)) throw Error(ErrorKind::ConfigError, std::string(name) + ": must be >= 0");
  }
}

Observation observe(const RigidState& state, const Eigen::Vector3d& target, Platform platform) {
  Observation obs;
  obs.platform = platform;
  obs.e_p = state.position_m - target;
  obs.e_v = state.velocity_mps;
  const Eigen::Matrix3d r = state.orientation.toRotationMatrix();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) obs.r_flat[3 * row + col] = r(row, col);
  }
  obs.e_omega = state.body_rates_radps;
  if (platform == Platform::TiltRotor) obs.e_tilt = state.tilt_angles_rad;
  return obs;
}

double scale_thrust(double a, const SimParams& params) {
  const Range& f = params.thrust_range_n;
  return f.clamp(params.hover_thrust_n() + a * f.span() / 2.0);
}

double scale_tilt_rate(double a, const SimParams& params) {
  return a * params.tilt_rate_range_radps.span() / 2.0;
}

ActuatorCommand scale_action(std::span<const double> action, const SimParams& params) {
  if (action.size() != 4 && action.size() != 8) {
    throw Error(ErrorKind::DimensionMismatch, "action must have 4 or 8 components");
  }
  ActuatorCommand cmd;
  for (int i = 0; i < 4; ++i) cmd.thrust_cmd_n[i] = scale_thrust(action[i], params);
  if (action.size() == 8) {
    for (int i = 0; i < 4; ++i) cmd.tilt_rate_cmd_radps[i] = scale_tilt_rate(action[4 + i], params);
  }
  return cmd;
}

double reward(const Observation& obs, std::span<const double> action, const RewardWeights& w,
              const EulerAngles& euler) {
  double action_sq = 0.0;
  for (double a : action) action_sq += a * a;
  double r = w.beta - w.alpha_a * std::sqrt(action_sq) - w.alpha_p * obs.e_p.norm() -
             w.alpha_v * obs.e_v.norm() - w.alpha_omega * obs.e_omega.norm() -
             w.alpha_roll * std::abs(euler.roll_rad) - w.alpha_pitch * std::abs(euler.pitch_rad);
  if (obs.platform == Platform::TiltRotor) r -= w.alpha_tilt * obs.e_tilt.norm();
  return r;
}

Eigen::Quaterniond uniform_rotation(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng);
  const double u2 = u(rng);
  const double u3 = u(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const double t2 = 2.0 * std::numbers::pi * u2;
  const double t3 = 2.0 * std::numbers::pi * u3;
  return Eigen::Quaterniond(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
}

Eigen::Vector3d random_vector(Rng& rng, double max_norm) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double z = 2.0 * u(rng) - 1.0;
  const double phi = 2.0 * std::numbers::pi * u(rng);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double magnitude = max_norm * u(rng);
  return magnitude * Eigen::Vector3d(rho * std::cos(phi), rho * std::sin(phi), z);
}

RigidState reset_state(Rng& rng, const EpisodeConfig& cfg, const SimParams& params,
                       std::uint64_t episode_index) {
  std::uniform_real_distribution<double> pos(-cfg.init_pos_halfwidth_m, cfg.init_pos_halfwidth_m);
  RigidState s;
  for (int i = 0; i < 3; ++i) s.position_m[i] = cfg.target_position_m[i] + pos(rng);
  s.velocity_mps = random_vector(rng, cfg.init_speed_max_mps);
  s.body_rates_radps = random_vector(rng, cfg.init_rate_max_radps);
  if (episode_index < cfg.so3_warmup_episodes) {
    s.orientation = uniform_rotation(rng);
  } else {
    std::uniform_real_distribution<double> angle(-cfg.euler_init_range_rad,
                                                 cfg.euler_init_range_rad);
    const double roll = angle(rng);
    const double pitch = angle(rng);
    const double yaw = angle(rng);
    s.orientation = quaternion_from_euler(roll, pitch, yaw);
  }
  s.tilt_angles_rad.setZero();
  s.thrusts_n.setConstant(params.hover_thrust_n());
  return s;
}

namespace {

Termination check_termination(const RigidState& state, std::uint64_t t, const EpisodeConfig& cfg,
                              const Eigen::Vector3d& target, bool bounds_enabled) {
  if (!state.finite()) return Termination::Diverged;
  if (bounds_enabled &&
      ((state.position_m - target).cwiseAbs().array() > cfg.bound_halfwidth_m).any()) {
    return Termination::OutOfBounds;
  }
  if (t >= cfg.max_steps) return Termination::MaxSteps;
  return Termination::Running;
}

}  // namespace

Termination terminated(const RigidState& state, std::uint64_t t, const EpisodeConfig& cfg) {
  return check_termination(state, t, cfg, cfg.target_position_m, true);
}

MultirotorEnv::MultirotorEnv(EnvSettings settings, Platform platform, std::uint64_t seed)
    : settings_(std::move(settings)),
      platform_(platform),
      rng_(seed),
      state_(hover_state(settings_.sim, settings_.episode.target_position_m)),
      target_(settings_.episode.target_position_m) {
  settings_.sim.validate();
  settings_.episode.validate();
  settings_.reward.validate();
}

Observation MultirotorEnv::reset(std::uint64_t episode_index) {
  EpisodeConfig cfg = settings_.episode;
  cfg.target_position_m = target_;
  return reset_to(reset_state(rng_, cfg, settings_.sim, episode_index));
}

Observation MultirotorEnv::reset_to(const RigidState& state) {
  state_ = state;
  t_ = 0;
  return observation();
}

StepResult MultirotorEnv::step(std::span<const double> action) {
  if (action.size() != action_dim(platform_)) {
    throw Error(ErrorKind::DimensionMismatch, "action has wrong dimension for platform");
  }
  std::array<double, 8> clamped{};
  for (std::size_t i = 0; i < action.size(); ++i) clamped[i] = std::clamp(action[i], -1.0, 1.0);
  const std::span<const double> a(clamped.data(), action.size());
  return advance(scale_action(a, settings_.sim), a);
}

StepResult MultirotorEnv::step_command(const ActuatorCommand& cmd) {
  const SimParams& p = settings_.sim;
  std::array<double, 8> normalized{};
  const double thrust_half_span = p.thrust_range_n.span() / 2.0;
  const double rate_half_span = p.tilt_rate_range_radps.span() / 2.0;
  for (int i = 0; i < 4; ++i) {
    normalized[i] = (cmd.thrust_cmd_n[i] - p.hover_thrust_n()) / thrust_half_span;
    normalized[4 + i] = cmd.tilt_rate_cmd_radps[i] / rate_half_span;
  }
  return advance(cmd, std::span<const double>(normalized.data(), action_dim(platform_)));
}

StepResult MultirotorEnv::advance(const ActuatorCommand& command,
                                  std::span<const double> action_for_reward) {
  ActuatorCommand cmd = command;
  if (platform_ == Platform::Quad) cmd.tilt_rate_cmd_radps.setZero();
  if (servo_filter_) servo_filter_(cmd.tilt_rate_cmd_radps);

  StepResult result;
  try {
    state_ = devrl::step(state_, cmd, settings_.sim);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonFinite) throw;
    ++t_;
    result.obs = observation();
    result.reward = 0.0;
    result.status = Termination::Diverged;
    return result;
  }
  ++t_;
  result.obs = observation();
  result.reward = devrl::reward(result.obs, action_for_reward, settings_.reward,
                                euler_zyx(state_.orientation));
  result.status = check_termination(state_, t_, settings_.episode, target_, bounds_enabled_);
  return result;
}

std::string trace_csv_header() {
  return "t,x,y,z,vx,vy,vz,roll,pitch,yaw,p,q,r,tilt1,tilt2,tilt3,tilt4,F1,F2,F3,F4,"
         "a1,a2,a3,a4,a5,a6,a7,a8,reward";
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
  out << trace_csv_header() << '\n';
  out << std::setprecision(10);
  for (const TraceRow& row : rows) {
    const RigidState& s = row.state;
    const EulerAngles e = euler_zyx(s.orientation);
    out << row.t;
    for (int i = 0; i < 3; ++i) out << ',' << s.position_m[i];
    for (int i = 0; i < 3; ++i) out << ',' << s.velocity_mps[i];
    out << ',' << e.roll_rad << ',' << e.pitch_rad << ',' << e.yaw_rad;
    for (int i = 0; i < 3; ++i) out << ',' << s.body_rates_radps[i];
    for (int i = 0; i < 4; ++i) out << ',' << s.tilt_angles_rad[i];
    for (int i = 0; i < 4; ++i) out << ',' << s.thrusts_n[i];
    for (double a : row.action) out << ',' << a;
    out << ',' << row.reward << '\n';
  }
}

void write_trace_csv(const std::string& path, std::span<const TraceRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  write_trace_csv(out, rows);
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

}  // namespace devrl
