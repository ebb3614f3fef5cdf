#pragma once

// Evaluation protocols: randomised hover recovery, servo-fault ablation and
// waypoint missions. Policies act deterministically (the actor mean).

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <array>
#include <string>
#include <vector>

#include "devrl/env.hpp"
#include "devrl/mlp.hpp"
#include "devrl/pid.hpp"

namespace devrl {

enum class InitRegion { Cube, Ball };

struct EvalConfig {
  Eigen::Vector3d target_position_m{0.0, 0.0, 3.0};
  std::uint64_t max_steps = 1500;
  double success_radius_m = 0.2;
  // Start position: the training cube, or uniform inside a ball of
  // init_radius_m around the target. Orientation always uses the shrunk range.
  InitRegion init_region = InitRegion::Cube;
  double init_radius_m = 1.0;
  bool keep_traces = true;

  void validate() const;
};

struct FaultModel {
  std::vector<int> faulty_servos;  // 1-based, distinct, in 1..4
  double response_probability = 0.4;

  void validate() const;
};

struct TrialResult {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::int64_t steps_to_reach = -1;  // first step within the success radius, -1 if never
  double final_error_m = 0.0;
  double episode_return = 0.0;
  std::uint64_t steps = 0;
  Termination termination = Termination::Running;
  EulerAngles final_euler;
  Eigen::Vector4d final_tilt_rad = Eigen::Vector4d::Zero();
  std::vector<int> faulty_servos;
  std::vector<TraceRow> trace;
};

struct EvalSummary {
  std::vector<TrialResult> trials;
  std::size_t success_count() const;
  double success_rate() const;
  double mean_return() const;
};

// Something that drives a MultirotorEnv for one step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset() {}
  // Steps env towards env.target(); writes the normalised action into action_out.
  virtual StepResult act(MultirotorEnv& env, const Observation& obs,
                         std::array<double, 8>& action_out) = 0;
};

class PolicyController final : public Controller {
 public:
  explicit PolicyController(const Mlp& actor) : actor_(actor) {}
  StepResult act(MultirotorEnv& env, const Observation& obs,
                 std::array<double, 8>& action_out) override;

 private:
  const Mlp& actor_;
  std::vector<double> input_;
};

class PidBaseline final : public Controller {
 public:
  PidBaseline(const SimParams& params, const PidGains& gains) : pid_(params, gains) {}
  void reset() override { pid_.reset(); }
  StepResult act(MultirotorEnv& env, const Observation& obs,
                 std::array<double, 8>& action_out) override;

 private:
  PidController pid_;
};

// Platform implied by the actor's input width; throws ShapeMismatch otherwise.
Platform platform_for(const Mlp& actor);

// Per-trial seed for trial i of a run with the given master seed.
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial);

// Runs one episode from the env's current state.
TrialResult run_episode(MultirotorEnv& env, Controller& controller, const EvalConfig& cfg);

EvalSummary run_hover_eval(const Mlp& actor, std::size_t n_trials, const EnvSettings& settings,
                           const EvalConfig& cfg, std::uint64_t master_seed);
EvalSummary run_hover_eval(Controller& controller, Platform platform, std::size_t n_trials,
                           const EnvSettings& settings, const EvalConfig& cfg,
                           std::uint64_t master_seed);

// Faulty servo identities for one trial: n distinct indices in 1..4, sorted.
std::vector<int> sample_faulty_servos(std::size_t n_faulty, std::uint64_t trial_seed);

// Each trial resamples n_faulty servos and the start state from its trial
// seed, so two policies evaluated with the same master seed see identical
// initial states, faulty servos and Bernoulli draws.
EvalSummary run_fault_ablation(const Mlp& actor, std::size_t n_faulty, std::size_t n_trials,
                               const EnvSettings& settings, const EvalConfig& cfg,
                               std::uint64_t master_seed, double response_probability = 0.4);

struct MissionSpec {
  Eigen::Vector3d start_m{0.0, 0.0, 3.0};
  bool randomize_start = true;  // training-style perturbation around start_m
  std::vector<Eigen::Vector3d> waypoints;
  double reach_tolerance_m = 0.2;
  std::uint64_t steps_per_waypoint = 1500;

  void validate() const;
};

// Square circuit at z = 3 m with 2 m sides centred on the start (0, 0, 3).
MissionSpec default_mission();

struct MissionResult {
  std::vector<bool> reached;
  std::vector<std::int64_t> reach_step;
  bool all_reached = false;
  std::uint64_t steps = 0;
  Termination termination = Termination::Running;
  std::vector<TraceRow> trace;
  std::vector<std::size_t> target_index;  // per trace row
};

// A waypoint counts as visited once the vehicle is within the tolerance; the
// target then advances. The mission stops after the last waypoint, when a leg
// exceeds its step budget, or on divergence. Out-of-bounds termination is off.
MissionResult run_waypoint_mission(Controller& controller, Platform platform,
                                   const MissionSpec& mission, const EnvSettings& settings,
                                   std::uint64_t seed);

// Columns: trial,seed,n_faulty,servo_ids,success,steps_to_reach,final_error_m
void write_summary_csv(std::ostream& out, const EvalSummary& summary);
void write_summary_csv(const std::string& path, const EvalSummary& summary);
// Trace schema plus a waypoint column.
void write_mission_csv(std::ostream& out, const MissionResult& result);

}  // namespace devrl
