#include "devrl/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "devrl/error.hpp"

namespace devrl {
namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw Error(ErrorKind::ConfigError, std::string(field) + ": " + what);
}

// Training-style start with the shrunk orientation range.
RigidState eval_start(MultirotorEnv& env, const EvalConfig& cfg) {
  EpisodeConfig ep = env.settings().episode;
  ep.target_position_m = cfg.target_position_m;
  RigidState s = reset_state(env.rng(), ep, env.settings().sim, ep.so3_warmup_episodes);
  if (cfg.init_region == InitRegion::Ball) {
    // Radius by inverse CDF so the point is uniform in volume.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Eigen::Vector3d dir = random_vector(env.rng(), 1.0);
    const double n = dir.norm();
    const double r = cfg.init_radius_m * std::cbrt(u(env.rng()));
    const Eigen::Vector3d unit = n > 0.0 ? Eigen::Vector3d(dir / n) : Eigen::Vector3d::UnitX();
    s.position_m = cfg.target_position_m + r * unit;
  }
  return s;
}

EnvSettings eval_settings(const EnvSettings& settings, const EvalConfig& cfg) {
  EnvSettings s = settings;
  s.episode.target_position_m = cfg.target_position_m;
  s.episode.max_steps = cfg.max_steps;
  return s;
}

TraceRow make_row(const MultirotorEnv& env, const std::array<double, 8>& action, double reward) {
  TraceRow row;
  row.t = env.t();
  row.state = env.state();
  row.action = action;
  row.reward = reward;
  return row;
}

}  // namespace

void EvalConfig::validate() const {
  require(max_steps > 0, "eval_max_steps", "must be positive");
  require(success_radius_m > 0.0, "eval_success_radius_m", "must be positive");
  require(init_radius_m > 0.0, "eval_init_radius_m", "must be positive");
}

void FaultModel::validate() const {
  require(response_probability >= 0.0 && response_probability <= 1.0, "response_probability",
          "must lie in [0, 1]");
  std::vector<int> ids = faulty_servos;
  std::ranges::sort(ids);
  require(std::ranges::adjacent_find(ids) == ids.end(), "faulty_servos", "indices must be distinct");
  for (int id : ids) require(id >= 1 && id <= 4, "faulty_servos", "indices must be in 1..4");
}

void MissionSpec::validate() const {
  require(!waypoints.empty(), "waypoints", "need at least one waypoint");
  require(reach_tolerance_m > 0.0, "reach_tolerance_m", "must be positive");
  require(steps_per_waypoint > 0, "steps_per_waypoint", "must be positive");
}

std::size_t EvalSummary::success_count() const {
  return static_cast<std::size_t>(
      std::ranges::count_if(trials, [](const TrialResult& t) { return t.success; }));
}

double EvalSummary::success_rate() const {
  return trials.empty() ? 0.0
                        : static_cast<double>(success_count()) / static_cast<double>(trials.size());
}

double EvalSummary::mean_return() const {
  if (trials.empty()) return 0.0;
  double sum = 0.0;
  for (const TrialResult& t : trials) sum += t.episode_return;
  return sum / static_cast<double>(trials.size());
}

StepResult PolicyController::act(MultirotorEnv& env, const Observation& obs,
                                 std::array<double, 8>& action_out) {
  input_.resize(obs.size());
  obs.flatten_into(input_);
  const std::vector<double> mean = actor_.forward(input_);
  action_out.fill(0.0);
  for (std::size_t i = 0; i < mean.size(); ++i) action_out[i] = std::clamp(mean[i], -1.0, 1.0);
  return env.step(mean);
}

StepResult PidBaseline::act(MultirotorEnv& env, const Observation&,
                            std::array<double, 8>& action_out) {
  const ActuatorCommand cmd = pid_.update(env.state(), env.target());
  const SimParams& p = env.settings().sim;
  for (int i = 0; i < 4; ++i) {
    action_out[i] = (cmd.thrust_cmd_n[i] - p.hover_thrust_n()) / (p.thrust_range_n.span() / 2.0);
    action_out[4 + i] = cmd.tilt_rate_cmd_radps[i] / (p.tilt_rate_range_radps.span() / 2.0);
  }
  if (env.platform() == Platform::Quad) std::fill(action_out.begin() + 4, action_out.end(), 0.0);
  return env.step_command(cmd);
}

Platform platform_for(const Mlp& actor) {
  for (Platform p : {Platform::Quad, Platform::TiltRotor}) {
    if (actor.input_dim() == observation_dim(p) && actor.output_dim() == action_dim(p)) return p;
  }
  throw Error(ErrorKind::ShapeMismatch, "actor is neither 18->4 nor 22->8");
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial) {
  return derive_seed(master_seed, Stream::Trial, trial);
}

TrialResult run_episode(MultirotorEnv& env, Controller& controller, const EvalConfig& cfg) {
  TrialResult r;
  controller.reset();
  Observation obs = env.observation();
  std::array<double, 8> action{};
  if (cfg.keep_traces) r.trace.push_back(make_row(env, action, 0.0));
  if (obs.e_p.norm() < cfg.success_radius_m) {
    r.success = true;
    r.steps_to_reach = 0;
  }
  while (env.t() < cfg.max_steps) {
    const StepResult step = controller.act(env, obs, action);
    r.episode_return += step.reward;
    obs = step.obs;
    if (cfg.keep_traces) r.trace.push_back(make_row(env, action, step.reward));
    if (!r.success && step.status != Termination::Diverged &&
        obs.e_p.norm() < cfg.success_radius_m) {
      r.success = true;
      r.steps_to_reach = static_cast<std::int64_t>(env.t());
    }
    r.termination = step.status;
    if (step.status != Termination::Running) break;
  }
  if (r.termination == Termination::Running) r.termination = Termination::MaxSteps;
  r.steps = env.t();
  r.final_error_m = (env.state().position_m - env.target()).norm();
  if (!std::isfinite(r.final_error_m)) r.final_error_m = std::numeric_limits<double>::infinity();
  r.final_euler = euler_zyx(env.state().orientation);
  r.final_tilt_rad = env.state().tilt_angles_rad;
  return r;
}

EvalSummary run_hover_eval(const Mlp& actor, std::size_t n_trials, const EnvSettings& settings,
                           const EvalConfig& cfg, std::uint64_t master_seed) {
  PolicyController controller(actor);
  return run_hover_eval(controller, platform_for(actor), n_trials, settings, cfg, master_seed);
}

EvalSummary run_hover_eval(Controller& controller, Platform platform, std::size_t n_trials,
                           const EnvSettings& settings, const EvalConfig& cfg,
                           std::uint64_t master_seed) {
  cfg.validate();
  const EnvSettings s = eval_settings(settings, cfg);
  EvalSummary summary;
  for (std::size_t i = 0; i < n_trials; ++i) {
    const std::uint64_t seed = trial_seed(master_seed, i);
    MultirotorEnv env(s, platform, seed);
    env.reset_to(eval_start(env, cfg));
    TrialResult r = run_episode(env, controller, cfg);
    r.trial = i;
    r.seed = seed;
    summary.trials.push_back(std::move(r));
  }
  return summary;
}

std::vector<int> sample_faulty_servos(std::size_t n_faulty, std::uint64_t seed) {
  if (n_faulty > 4) throw Error(ErrorKind::ConfigError, "faulty: at most 4 servos");
  std::vector<int> ids{1, 2, 3, 4};
  Rng rng = make_rng(seed, Stream::Fault, 1);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(n_faulty);
  std::ranges::sort(ids);
  return ids;
}

EvalSummary run_fault_ablation(const Mlp& actor, std::size_t n_faulty, std::size_t n_trials,
                               const EnvSettings& settings, const EvalConfig& cfg,
                               std::uint64_t master_seed, double response_probability) {
  cfg.validate();
  if (platform_for(actor) != Platform::TiltRotor) {
    throw Error(ErrorKind::ShapeMismatch, "fault ablation needs a tilt-rotor actor");
  }
  const EnvSettings s = eval_settings(settings, cfg);
  PolicyController controller(actor);
  EvalSummary summary;
  for (std::size_t i = 0; i < n_trials; ++i) {
    const std::uint64_t seed = trial_seed(master_seed, i);
    FaultModel fault{sample_faulty_servos(n_faulty, seed), response_probability};
    fault.validate();
    MultirotorEnv env(s, Platform::TiltRotor, seed);
    env.reset_to(eval_start(env, cfg));

    // One Bernoulli draw per servo per step, faulty or not, keeps the stream
    // identical for any policy and fault subset.
    Rng fault_rng = make_rng(seed, Stream::Fault, 0);
    std::array<bool, 4> faulty{};
    for (int id : fault.faulty_servos) faulty[static_cast<std::size_t>(id - 1)] = true;
    env.set_servo_filter([&fault_rng, faulty, p = fault.response_probability](Eigen::Vector4d& rate) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int k = 0; k < 4; ++k) {
        const bool responds = u(fault_rng) < p;
        if (faulty[static_cast<std::size_t>(k)] && !responds) rate[k] = 0.0;
      }
    });

    TrialResult r = run_episode(env, controller, cfg);
    r.trial = i;
    r.seed = seed;
    r.faulty_servos = fault.faulty_servos;
    summary.trials.push_back(std::move(r));
  }
  return summary;
}

MissionSpec default_mission() {
  MissionSpec m;
  m.start_m = {0.0, 0.0, 3.0};
  m.waypoints = {{1.0, -1.0, 3.0}, {1.0, 1.0, 3.0}, {-1.0, 1.0, 3.0}, {-1.0, -1.0, 3.0}};
  return m;
}

MissionResult run_waypoint_mission(Controller& controller, Platform platform,
                                   const MissionSpec& mission, const EnvSettings& settings,
                                   std::uint64_t seed) {
  mission.validate();
  EnvSettings s = settings;
  s.episode.target_position_m = mission.start_m;
  s.episode.max_steps = mission.steps_per_waypoint * mission.waypoints.size();
  MultirotorEnv env(s, platform, derive_seed(seed, Stream::Trial, 0));
  env.set_bounds_enabled(false);
  if (mission.randomize_start) {
    env.reset(s.episode.so3_warmup_episodes);
  } else {
    env.reset_to(hover_state(s.sim, mission.start_m));
  }
  controller.reset();

  MissionResult result;
  result.reached.assign(mission.waypoints.size(), false);
  result.reach_step.assign(mission.waypoints.size(), -1);
  std::size_t current = 0;
  std::uint64_t leg_start = 0;
  env.set_target(mission.waypoints[0]);

  std::array<double, 8> action{};
  auto record = [&](double reward) {
    result.trace.push_back(make_row(env, action, reward));
    result.target_index.push_back(current);
  };
  // Advances past every waypoint already within tolerance.
  auto check_reach = [&]() {
    while (current < mission.waypoints.size() &&
           (env.state().position_m - mission.waypoints[current]).norm() < mission.reach_tolerance_m) {
      result.reached[current] = true;
      result.reach_step[current] = static_cast<std::int64_t>(env.t());
      ++current;
      leg_start = env.t();
      if (current < mission.waypoints.size()) env.set_target(mission.waypoints[current]);
    }
  };

  record(0.0);
  check_reach();
  Observation obs = env.observation();
  while (current < mission.waypoints.size()) {
    if (env.t() - leg_start >= mission.steps_per_waypoint) {
      result.termination = Termination::MaxSteps;
      break;
    }
    const StepResult step = controller.act(env, obs, action);
    record(step.reward);
    if (step.status == Termination::Diverged) {
      result.termination = Termination::Diverged;
      break;
    }
    check_reach();
    obs = env.observation();
  }
  result.all_reached = current == mission.waypoints.size();
  if (result.all_reached) result.termination = Termination::Running;
  result.steps = env.t();
  return result;
}

void write_summary_csv(std::ostream& out, const EvalSummary& summary) {
  out << "trial,seed,n_faulty,servo_ids,success,steps_to_reach,final_error_m\n"
      << std::setprecision(10);
  for (const TrialResult& t : summary.trials) {
    std::string ids;
    for (std::size_t k = 0; k < t.faulty_servos.size(); ++k) {
      if (k) ids += ';';
      ids += std::to_string(t.faulty_servos[k]);
    }
    out << t.trial << ',' << t.seed << ',' << t.faulty_servos.size() << ',' << ids << ','
        << (t.success ? 1 : 0) << ',' << t.steps_to_reach << ',' << t.final_error_m << '\n';
  }
}

void write_summary_csv(const std::string& path, const EvalSummary& summary) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  write_summary_csv(out, summary);
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

void write_mission_csv(std::ostream& out, const MissionResult& result) {
  std::ostringstream body;
  write_trace_csv(body, result.trace);
  std::istringstream lines(body.str());
  std::string line;
  std::size_t i = 0;
  bool header = true;
  while (std::getline(lines, line)) {
    if (header) {
      out << line << ",waypoint\n";
      header = false;
    } else {
      out << line << ',' << result.target_index[i++] << '\n';
    }
  }
}

}  // namespace devrl
