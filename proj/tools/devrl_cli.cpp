// devrl: train quadcopter / tilt-rotor policies and run evaluations.
//
//   devrl train-quad --config configs/default.cfg --seed 1 --out runs/quad
//   devrl train-tilt --from runs/quad/final.ckpt --out runs/tilt
//   devrl train-tilt --scratch --out runs/tilt_scratch
//   devrl eval --checkpoint runs/tilt/final.ckpt --mode ablate --faulty 2 --trials 100
//   devrl eval --mode waypoint --controller pid
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "devrl/checkpoint.hpp"
#include "devrl/config.hpp"
#include "devrl/error.hpp"
#include "devrl/evalsuite.hpp"
#include "devrl/kernels.hpp"
#include "devrl/transfer.hpp"

#ifndef DEVRL_VERSION
#define DEVRL_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace devrl;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = "run";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? parse_config(to_config_text(RunConfig{}))
                                        : load_config(c.config_path);
  if (c.seed) cfg.train.seed = *c.seed;
  if (c.steps) cfg.train.total_steps = *c.steps;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value config file (defaults built in)");
  app->add_option("--out", c.out_dir, "output directory")->capture_default_str();
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--steps", c.steps, "environment step budget (overrides total_steps)");
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  std::istringstream lines(to_config_text(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& stage,
                    const RunConfig& cfg, const json& artifacts, const json& extra,
                    const std::vector<std::string>& argv) {
  json m;
  m["command"] = command;
  m["stage"] = stage;
  m["code_version"] = DEVRL_VERSION;
  m["kernel_isa"] = std::string(kernels::isa_name(kernels::active().isa));
  m["seed"] = cfg.train.seed;
  m["argv"] = argv;
  m["config"] = config_json(cfg);
  m["artifacts"] = artifacts;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  write_text(dir / "config.cfg", to_config_text(cfg));
}

fs::path prepare_dir(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out + ": " + ec.message());
  return dir;
}

Checkpoint to_checkpoint(const Networks& nets, std::uint64_t seed, std::uint64_t steps,
                         std::uint64_t updates) {
  return Checkpoint{nets.actor, nets.critic, nets.actor_opt, nets.critic_opt, seed, steps, updates};
}

TrainHooks make_hooks(const fs::path& dir, const RunConfig& cfg) {
  TrainHooks hooks;
  const std::uint64_t total = cfg.train.update_count();
  hooks.on_update = [total](const TrainingLogRow& row, const Networks&) {
    if (row.update_index % 10 == 0 || row.update_index + 1 == total) {
      std::fprintf(stderr, "update %llu/%llu  steps %llu  mean_ep_reward %.1f  mean_ep_len %.1f\n",
                   static_cast<unsigned long long>(row.update_index + 1),
                   static_cast<unsigned long long>(total),
                   static_cast<unsigned long long>(row.env_steps), row.mean_ep_reward,
                   row.mean_ep_len);
    }
  };
  hooks.on_checkpoint = [dir, seed = cfg.train.seed](const Networks& nets, std::uint64_t updates,
                                                     std::uint64_t steps) {
    char name[64];
    std::snprintf(name, sizeof name, "ckpt_%06llu.ckpt", static_cast<unsigned long long>(updates));
    save_checkpoint((dir / "checkpoints" / name).string(), to_checkpoint(nets, seed, steps, updates));
  };
  return hooks;
}

void finish_training(const fs::path& dir, const RunConfig& cfg, const TrainResult& result) {
  write_training_log((dir / "training_log.csv").string(), result.log);
  save_checkpoint((dir / "final.ckpt").string(),
                  to_checkpoint(result.nets, cfg.train.seed, result.env_steps, result.updates));
  std::fprintf(stderr, "wrote %s\n", (dir / "final.ckpt").string().c_str());
}

json training_artifacts() {
  return {{"checkpoints", "checkpoints/"},
          {"final_checkpoint", "final.ckpt"},
          {"training_log", "training_log.csv"},
          {"config_snapshot", "config.cfg"}};
}

int cmd_train_quad(const Common& c, const std::vector<std::string>& argv) {
  const RunConfig cfg = load(c);
  const fs::path dir = prepare_dir(c.out_dir);
  fs::create_directories(dir / "checkpoints");
  write_manifest(dir, "train-quad", "quad", cfg, training_artifacts(), json::object(), argv);

  Rng init = make_rng(cfg.train.seed, Stream::WeightInit);
  const TrainResult result = train(Platform::Quad, cfg.env_settings(), cfg.train,
                                   make_networks(Platform::Quad, cfg.train, init),
                                   make_hooks(dir, cfg));
  finish_training(dir, cfg, result);
  return 0;
}

int cmd_train_tilt(const Common& c, const std::string& from, bool scratch,
                   const std::vector<std::string>& argv) {
  if (from.empty() == !scratch) throw UsageError("train-tilt needs exactly one of --from or --scratch");
  const RunConfig cfg = load(c);
  const fs::path dir = prepare_dir(c.out_dir);
  fs::create_directories(dir / "checkpoints");

  std::optional<Checkpoint> source;
  if (!scratch) source = load_checkpoint(from);

  json artifacts = training_artifacts();
  json extra = json::object();
  if (!scratch) {
    artifacts["transfer_report"] = "transfer_report.txt";
    artifacts["transfer_report_csv"] = "transfer_report.csv";
    extra["source_checkpoint"] = from;
  }
  write_manifest(dir, "train-tilt", scratch ? "tilt-conventional" : "tilt-developmental", cfg,
                 artifacts, extra, argv);

  const TrainHooks hooks = make_hooks(dir, cfg);
  TrainResult result;
  if (scratch) {
    Rng init = make_rng(cfg.train.seed, Stream::WeightInit);
    result = train(Platform::TiltRotor, cfg.env_settings(), cfg.train,
                   make_networks(Platform::TiltRotor, cfg.train, init), hooks);
  } else {
    // Transfer first so a shape mismatch is reported before any training.
    Rng rng = make_rng(cfg.train.seed, Stream::Transfer);
    TransferredNetwork actor = build_tilt_actor(source->actor, rng, cfg.transfer);
    TransferredNetwork critic = build_tilt_critic(source->critic, rng);
    std::ostringstream text;
    write_transfer_report_text(text, actor.report);
    write_transfer_report_text(text, critic.report);
    write_text(dir / "transfer_report.txt", text.str());
    std::ostringstream csv;
    const std::vector<TransferReport> reports{actor.report, critic.report};
    write_transfer_report_csv(csv, reports);
    write_text(dir / "transfer_report.csv", csv.str());
    std::fputs(text.str().c_str(), stderr);
    result = train(Platform::TiltRotor, cfg.env_settings(), cfg.train,
                   with_fresh_optimizers(std::move(actor.net), std::move(critic.net), cfg.train),
                   hooks);
  }
  finish_training(dir, cfg, result);
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string mode = "hover";
  std::string controller = "policy";
  std::size_t trials = 10;
  std::size_t faulty = 1;
};

void write_traces(const fs::path& dir, const EvalSummary& summary) {
  fs::create_directories(dir / "traces");
  for (const TrialResult& t : summary.trials) {
    char name[64];
    std::snprintf(name, sizeof name, "trial_%04llu.csv", static_cast<unsigned long long>(t.trial));
    write_trace_csv((dir / "traces" / name).string(), t.trace);
  }
}

int cmd_eval(const Common& c, const EvalArgs& a, const std::vector<std::string>& argv) {
  if (a.controller == "pid" && a.mode != "waypoint" && a.mode != "hover") {
    throw UsageError("--controller pid supports hover and waypoint modes");
  }
  const bool needs_policy = a.controller == "policy";
  if (needs_policy && a.checkpoint.empty()) throw UsageError("--checkpoint is required for policy evaluation");
  const RunConfig cfg = load(c);
  const fs::path dir = prepare_dir(c.out_dir);
  const std::uint64_t seed = cfg.train.seed;

  std::optional<Checkpoint> ckpt;
  if (needs_policy) ckpt = load_checkpoint(a.checkpoint);
  const Platform platform = ckpt ? platform_for(ckpt->actor) : Platform::TiltRotor;

  json artifacts;
  json extra = {{"mode", a.mode}, {"controller", a.controller}};
  if (ckpt) extra["checkpoint"] = a.checkpoint;
  if (a.mode == "waypoint") {
    artifacts = {{"trace", "mission_trace.csv"}, {"summary", "mission_summary.csv"}};
  } else {
    artifacts = {{"traces", "traces/"}, {"summary", "summary.csv"}};
    extra["trials"] = a.trials;
    if (a.mode == "ablate") extra["faulty"] = a.faulty;
  }
  write_manifest(dir, "eval", "eval-" + a.mode, cfg, artifacts, extra, argv);

  const EnvSettings settings = cfg.env_settings();
  std::unique_ptr<Controller> controller;
  if (needs_policy) controller = std::make_unique<PolicyController>(ckpt->actor);
  else controller = std::make_unique<PidBaseline>(cfg.sim, cfg.pid);

  if (a.mode == "waypoint") {
    const MissionResult m = run_waypoint_mission(*controller, platform, cfg.mission, settings, seed);
    std::ofstream trace(dir / "mission_trace.csv");
    write_mission_csv(trace, m);
    std::ofstream summary(dir / "mission_summary.csv");
    summary << "waypoint,x,y,z,reached,reach_step\n";
    for (std::size_t i = 0; i < m.reached.size(); ++i) {
      const Eigen::Vector3d& w = cfg.mission.waypoints[i];
      summary << i << ',' << w.x() << ',' << w.y() << ',' << w.z() << ',' << (m.reached[i] ? 1 : 0)
              << ',' << m.reach_step[i] << '\n';
    }
    if (!trace || !summary) throw Error(ErrorKind::IoError, "failed writing mission output");
    std::printf("waypoints reached: %zu/%zu  all_reached=%s  steps=%llu\n",
                static_cast<std::size_t>(std::ranges::count(m.reached, true)), m.reached.size(),
                m.all_reached ? "true" : "false", static_cast<unsigned long long>(m.steps));
    return 0;
  }

  EvalSummary summary;
  if (a.mode == "hover") {
    summary = run_hover_eval(*controller, platform, a.trials, settings, cfg.eval, seed);
  } else {
    // Ablation starts inside the unit ball around the target regardless of eval_init_region.
    EvalConfig ablate = cfg.eval;
    ablate.init_region = InitRegion::Ball;
    summary = run_fault_ablation(ckpt->actor, a.faulty, a.trials, settings, ablate, seed,
                                 cfg.fault_response_probability);
  }
  write_traces(dir, summary);
  write_summary_csv((dir / "summary.csv").string(), summary);
  std::printf("successes: %zu/%zu  mean_return %.1f\n", summary.success_count(),
              summary.trials.size(), summary.mean_return());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Developmental reinforcement learning for quadcopter and tilt-rotor UAVs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DEVRL_VERSION);
  const std::vector<std::string> args(argv, argv + argc);

  Common quad_common;
  CLI::App* quad = app.add_subcommand("train-quad", "train the quadcopter policy from scratch");
  add_common(quad, quad_common);

  Common tilt_common;
  std::string from;
  bool scratch = false;
  CLI::App* tilt = app.add_subcommand("train-tilt", "train the tilt-rotor policy");
  add_common(tilt, tilt_common);
  tilt->add_option("--from", from, "quadcopter checkpoint to transfer from");
  tilt->add_flag("--scratch", scratch, "train fresh 22-in/8-out networks");

  Common eval_common;
  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a policy or the PID baseline");
  add_common(eval, eval_common);
  eval->add_option("--checkpoint", eval_args.checkpoint, "policy checkpoint");
  eval->add_option("--mode", eval_args.mode, "hover, waypoint or ablate")
      ->check(CLI::IsMember({"hover", "waypoint", "ablate"}))
      ->capture_default_str();
  eval->add_option("--controller", eval_args.controller, "policy or pid")
      ->check(CLI::IsMember({"policy", "pid"}))
      ->capture_default_str();
  eval->add_option("--trials", eval_args.trials, "number of trials")->capture_default_str();
  eval->add_option("--faulty", eval_args.faulty, "faulty servos (ablate; starts use the ball init region)")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*quad) return cmd_train_quad(quad_common, args);
    if (*tilt) return cmd_train_tilt(tilt_common, from, scratch, args);
    if (*eval) return cmd_eval(eval_common, eval_args, args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
