#pragma once

// Flat key = value run configuration. Every key is required; '#' starts a
// comment. Vectors are comma separated. An environment variable named
// DEVRL_<KEY> (key upper-cased) overrides the file value.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "devrl/env.hpp"
#include "devrl/evalsuite.hpp"
#include "devrl/pid.hpp"
#include "devrl/ppo.hpp"
#include "devrl/transfer.hpp"

namespace devrl {

struct RunConfig {
  SimParams sim;
  EpisodeConfig episode;
  RewardWeights reward;
  TrainConfig train;
  TransferOptions transfer;
  PidGains pid;
  EvalConfig eval;
  double fault_response_probability = 0.4;
  MissionSpec mission = default_mission();

  EnvSettings env_settings() const { return {sim, episode, reward}; }
  // Throws Error(ConfigError) naming the first bad key.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

// All recognised keys in canonical order.
std::vector<std::string> config_keys();

std::string env_var_name(std::string_view key);

// Throws Error(ConfigError) for unknown, duplicate, missing or malformed keys.
RunConfig parse_config(std::string_view text, const EnvLookup& env = process_env);
// Throws Error(IoError) if the file cannot be read.
RunConfig load_config(const std::string& path, const EnvLookup& env = process_env);

// Canonical text form; parse_config(to_config_text(c)) reproduces c exactly.
std::string to_config_text(const RunConfig& config);

}  // namespace devrl
