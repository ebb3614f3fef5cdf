#pragma once

// Proximal policy optimisation with a fixed-variance Gaussian policy,
// generalised advantage estimation, and separate actor/critic networks.

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "devrl/env.hpp"
#include "devrl/mlp.hpp"

namespace devrl {

struct TrainConfig {
  std::uint64_t total_steps = 2'000'000;
  double lr0 = 5e-5;
  double gamma = 0.95;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  std::uint32_t epochs_per_update = 10;
  std::uint32_t minibatch_size = 32;
  double value_loss_coef = 0.5;
  double sigma = 1.0;  // action standard deviation (variance 1.0)
  std::uint32_t rollout_horizon = 2048;  // records per update, summed over envs
  std::uint32_t num_envs = 8;
  std::vector<std::size_t> hidden_sizes{64, 64};
  double max_grad_norm = 0.0;  // 0 disables clipping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint32_t checkpoint_every = 50;  // updates; 0 disables
  std::uint64_t seed = 1;

  void validate() const;
  std::uint64_t update_count() const;
};

// Records are stored env-major: env e owns indices
// [e * steps_per_env, (e + 1) * steps_per_env), in time order.
struct RolloutBuffer {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t num_envs = 0;
  std::size_t steps_per_env = 0;

  std::vector<double> observations;  // size() * obs_dim
  std::vector<double> actions;       // pre-clamp samples, size() * act_dim
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> next_values;     // V(s_{t+1}); critic bootstrap at truncations and segment ends
  std::vector<std::uint8_t> terminals;     // true termination: no bootstrap
  std::vector<std::uint8_t> episode_ends;  // terminal, truncated, or end of this env's segment
  std::vector<double> advantages;
  std::vector<double> returns;

  std::vector<double> completed_returns;
  std::vector<std::uint64_t> completed_lengths;

  std::size_t size() const { return rewards.size(); }
  void resize(std::size_t envs, std::size_t steps, std::size_t obs, std::size_t act);
  std::span<const double> observation(std::size_t i) const {
    return std::span<const double>(observations).subspan(i * obs_dim, obs_dim);
  }
  std::span<const double> action(std::size_t i) const {
    return std::span<const double>(actions).subspan(i * act_dim, act_dim);
  }
};

// A set of environments stepped in lockstep. Environments persist across
// rollouts; an episode that spans two rollouts is bootstrapped at the cut.
class EnvPool {
 public:
  EnvPool(const EnvSettings& settings, Platform platform, std::size_t count, std::uint64_t seed);

  std::size_t size() const { return envs_.size(); }
  Platform platform() const { return platform_; }
  MultirotorEnv& env(std::size_t i) { return envs_[i]; }
  std::vector<double>& current_observation(std::size_t i) { return observations_[i]; }
  Rng& action_rng(std::size_t i) { return action_rngs_[i]; }

  // Resets env i; the SO(3) warmup index is the pool-wide completed-episode count.
  void reset(std::size_t i);
  void record_step(std::size_t i, double reward);
  // Closes env i's episode, returning its (return, length).
  std::pair<double, std::uint64_t> finish_episode(std::size_t i);
  std::uint64_t completed_episodes() const { return completed_episodes_; }

 private:
  Platform platform_;
  std::vector<MultirotorEnv> envs_;
  std::vector<std::vector<double>> observations_;
  std::vector<Rng> action_rngs_;
  std::vector<double> episode_returns_;
  std::vector<std::uint64_t> episode_lengths_;
  std::uint64_t completed_episodes_ = 0;
};

// Runs every env for rollout_horizon / num_envs steps with a ~ N(actor(obs), sigma^2 I).
void collect_rollout(const Mlp& actor, const Mlp& critic, EnvPool& pool, const TrainConfig& cfg,
                     RolloutBuffer& buffer);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// values has rewards.size() + 1 entries (the last is the bootstrap value).
// A done flag stops both bootstrapping and the advantage recursion.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda);

// Fills buffer.advantages and buffer.returns from the stored rollout.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double clip_eps);

struct UpdateStats {
  double lr = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

// Normalises advantages in place (mean 0, std 1, eps 1e-8).
void normalize_advantages(std::span<double> advantages);

struct SurrogateTerms {
  double loss_sum = 0.0;  // sum of -surrogate over the batch
  std::size_t clipped = 0;
};

// Adds the gradient of the batch-mean negated clipped surrogate into grad
// (frozen entries not masked).
SurrogateTerms accumulate_surrogate_gradient(const Mlp& actor, const RolloutBuffer& buffer,
                                             std::span<const std::size_t> batch,
                                             const TrainConfig& cfg, std::span<double> grad);

// Runs epochs_per_update passes of shuffled minibatches. The learning rate is
// lr0 * (1 - progress). Throws Error(NonFiniteLoss) if a loss becomes NaN/Inf.
UpdateStats ppo_update(Mlp& actor, Mlp& critic, AdamState& actor_opt, AdamState& critic_opt,
                       RolloutBuffer& buffer, const TrainConfig& cfg, double progress, Rng& rng);

struct Networks {
  Mlp actor;
  Mlp critic;
  AdamState actor_opt;
  AdamState critic_opt;
};

// Fresh Xavier-initialised networks for a platform.
Networks make_networks(Platform platform, const TrainConfig& cfg, Rng& rng);
// Wraps existing networks with zeroed Adam state.
Networks with_fresh_optimizers(Mlp actor, Mlp critic, const TrainConfig& cfg);

struct TrainingLogRow {
  std::uint64_t update_index = 0;
  std::uint64_t env_steps = 0;
  double lr = 0.0;
  double mean_ep_reward = 0.0;
  double mean_ep_len = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

std::string training_log_header();
void write_training_log(std::ostream& out, std::span<const TrainingLogRow> rows);
void write_training_log(const std::string& path, std::span<const TrainingLogRow> rows);

struct TrainHooks {
  // Called after every update with the freshly updated networks.
  std::function<void(const TrainingLogRow&, const Networks&)> on_update;
  // Called every cfg.checkpoint_every updates and after the last one.
  std::function<void(const Networks&, std::uint64_t updates, std::uint64_t env_steps)> on_checkpoint;
};

struct TrainResult {
  Networks nets;
  std::vector<TrainingLogRow> log;
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
};

TrainResult train(Platform platform, const EnvSettings& settings, const TrainConfig& cfg,
                  Networks initial, const TrainHooks& hooks = {});

}  // namespace devrl
