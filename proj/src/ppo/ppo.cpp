#include "devrl/ppo.hpp"

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

constexpr std::size_t kEpisodeWindow = 20;

void require_config(bool ok, const char* field, const char* what) {
  if (!ok) throw Error(ErrorKind::ConfigError, std::string(field) + ": " + what);
}

}  // namespace

void TrainConfig::validate() const {
  require_config(total_steps > 0, "total_steps", "must be positive");
  require_config(lr0 >= 0.0, "lr0", "must be non-negative");
  require_config(gamma >= 0.0 && gamma < 1.0, "gamma", "must lie in [0, 1)");
  require_config(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda", "must lie in [0, 1]");
  require_config(clip_eps > 0.0, "clip_eps", "must be positive");
  require_config(epochs_per_update > 0, "epochs_per_update", "must be positive");
  require_config(minibatch_size > 0, "minibatch_size", "must be positive");
  require_config(value_loss_coef >= 0.0, "value_loss_coef", "must be non-negative");
  require_config(sigma > 0.0, "sigma", "must be positive");
  require_config(num_envs > 0, "num_envs", "must be positive");
  require_config(rollout_horizon > 0 && rollout_horizon % num_envs == 0, "rollout_horizon",
                 "must be a positive multiple of num_envs");
  require_config(!hidden_sizes.empty(), "hidden_sizes", "needs at least one hidden layer");
  for (std::size_t h : hidden_sizes) require_config(h > 0, "hidden_sizes", "widths must be positive");
  require_config(max_grad_norm >= 0.0, "max_grad_norm", "must be non-negative");
}

std::uint64_t TrainConfig::update_count() const {
  return (total_steps + rollout_horizon - 1) / rollout_horizon;
}

void RolloutBuffer::resize(std::size_t envs, std::size_t steps, std::size_t obs, std::size_t act) {
  num_envs = envs;
  steps_per_env = steps;
  obs_dim = obs;
  act_dim = act;
  const std::size_t n = envs * steps;
  observations.assign(n * obs, 0.0);
  actions.assign(n * act, 0.0);
  log_probs.assign(n, 0.0);
  rewards.assign(n, 0.0);
  values.assign(n, 0.0);
  next_values.assign(n, 0.0);
  terminals.assign(n, 0);
  episode_ends.assign(n, 0);
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  completed_returns.clear();
  completed_lengths.clear();
}

EnvPool::EnvPool(const EnvSettings& settings, Platform platform, std::size_t count,
                 std::uint64_t seed)
    : platform_(platform) {
  envs_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    envs_.emplace_back(settings, platform, derive_seed(seed, Stream::Env, i));
    action_rngs_.push_back(make_rng(seed, Stream::Action, i));
  }
  observations_.resize(count);
  episode_returns_.assign(count, 0.0);
  episode_lengths_.assign(count, 0);
  for (std::size_t i = 0; i < count; ++i) reset(i);
}

void EnvPool::reset(std::size_t i) {
  observations_[i] = envs_[i].reset(completed_episodes_).flatten();
  episode_returns_[i] = 0.0;
  episode_lengths_[i] = 0;
}

void EnvPool::record_step(std::size_t i, double reward) {
  episode_returns_[i] += reward;
  ++episode_lengths_[i];
}

std::pair<double, std::uint64_t> EnvPool::finish_episode(std::size_t i) {
  ++completed_episodes_;
  return {episode_returns_[i], episode_lengths_[i]};
}

void collect_rollout(const Mlp& actor, const Mlp& critic, EnvPool& pool, const TrainConfig& cfg,
                     RolloutBuffer& buffer) {
  const Platform platform = pool.platform();
  const std::size_t obs_dim = observation_dim(platform);
  const std::size_t act_dim = action_dim(platform);
  if (actor.input_dim() != obs_dim || actor.output_dim() != act_dim ||
      critic.input_dim() != obs_dim || critic.output_dim() != 1) {
    throw Error(ErrorKind::DimensionMismatch, "networks do not match the platform");
  }
  const std::size_t envs = pool.size();
  const std::size_t steps = cfg.rollout_horizon / envs;
  buffer.resize(envs, steps, obs_dim, act_dim);

  std::normal_distribution<double> noise(0.0, 1.0);
  Mlp::Activations cache;
  std::vector<double> action(act_dim);

  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t e = 0; e < envs; ++e) {
      const std::size_t idx = e * steps + t;
      std::vector<double>& obs = pool.current_observation(e);
      std::copy(obs.begin(), obs.end(), buffer.observations.begin() + idx * obs_dim);

      actor.forward(obs, cache);
      const std::vector<double>& mean = cache.values.back();
      Rng& rng = pool.action_rng(e);
      for (std::size_t k = 0; k < act_dim; ++k) action[k] = mean[k] + cfg.sigma * noise(rng);
      std::copy(action.begin(), action.end(), buffer.actions.begin() + idx * act_dim);
      buffer.log_probs[idx] = gaussian_log_prob(mean, cfg.sigma, action);
      buffer.values[idx] = critic.forward(obs)[0];

      const StepResult result = pool.env(e).step(action);
      buffer.rewards[idx] = result.reward;
      pool.record_step(e, result.reward);

      if (result.status == Termination::Running) {
        result.obs.flatten_into(obs);
        continue;
      }
      buffer.episode_ends[idx] = 1;
      if (result.status == Termination::MaxSteps) {
        buffer.next_values[idx] = critic.forward(result.obs.flatten())[0];
      } else {
        buffer.terminals[idx] = 1;
        buffer.next_values[idx] = 0.0;
      }
      const auto [ret, len] = pool.finish_episode(e);
      buffer.completed_returns.push_back(ret);
      buffer.completed_lengths.push_back(len);
      pool.reset(e);
    }
  }

  for (std::size_t e = 0; e < envs; ++e) {
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t idx = e * steps + t;
      if (buffer.episode_ends[idx]) continue;
      if (t + 1 < steps) {
        buffer.next_values[idx] = buffer.values[idx + 1];
      } else {
        buffer.episode_ends[idx] = 1;
        buffer.next_values[idx] = critic.forward(pool.current_observation(e))[0];
      }
    }
  }
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "compute_gae: values must have T+1 and dones T entries");
  }
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_advantage = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next_advantage = delta + gamma * lambda * live * next_advantage;
    out.advantages[t] = next_advantage;
    out.returns[t] = next_advantage + values[t];
  }
  return out;
}

void compute_gae(RolloutBuffer& b, double gamma, double lambda) {
  const std::size_t n = b.size();
  b.advantages.assign(n, 0.0);
  b.returns.assign(n, 0.0);
  double next_advantage = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double bootstrap = b.terminals[t] ? 0.0 : 1.0;
    const double carry = b.episode_ends[t] ? 0.0 : 1.0;
    const double delta = b.rewards[t] + gamma * b.next_values[t] * bootstrap - b.values[t];
    next_advantage = delta + gamma * lambda * carry * next_advantage;
    b.advantages[t] = next_advantage;
    b.returns[t] = next_advantage + b.values[t];
  }
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

void normalize_advantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / n);
  for (double& a : advantages) a = (a - mean) / (stddev + 1e-8);
}

namespace {

void clip_gradient(std::span<double> grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
}

[[noreturn]] void non_finite_loss(const char* which, std::size_t sample, double value) {
  std::ostringstream msg;
  msg << which << " loss is " << value << " (sample " << sample << ")";
  throw Error(ErrorKind::NonFiniteLoss, msg.str());
}

}  // namespace

SurrogateTerms accumulate_surrogate_gradient(const Mlp& actor, const RolloutBuffer& buffer,
                                             std::span<const std::size_t> batch,
                                             const TrainConfig& cfg, std::span<double> grad) {
  SurrogateTerms terms;
  if (batch.empty()) return terms;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double inv_var = 1.0 / (cfg.sigma * cfg.sigma);
  std::vector<double> upstream(actor.output_dim());
  Mlp::Activations cache;
  for (std::size_t i : batch) {
    const std::span<const double> obs = buffer.observation(i);
    const std::span<const double> act = buffer.action(i);
    const double adv = buffer.advantages[i];

    actor.forward(obs, cache);
    const std::vector<double>& mean = cache.values.back();
    const double log_prob = gaussian_log_prob(mean, cfg.sigma, act);
    const double ratio = std::exp(log_prob - buffer.log_probs[i]);
    const double surrogate = clipped_surrogate(ratio, adv, cfg.clip_eps);
    if (!std::isfinite(surrogate)) non_finite_loss("policy", i, surrogate);
    terms.loss_sum -= surrogate;
    if (std::abs(ratio - 1.0) > cfg.clip_eps) ++terms.clipped;

    // d(-surrogate)/d(mean) is zero once the clipped branch is the minimum.
    const bool unclipped_active = adv >= 0.0 ? ratio <= 1.0 + cfg.clip_eps
                                             : ratio >= 1.0 - cfg.clip_eps;
    if (unclipped_active) {
      const double scale = -inv_batch * ratio * adv * inv_var;
      for (std::size_t j = 0; j < upstream.size(); ++j) upstream[j] = scale * (act[j] - mean[j]);
      actor.accumulate_gradients(cache, upstream, grad);
    }
  }
  return terms;
}

UpdateStats ppo_update(Mlp& actor, Mlp& critic, AdamState& actor_opt, AdamState& critic_opt,
                       RolloutBuffer& buffer, const TrainConfig& cfg, double progress, Rng& rng) {
  const std::size_t n = buffer.size();
  if (n == 0) return {};
  normalize_advantages(buffer.advantages);

  UpdateStats stats;
  stats.lr = cfg.lr0 * std::max(0.0, 1.0 - progress);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> actor_grad(actor.parameter_count());
  std::vector<double> critic_grad(critic.parameter_count());
  Mlp::Activations critic_cache;

  double policy_loss_sum = 0.0;
  double value_loss_sum = 0.0;
  std::size_t clipped = 0;

  for (std::uint32_t epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      const std::size_t end = std::min(n, start + cfg.minibatch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
      std::fill(critic_grad.begin(), critic_grad.end(), 0.0);

      const std::span<const std::size_t> batch(order.data() + start, end - start);
      const SurrogateTerms terms =
          accumulate_surrogate_gradient(actor, buffer, batch, cfg, actor_grad);
      policy_loss_sum += terms.loss_sum;
      clipped += terms.clipped;

      for (std::size_t i : batch) {
        const std::span<const double> obs = buffer.observation(i);
        critic.forward(obs, critic_cache);
        const double err = critic_cache.values.back()[0] - buffer.returns[i];
        const double value_loss = cfg.value_loss_coef * err * err;
        if (!std::isfinite(value_loss)) non_finite_loss("value", i, value_loss);
        value_loss_sum += value_loss;
        const double critic_upstream = 2.0 * cfg.value_loss_coef * err * inv_batch;
        critic.accumulate_gradients(critic_cache, std::span<const double>(&critic_upstream, 1),
                                    critic_grad);
      }

      actor.mask_frozen(actor_grad);
      critic.mask_frozen(critic_grad);
      clip_gradient(actor_grad, cfg.max_grad_norm);
      clip_gradient(critic_grad, cfg.max_grad_norm);
      adam_step(actor, actor_opt, actor_grad, stats.lr);
      adam_step(critic, critic_opt, critic_grad, stats.lr);
    }
  }

  const double seen = static_cast<double>(n) * cfg.epochs_per_update;
  stats.policy_loss = policy_loss_sum / seen;
  stats.value_loss = value_loss_sum / seen;
  stats.clip_fraction = static_cast<double>(clipped) / seen;
  return stats;
}

Networks make_networks(Platform platform, const TrainConfig& cfg, Rng& rng) {
  std::vector<std::size_t> actor_dims{observation_dim(platform)};
  actor_dims.insert(actor_dims.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  std::vector<std::size_t> critic_dims = actor_dims;
  actor_dims.push_back(action_dim(platform));
  critic_dims.push_back(1);
  Mlp actor = Mlp::xavier(actor_dims, OutputActivation::Tanh, rng);
  Mlp critic = Mlp::xavier(critic_dims, OutputActivation::Identity, rng);
  return with_fresh_optimizers(std::move(actor), std::move(critic), cfg);
}

Networks with_fresh_optimizers(Mlp actor, Mlp critic, const TrainConfig& cfg) {
  Networks nets;
  nets.actor_opt = AdamState(actor.parameter_count(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  nets.critic_opt =
      AdamState(critic.parameter_count(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  nets.actor = std::move(actor);
  nets.critic = std::move(critic);
  return nets;
}

std::string training_log_header() {
  return "update_index,env_steps,lr,mean_ep_reward,mean_ep_len,policy_loss,value_loss,clip_fraction";
}

void write_training_log(std::ostream& out, std::span<const TrainingLogRow> rows) {
  out << training_log_header() << '\n' << std::setprecision(10);
  for (const TrainingLogRow& r : rows) {
    out << r.update_index << ',' << r.env_steps << ',' << r.lr << ',' << r.mean_ep_reward << ','
        << r.mean_ep_len << ',' << r.policy_loss << ',' << r.value_loss << ',' << r.clip_fraction
        << '\n';
  }
}

void write_training_log(const std::string& path, std::span<const TrainingLogRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path);
  write_training_log(out, rows);
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

TrainResult train(Platform platform, const EnvSettings& settings, const TrainConfig& cfg,
                  Networks initial, const TrainHooks& hooks) {
  cfg.validate();
  const std::size_t obs_dim = observation_dim(platform);
  if (initial.actor.input_dim() != obs_dim || initial.actor.output_dim() != action_dim(platform) ||
      initial.critic.input_dim() != obs_dim || initial.critic.output_dim() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "initial networks do not match platform " +
                                              std::string(platform_name(platform)));
  }

  TrainResult result;
  result.nets = std::move(initial);
  Networks& nets = result.nets;
  EnvPool pool(settings, platform, cfg.num_envs, cfg.seed);
  Rng shuffle_rng = make_rng(cfg.seed, Stream::Shuffle);
  RolloutBuffer buffer;
  std::deque<std::pair<double, std::uint64_t>> recent;

  const std::uint64_t updates = cfg.update_count();
  for (std::uint64_t u = 0; u < updates; ++u) {
    collect_rollout(nets.actor, nets.critic, pool, cfg, buffer);
    result.env_steps += buffer.size();
    compute_gae(buffer, cfg.gamma, cfg.gae_lambda);
    for (std::size_t k = 0; k < buffer.completed_returns.size(); ++k) {
      recent.emplace_back(buffer.completed_returns[k], buffer.completed_lengths[k]);
      if (recent.size() > kEpisodeWindow) recent.pop_front();
    }
    const double progress = static_cast<double>(u) / static_cast<double>(updates);
    const UpdateStats stats = ppo_update(nets.actor, nets.critic, nets.actor_opt, nets.critic_opt,
                                         buffer, cfg, progress, shuffle_rng);
    ++result.updates;

    TrainingLogRow row;
    row.update_index = u;
    row.env_steps = result.env_steps;
    row.lr = stats.lr;
    if (recent.empty()) {
      row.mean_ep_reward = std::numeric_limits<double>::quiet_NaN();
      row.mean_ep_len = std::numeric_limits<double>::quiet_NaN();
    } else {
      double ret = 0.0;
      double len = 0.0;
      for (const auto& [r, l] : recent) {
        ret += r;
        len += static_cast<double>(l);
      }
      row.mean_ep_reward = ret / static_cast<double>(recent.size());
      row.mean_ep_len = len / static_cast<double>(recent.size());
    }
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.clip_fraction = stats.clip_fraction;
    result.log.push_back(row);

    if (hooks.on_update) hooks.on_update(row, nets);
    const bool last = u + 1 == updates;
    const bool periodic = cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0;
    if (hooks.on_checkpoint && (periodic || last)) {
      hooks.on_checkpoint(nets, result.updates, result.env_steps);
    }
  }
  return result;
}

}  // namespace devrl
