#include "devrl/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "devrl/error.hpp"

namespace devrl {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::ConfigError, key + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const std::size_t comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double parse_double(const std::string& key, std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    bad(key, "expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    bad(key, "expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad(key, "expected true or false, got '" + std::string(s) + "'");
}

std::vector<double> parse_doubles(const std::string& key, std::string_view s, std::size_t n) {
  std::vector<double> out;
  for (std::string_view item : split_list(s)) out.push_back(parse_double(key, item));
  if (n != 0 && out.size() != n) {
    bad(key, "expected " + std::to_string(n) + " values, got " + std::to_string(out.size()));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt_list(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s;
}

template <typename Vec>
std::string fmt_vec(const Vec& v) {
  std::vector<double> tmp(v.data(), v.data() + v.size());
  return fmt_list(tmp);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string& key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field real(std::string key, Member member) {
  return {std::move(key),
          [member](RunConfig& c, const std::string& k, std::string_view v) {
            member(c) = parse_double(k, v);
          },
          [member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); }};
}

template <typename T, typename Member>
Field integer(std::string key, Member member) {
  return {std::move(key),
          [member](RunConfig& c, const std::string& k, std::string_view v) {
            const std::uint64_t x = parse_uint(k, v);
            if (x > std::numeric_limits<T>::max()) bad(k, "value too large");
            member(c) = static_cast<T>(x);
          },
          [member](const RunConfig& c) {
            return std::to_string(member(const_cast<RunConfig&>(c)));
          }};
}

template <typename Member>
Field boolean(std::string key, Member member) {
  return {std::move(key),
          [member](RunConfig& c, const std::string& k, std::string_view v) {
            member(c) = parse_bool(k, v);
          },
          [member](const RunConfig& c) {
            return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <int N, typename Member>
Field vec(std::string key, Member member) {
  return {std::move(key),
          [member](RunConfig& c, const std::string& k, std::string_view v) {
            const std::vector<double> x = parse_doubles(k, v, N);
            for (int i = 0; i < N; ++i) member(c)[i] = x[static_cast<std::size_t>(i)];
          },
          [member](const RunConfig& c) { return fmt_vec(member(const_cast<RunConfig&>(c))); }};
}

template <typename Member>
Field range(std::string key, Member member) {
  return {std::move(key),
          [member](RunConfig& c, const std::string& k, std::string_view v) {
            const std::vector<double> x = parse_doubles(k, v, 2);
            member(c) = Range{x[0], x[1]};
          },
          [member](const RunConfig& c) {
            const Range& r = member(const_cast<RunConfig&>(c));
            return fmt(r.min) + ", " + fmt(r.max);
          }};
}

#define M(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(real("mass_kg", M(c.sim.mass_kg)));
    f.push_back(real("arm_length_m", M(c.sim.arm_length_m)));
    f.push_back(vec<3>("inertia_diag", M(c.sim.inertia_diag)));
    f.push_back(real("gravity_mps2", M(c.sim.gravity_mps2)));
    f.push_back(real("moment_ratio_m", M(c.sim.moment_ratio_m)));
    f.push_back(real("motor_lag_s", M(c.sim.motor_lag_s)));
    f.push_back(real("dt_s", M(c.sim.dt_s)));
    f.push_back(range("thrust_range_n", M(c.sim.thrust_range_n)));
    f.push_back(range("tilt_angle_range_rad", M(c.sim.tilt_angle_range_rad)));
    f.push_back(range("tilt_rate_range_radps", M(c.sim.tilt_rate_range_radps)));
    f.push_back(vec<4>("rotor_spin_signs", M(c.sim.rotor_spin_signs)));

    f.push_back(vec<3>("target_position_m", M(c.episode.target_position_m)));
    f.push_back(integer<std::uint64_t>("max_steps", M(c.episode.max_steps)));
    f.push_back(real("bound_halfwidth_m", M(c.episode.bound_halfwidth_m)));
    f.push_back(real("init_pos_halfwidth_m", M(c.episode.init_pos_halfwidth_m)));
    f.push_back(real("init_speed_max_mps", M(c.episode.init_speed_max_mps)));
    f.push_back(real("init_rate_max_radps", M(c.episode.init_rate_max_radps)));
    f.push_back(integer<std::uint64_t>("so3_warmup_episodes", M(c.episode.so3_warmup_episodes)));
    f.push_back(real("euler_init_range_rad", M(c.episode.euler_init_range_rad)));

    f.push_back(real("reward_beta", M(c.reward.beta)));
    f.push_back(real("reward_alpha_a", M(c.reward.alpha_a)));
    f.push_back(real("reward_alpha_p", M(c.reward.alpha_p)));
    f.push_back(real("reward_alpha_v", M(c.reward.alpha_v)));
    f.push_back(real("reward_alpha_omega", M(c.reward.alpha_omega)));
    f.push_back(real("reward_alpha_roll", M(c.reward.alpha_roll)));
    f.push_back(real("reward_alpha_pitch", M(c.reward.alpha_pitch)));
    f.push_back(real("reward_alpha_tilt", M(c.reward.alpha_tilt)));

    f.push_back(integer<std::uint64_t>("total_steps", M(c.train.total_steps)));
    f.push_back(real("lr0", M(c.train.lr0)));
    f.push_back(real("gamma", M(c.train.gamma)));
    f.push_back(real("gae_lambda", M(c.train.gae_lambda)));
    f.push_back(real("clip_eps", M(c.train.clip_eps)));
    f.push_back(integer<std::uint32_t>("epochs_per_update", M(c.train.epochs_per_update)));
    f.push_back(integer<std::uint32_t>("minibatch_size", M(c.train.minibatch_size)));
    f.push_back(real("value_loss_coef", M(c.train.value_loss_coef)));
    f.push_back(real("sigma", M(c.train.sigma)));
    f.push_back(integer<std::uint32_t>("rollout_horizon", M(c.train.rollout_horizon)));
    f.push_back(integer<std::uint32_t>("num_envs", M(c.train.num_envs)));
    f.push_back({"hidden_sizes",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   c.train.hidden_sizes.clear();
                   for (std::string_view item : split_list(v)) {
                     c.train.hidden_sizes.push_back(static_cast<std::size_t>(parse_uint(k, item)));
                   }
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.train.hidden_sizes.size(); ++i) {
                     if (i) s += ", ";
                     s += std::to_string(c.train.hidden_sizes[i]);
                   }
                   return s;
                 }});
    f.push_back(real("max_grad_norm", M(c.train.max_grad_norm)));
    f.push_back(real("adam_beta1", M(c.train.adam_beta1)));
    f.push_back(real("adam_beta2", M(c.train.adam_beta2)));
    f.push_back(real("adam_eps", M(c.train.adam_eps)));
    f.push_back(integer<std::uint32_t>("checkpoint_every", M(c.train.checkpoint_every)));
    f.push_back(integer<std::uint64_t>("seed", M(c.train.seed)));

    f.push_back(boolean("transfer_zero_tilt_columns", M(c.transfer.zero_and_freeze_tilt_columns)));
    f.push_back(boolean("transfer_copy_motor_rows", M(c.transfer.copy_motor_output_rows)));

    f.push_back(real("pid_pos_kp_xy", M(c.pid.pos_kp_xy)));
    f.push_back(real("pid_pos_ki_xy", M(c.pid.pos_ki_xy)));
    f.push_back(real("pid_pos_kd_xy", M(c.pid.pos_kd_xy)));
    f.push_back(real("pid_pos_kp_z", M(c.pid.pos_kp_z)));
    f.push_back(real("pid_pos_ki_z", M(c.pid.pos_ki_z)));
    f.push_back(real("pid_pos_kd_z", M(c.pid.pos_kd_z)));
    f.push_back(real("pid_max_accel_xy_mps2", M(c.pid.max_accel_xy_mps2)));
    f.push_back(real("pid_max_accel_z_mps2", M(c.pid.max_accel_z_mps2)));
    f.push_back(real("pid_max_tilt_rad", M(c.pid.max_tilt_rad)));
    f.push_back(real("pid_integral_limit", M(c.pid.integral_limit)));
    f.push_back(real("pid_att_kp", M(c.pid.att_kp)));
    f.push_back(real("pid_yaw_kp", M(c.pid.yaw_kp)));
    f.push_back(real("pid_rate_kp", M(c.pid.rate_kp)));
    f.push_back(real("pid_rate_kd", M(c.pid.rate_kd)));
    f.push_back(real("pid_tilt_kp", M(c.pid.tilt_kp)));

    f.push_back(vec<3>("eval_target_position_m", M(c.eval.target_position_m)));
    f.push_back(integer<std::uint64_t>("eval_max_steps", M(c.eval.max_steps)));
    f.push_back(real("eval_success_radius_m", M(c.eval.success_radius_m)));
    f.push_back({"eval_init_region",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   if (v == "cube") c.eval.init_region = InitRegion::Cube;
                   else if (v == "ball") c.eval.init_region = InitRegion::Ball;
                   else bad(k, "expected cube or ball, got '" + std::string(v) + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.eval.init_region == InitRegion::Cube ? "cube" : "ball");
                 }});
    f.push_back(real("eval_init_radius_m", M(c.eval.init_radius_m)));
    f.push_back(real("fault_response_probability", M(c.fault_response_probability)));

    f.push_back(vec<3>("mission_start_m", M(c.mission.start_m)));
    f.push_back(boolean("mission_randomize_start", M(c.mission.randomize_start)));
    f.push_back({"mission_waypoints",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   const std::vector<double> x = parse_doubles(k, v, 0);
                   if (x.empty() || x.size() % 3 != 0) bad(k, "expected x, y, z triples");
                   c.mission.waypoints.clear();
                   for (std::size_t i = 0; i < x.size(); i += 3) {
                     c.mission.waypoints.emplace_back(x[i], x[i + 1], x[i + 2]);
                   }
                 },
                 [](const RunConfig& c) {
                   std::vector<double> x;
                   for (const Eigen::Vector3d& w : c.mission.waypoints) {
                     x.insert(x.end(), {w.x(), w.y(), w.z()});
                   }
                   return fmt_list(x);
                 }});
    f.push_back(real("mission_reach_tolerance_m", M(c.mission.reach_tolerance_m)));
    f.push_back(integer<std::uint64_t>("mission_steps_per_waypoint", M(c.mission.steps_per_waypoint)));
    return f;
  }();
  return table;
}

#undef M

}  // namespace

void RunConfig::validate() const {
  sim.validate();
  episode.validate();
  reward.validate();
  train.validate();
  pid.validate();
  eval.validate();
  mission.validate();
  if (!(fault_response_probability >= 0.0 && fault_response_probability <= 1.0)) {
    bad("fault_response_probability", "must lie in [0, 1]");
  }
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string env_var_name(std::string_view key) {
  std::string name = "DEVRL_";
  for (char ch : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

RunConfig parse_config(std::string_view text, const EnvLookup& env) {
  std::map<std::string, std::string, std::less<>> values;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!values.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      bad(key, "given more than once");
    }
  }

  RunConfig config;
  for (const Field& f : fields()) {
    std::optional<std::string> v;
    if (env) v = env(env_var_name(f.key));
    if (!v) {
      const auto it = values.find(f.key);
      if (it == values.end()) bad(f.key, "missing key");
      v = it->second;
    }
    f.set(config, f.key, trim(*v));
    values.erase(f.key);
  }
  if (!values.empty()) bad(values.begin()->first, "unknown key");
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), env);
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + '\n';
  return out;
}

}  // namespace devrl
