#include "devrl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "devrl/error.hpp"

namespace devrl {
namespace {

constexpr std::array<char, 8> kMagic = {'D', 'E', 'V', 'R', 'L', 'C', 'K', 'P'};
constexpr std::uint64_t kMaxCount = 1ULL << 32;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorKind::IoError, "checkpoint truncated");
  return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& in, std::span<double> v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  if (!in) throw Error(ErrorKind::IoError, "checkpoint truncated");
}

void write_network(std::ostream& out, const std::string& name, const Mlp& net,
                   const AdamState& opt) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(net.output_activation()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.dims().size()));
  for (std::size_t d : net.dims()) put<std::uint64_t>(out, d);
  const std::size_t n = net.parameter_count();
  put<std::uint64_t>(out, n);
  const std::span<const double> params = net.parameters();
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size_bytes()));
  std::vector<std::uint8_t> bits((n + 7) / 8, 0);
  const std::span<const std::uint8_t> frozen = net.frozen_mask();
  for (std::size_t i = 0; i < n; ++i) {
    if (frozen[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (opt.first_moment.size() != n || opt.second_moment.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match network " + name);
  }
  put<std::uint64_t>(out, opt.step_count);
  put<double>(out, opt.beta1);
  put<double>(out, opt.beta2);
  put<double>(out, opt.eps);
  put_doubles(out, opt.first_moment);
  put_doubles(out, opt.second_moment);
}

void read_network(std::istream& in, const std::string& expected_name, Mlp& net, AdamState& opt) {
  const auto name_len = get<std::uint32_t>(in);
  if (name_len > 256) throw Error(ErrorKind::IoError, "checkpoint network name too long");
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  if (!in) throw Error(ErrorKind::IoError, "checkpoint truncated");
  if (name != expected_name) {
    throw Error(ErrorKind::IoError, "expected network '" + expected_name + "', found '" + name + "'");
  }
  const auto activation = get<std::uint8_t>(in);
  if (activation > 1) throw Error(ErrorKind::IoError, "unknown output activation");
  const auto depth = get<std::uint32_t>(in);
  if (depth < 2 || depth > 64) throw Error(ErrorKind::IoError, "implausible layer count");
  std::vector<std::size_t> dims(depth);
  for (auto& d : dims) {
    const auto w = get<std::uint64_t>(in);
    if (w == 0 || w > kMaxCount) throw Error(ErrorKind::IoError, "implausible layer width");
    d = static_cast<std::size_t>(w);
  }
  net = Mlp(dims, static_cast<OutputActivation>(activation));
  const auto n = get<std::uint64_t>(in);
  if (n != net.parameter_count()) {
    throw Error(ErrorKind::IoError, "parameter count does not match layer widths");
  }
  get_doubles(in, net.parameters());
  std::vector<std::uint8_t> bits((n + 7) / 8);
  in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!in) throw Error(ErrorKind::IoError, "checkpoint truncated");
  const std::span<std::uint8_t> frozen = net.frozen_mask();
  for (std::size_t i = 0; i < n; ++i) frozen[i] = (bits[i / 8] >> (i % 8)) & 1u;

  opt = AdamState(static_cast<std::size_t>(n));
  opt.step_count = get<std::uint64_t>(in);
  opt.beta1 = get<double>(in);
  opt.beta2 = get<double>(in);
  opt.eps = get<double>(in);
  get_doubles(in, opt.first_moment);
  get_doubles(in, opt.second_moment);
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.seed);
  put<std::uint64_t>(out, ckpt.env_steps);
  put<std::uint64_t>(out, ckpt.updates);
  put<std::uint32_t>(out, 2);
  write_network(out, "actor", ckpt.actor, ckpt.actor_opt);
  write_network(out, "critic", ckpt.critic, ckpt.critic_opt);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorKind::IoError, "not a devrl checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::IoError, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.seed = get<std::uint64_t>(in);
  ckpt.env_steps = get<std::uint64_t>(in);
  ckpt.updates = get<std::uint64_t>(in);
  if (get<std::uint32_t>(in) != 2) throw Error(ErrorKind::IoError, "expected two networks");
  read_network(in, "actor", ckpt.actor, ckpt.actor_opt);
  read_network(in, "critic", ckpt.critic, ckpt.critic_opt);
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  write_checkpoint(out, ckpt);
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace devrl
