#pragma once

// Binary checkpoint of an actor/critic pair with optimizer state.
//
// All integers little-endian, floats IEEE-754 binary64 little-endian.
//
//   offset  size  field
//   0       8     magic "DEVRLCKP"
//   8       4     u32 format version (= 1)
//   12      8     u64 master seed
//   20      8     u64 environment steps consumed
//   28      8     u64 update count
//   36      4     u32 number of networks (= 2: actor, critic)
//   then, per network:
//           4     u32 name length L, followed by L bytes of ASCII name
//           1     u8 output activation (0 = tanh, 1 = identity)
//           4     u32 number of layer widths D (= layers + 1)
//           8*D   u64 layer widths, input first
//           8     u64 parameter count P
//           8*P   f64 parameters (per layer: row-major weights, then bias)
//           ceil(P/8) frozen bits, bit i of byte i/8 (LSB first), 1 = frozen
//           8     u64 Adam step count
//           24    f64 beta1, beta2, eps
//           8*P   f64 first moments
//           8*P   f64 second moments

#include <cstdint>
#include <iosfwd>
#include <string>

#include "devrl/mlp.hpp"

namespace devrl {

struct Checkpoint {
  Mlp actor;
  Mlp critic;
  AdamState actor_opt;
  AdamState critic_opt;
  std::uint64_t seed = 0;
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

// Throws Error(IoError) on I/O failure or a malformed file.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace devrl
