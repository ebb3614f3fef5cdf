#pragma once

#include <cstdint>
#include <random>

namespace devrl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds from one master seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named streams so that, e.g., weight init and env init never share draws.
enum class Stream : std::uint64_t {
  WeightInit = 1,
  Env = 2,
  Action = 3,
  Shuffle = 4,
  Trial = 5,
  Fault = 6,
  Transfer = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return mix_seed(mix_seed(master ^ (static_cast<std::uint64_t>(stream) << 56)) + index);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

}  // namespace devrl
