#ifndef PCS_RANDOM_H_
#define PCS_RANDOM_H_

#include <cstdint>
#include <random>

namespace pcs {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent stream seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed drawn from the OS entropy source, for commands run without --seed.
inline std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace pcs

#endif  // PCS_RANDOM_H_
